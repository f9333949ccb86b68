//! Stability certificates for positive Lur'e loops: Aizerman-type sector
//! tests, the analytic cone ROA, and quadratic sublevel-set search.

mod aizerman;
mod quadratic;

pub use aizerman::{
    aizerman_check, aizerman_roa, cone_slack, linear_certificate, nn_aizerman_certify,
    sector_limits, AizermanROA, AizermanVerdict, LinearCertificate, NnAizerman, SectorLimits,
    SIGMA_BISECT_TOL,
};
pub use quadratic::{
    boundary_directions, quad_certificate, sublevel_roa, vdot, BoundaryViolation, QuadCertificate,
    RhoSchedule, SublevelRoa, VdotEvaluator, DEFAULT_SAMPLES_PER_LEVEL,
};

use thiserror::Error;

use crate::model::ModelError;
use crate::nnbound::BoundError;
use crate::numcore::NumError;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("needs a single-input single-output feedback channel, got m={m}, p={p}")]
    NotScalarChannel { m: usize, p: usize },
    #[error("needs a single output (p = 1), got p={0}")]
    NotSingleOutput(usize),
    #[error("sector is not stabilizing (metzler_ok={metzler_ok}, hurwitz_ok={hurwitz_ok})")]
    NotStable { metzler_ok: bool, hurwitz_ok: bool },
    #[error("no positive cone vector for the closed loop")]
    ConeInfeasible,
    #[error("no doubly positive P found for Q = I + eps*ones with eps up to {max_eps}")]
    NotDoublyPositive { max_eps: f64 },
    #[error("y_bar must be finite and nonnegative, got {0}")]
    InvalidBound(f64),
    #[error("P must be symmetric, positive definite and elementwise positive")]
    InvalidLyapunovMatrix,
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

use serde::Serialize;

use super::CertifyError;
use crate::model::{LureSystem, PositiveLTI, SectorInterval};
use crate::nnbound::{bisect_box, first_probe, propagate_sector, GammaBox, GammaSearch, NetworkSector};
use crate::numcore::{
    cone_vector_max_ratio, is_hurwitz, is_metzler, spectral_abscissa, ConeVector, Matrix, NumError,
    HURWITZ_MARGIN, METZLER_TOL,
};

/// Absolute tolerance of the bisection for `sigma2_max`.
pub const SIGMA_BISECT_TOL: f64 = 1e-6;

// Beyond this magnitude a sector slope is treated as unbounded.
const SIGMA_SEARCH_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AizermanVerdict {
    /// `A + B sigma1 C` is Metzler
    pub metzler_ok: bool,
    /// `A + B sigma2 C` is Hurwitz
    pub hurwitz_ok: bool,
    pub stable: bool,
    pub closed_loop_lower: Matrix,
    pub closed_loop_upper: Matrix,
    pub upper_abscissa: f64,
}

fn verdict_for(plant: &PositiveLTI, sigma1: &Matrix, sigma2: &Matrix) -> Result<AizermanVerdict, CertifyError> {
    let lower = plant.closed_loop(sigma1)?;
    let upper = plant.closed_loop(sigma2)?;
    let metzler_ok = is_metzler(&lower, METZLER_TOL)?;
    let upper_abscissa = spectral_abscissa(&upper)?;
    let hurwitz_ok = upper_abscissa < -HURWITZ_MARGIN;
    Ok(AizermanVerdict {
        metzler_ok,
        hurwitz_ok,
        stable: metzler_ok && hurwitz_ok,
        closed_loop_lower: lower,
        closed_loop_upper: upper,
        upper_abscissa,
    })
}

/// Positive Aizerman test: `A + B sigma1 C` Metzler and `A + B sigma2 C`
/// Hurwitz.
pub fn aizerman_check(plant: &PositiveLTI, sector: &SectorInterval) -> Result<AizermanVerdict, CertifyError> {
    verdict_for(plant, sector.sigma1(), sector.sigma2())
}

/// Range of scalar slopes `s` for which `A + s B C` is Metzler and Hurwitz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorLimits {
    /// Smallest slope keeping the closed loop Metzler; `-inf` if every slope
    /// does.
    pub sigma1_min: f64,
    /// Largest Hurwitz slope, `+inf` if unbounded, `None` if no slope in the
    /// Metzler range is Hurwitz.
    pub sigma2_max: Option<f64>,
}

impl SectorLimits {
    pub fn is_empty(&self) -> bool {
        self.sigma2_max.is_none()
    }
}

/// Stable sector limits of a scalar channel.
///
/// The Metzler bound is closed form. On the Metzler range the spectral
/// abscissa of `A + s B C` is non-decreasing in `s` (`BC >= 0`), so the
/// Hurwitz limit is found by bracketing and bisection.
pub fn sector_limits(plant: &PositiveLTI) -> Result<SectorLimits, CertifyError> {
    let (m, p) = (plant.input_dim(), plant.output_dim());
    if m != 1 || p != 1 {
        return Err(CertifyError::NotScalarChannel { m, p });
    }
    let a = plant.a();
    let bc = plant.b() * plant.c();
    let n = plant.state_dim();
    let mut sigma1_min = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j && bc[(i, j)] > 0.0 {
                // + 0.0 turns -0 into 0
                sigma1_min = sigma1_min.max(-a[(i, j)] / bc[(i, j)] + 0.0);
            }
        }
    }
    // the quotient can round a few ulps low of the exact boundary
    for _ in 0..16 {
        if !sigma1_min.is_finite() || is_metzler(&plant.closed_loop_scalar(sigma1_min), METZLER_TOL)? {
            break;
        }
        sigma1_min = sigma1_min.next_up();
    }
    let hurwitz = |s: f64| is_hurwitz(&plant.closed_loop_scalar(s), HURWITZ_MARGIN);

    let start = if sigma1_min.is_finite() {
        hurwitz(sigma1_min)?.then_some(sigma1_min)
    } else {
        let mut s = -1.0;
        loop {
            if hurwitz(s)? {
                break Some(s);
            }
            if s < -SIGMA_SEARCH_LIMIT {
                break None;
            }
            s *= 2.0;
        }
    };
    let Some(mut lo) = start else {
        return Ok(SectorLimits {
            sigma1_min,
            sigma2_max: None,
        });
    };

    let mut step = lo.abs().max(1.0);
    let mut hi = lo + step;
    while hurwitz(hi)? {
        lo = hi;
        step *= 2.0;
        if step > SIGMA_SEARCH_LIMIT {
            return Ok(SectorLimits {
                sigma1_min,
                sigma2_max: Some(f64::INFINITY),
            });
        }
        hi = lo + step;
    }
    while hi - lo > SIGMA_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if hurwitz(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SectorLimits {
        sigma1_min,
        sigma2_max: Some(lo),
    })
}

/// Result of certifying a network loop through its local sector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnAizerman {
    pub certified: bool,
    pub y_probe_max: f64,
    pub tol: f64,
    /// Only for single-input single-output plants.
    pub limits: Option<SectorLimits>,
    /// Largest certified box, `None` when even the smallest probe fails.
    pub y_bar: Option<f64>,
    /// Sector at `y_bar`, or at the smallest probe on failure.
    pub sector: NetworkSector,
    pub verdict: AizermanVerdict,
    pub failure: Option<String>,
}

impl NnAizerman {
    /// The certified local sector as a `SectorInterval`.
    pub fn sector_interval(&self) -> Option<SectorInterval> {
        let y = self.y_bar?;
        SectorInterval::new(self.sector.gamma1.clone(), self.sector.gamma2.clone(), vec![y]).ok()
    }
}

/// Largest `[0, y_bar]` on which the network's propagated sector makes
/// `A + B gamma1 C` Metzler and `A + B gamma2 C` Hurwitz.
pub fn nn_aizerman_certify(
    system: &LureSystem,
    y_probe_max: f64,
    tol: f64,
) -> Result<NnAizerman, CertifyError> {
    let plant = system.plant();
    let net = system.feedback();
    if plant.output_dim() != 1 {
        return Err(CertifyError::NotSingleOutput(plant.output_dim()));
    }
    let limits = if plant.input_dim() == 1 {
        Some(sector_limits(plant)?)
    } else {
        None
    };
    let accept = |g1: &Matrix, g2: &Matrix| -> bool {
        let (Ok(lower), Ok(upper)) = (plant.closed_loop(g1), plant.closed_loop(g2)) else {
            return false;
        };
        matches!(is_metzler(&lower, METZLER_TOL), Ok(true))
            && matches!(is_hurwitz(&upper, HURWITZ_MARGIN), Ok(true))
    };
    let search = bisect_box(net, y_probe_max, tol, accept)?;
    match search {
        GammaSearch::Found { y_bar, sector } => {
            let verdict = verdict_for(plant, &sector.gamma1, &sector.gamma2)?;
            Ok(NnAizerman {
                certified: true,
                y_probe_max,
                tol,
                limits,
                y_bar: Some(y_bar),
                sector,
                verdict,
                failure: None,
            })
        }
        GammaSearch::Empty => {
            let probe = first_probe(y_probe_max, tol);
            let sector = propagate_sector(net, &GammaBox::scalar(probe)?)?;
            let verdict = verdict_for(plant, &sector.gamma1, &sector.gamma2)?;
            let mut failed = Vec::new();
            if !verdict.metzler_ok {
                failed.push("A + B gamma1 C is not Metzler");
            }
            if !verdict.hurwitz_ok {
                failed.push("A + B gamma2 C is not Hurwitz");
            }
            Ok(NnAizerman {
                certified: false,
                y_probe_max,
                tol,
                limits,
                y_bar: None,
                sector,
                verdict,
                failure: Some(format!("at y_bar = {probe:e}: {}", failed.join("; "))),
            })
        }
    }
}

/// Slack for the cone-vector LP: strict, but small next to the closed loop's
/// own decay rate.
pub fn cone_slack(m: &Matrix) -> Result<f64, NumError> {
    Ok(1e-6_f64.min(1e-2 * spectral_abscissa(m)?.abs()))
}

/// Analytic region `{x0 >= 0 : C x0 <= ratio * y_bar}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AizermanROA {
    pub v: ConeVector,
    pub ratio: f64,
    pub y_bar: f64,
    pub bound: f64,
    pub slack: f64,
}

impl AizermanROA {
    pub fn contains(&self, c: &Matrix, x0: &[f64]) -> bool {
        x0.iter().all(|&x| x >= 0.0) && c.matvec(x0).expect("C dims")[0] <= self.bound
    }
}

pub fn aizerman_roa(
    plant: &PositiveLTI,
    sector: &SectorInterval,
    y_bar: f64,
) -> Result<AizermanROA, CertifyError> {
    if plant.output_dim() != 1 {
        return Err(CertifyError::NotSingleOutput(plant.output_dim()));
    }
    if !(y_bar.is_finite() && y_bar >= 0.0) {
        return Err(CertifyError::InvalidBound(y_bar));
    }
    let verdict = aizerman_check(plant, sector)?;
    if !verdict.stable {
        return Err(CertifyError::NotStable {
            metzler_ok: verdict.metzler_ok,
            hurwitz_ok: verdict.hurwitz_ok,
        });
    }
    let m = verdict.closed_loop_upper;
    let slack = cone_slack(&m)?;
    let v = cone_vector_max_ratio(&m, slack).map_err(|_| CertifyError::ConeInfeasible)?;
    let ratio = v.ratio();
    Ok(AizermanROA {
        ratio,
        y_bar,
        bound: ratio * y_bar,
        slack,
        v,
    })
}

/// Copositive linear Lyapunov function `V(x) = v^T x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearCertificate {
    pub v: ConeVector,
    /// `max_j (v^T M)_j`, strictly negative
    pub margin: f64,
}

pub fn linear_certificate(plant: &PositiveLTI, sigma2: &Matrix) -> Result<LinearCertificate, CertifyError> {
    let m = plant.closed_loop(sigma2)?;
    let metzler_ok = is_metzler(&m, METZLER_TOL)?;
    let hurwitz_ok = is_hurwitz(&m, HURWITZ_MARGIN)?;
    if !(metzler_ok && hurwitz_ok) {
        return Err(CertifyError::NotStable {
            metzler_ok,
            hurwitz_ok,
        });
    }
    let v = cone_vector_max_ratio(&m, cone_slack(&m)?).map_err(|_| CertifyError::ConeInfeasible)?;
    let margin = v.left_product(&m).into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(LinearCertificate { v, margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, FeedforwardNet};

    fn plant() -> PositiveLTI {
        PositiveLTI::new(
            Matrix::from_rows(&[[-7.0, 5.0], [6.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0], [2.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn check_examples() {
        let p = plant();
        let ok = aizerman_check(&p, &SectorInterval::scalar(-3.0, -1.276, 12.2).unwrap()).unwrap();
        assert!(ok.stable);
        let v = aizerman_check(&p, &SectorInterval::scalar(-3.01, -1.276, 12.2).unwrap()).unwrap();
        assert!(!v.metzler_ok && v.hurwitz_ok);
        let v = aizerman_check(&p, &SectorInterval::scalar(-3.0, -1.2, 12.2).unwrap()).unwrap();
        assert!(v.metzler_ok && !v.hurwitz_ok && !v.stable);
    }

    #[test]
    fn limits_of_worked_plant() {
        let l = sector_limits(&plant()).unwrap();
        assert_eq!(l.sigma1_min, -3.0);
        let s2 = l.sigma2_max.unwrap();
        assert!((s2 + 37.0 / 29.0).abs() < 1e-5, "{s2}");
    }

    #[test]
    fn limits_unbounded_when_input_is_idle() {
        let p = PositiveLTI::new(
            Matrix::from_rows(&[[-1.0, 0.5], [0.0, -2.0]]).unwrap(),
            Matrix::from_rows(&[[0.0], [0.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let l = sector_limits(&p).unwrap();
        assert_eq!(l.sigma1_min, f64::NEG_INFINITY);
        assert_eq!(l.sigma2_max, Some(f64::INFINITY));
    }

    #[test]
    fn limits_of_decoupled_plant() {
        // A + s B C = [[-1 + s, 0], [s, -1]]: Metzler iff s >= 0, Hurwitz iff s < 1
        let p = PositiveLTI::new(
            Matrix::diag(&[-1.0, -1.0]),
            Matrix::from_rows(&[[1.0], [1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let l = sector_limits(&p).unwrap();
        assert_eq!(l.sigma1_min, 0.0);
        assert!((l.sigma2_max.unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn empty_limits() {
        let p = PositiveLTI::new(
            Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0], [1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        // off-diagonal 1 + s >= 0 forces s >= -1, where the loop is [[0,0],[0,0]]
        assert!(sector_limits(&p).unwrap().is_empty());
    }

    #[test]
    fn roa_examples() {
        let p = plant();
        let s = SectorInterval::scalar(-3.0, -1.276, 12.2).unwrap();
        let r = aizerman_roa(&p, &s, 12.2).unwrap();
        assert!((0.41..=0.42).contains(&r.ratio), "{}", r.ratio);
        assert!((5.0..=5.15).contains(&r.bound), "{}", r.bound);
        assert_eq!(aizerman_roa(&p, &s, 0.0).unwrap().bound, 0.0);
    }

    #[test]
    fn linear_certificate_examples() {
        let p = plant();
        let c = linear_certificate(&p, &Matrix::scalar(-1.276)).unwrap();
        assert!(c.margin < 0.0);
        let ident = PositiveLTI::new(
            Matrix::diag(&[-1.0, -1.0]),
            Matrix::zeros(2, 1),
            Matrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(linear_certificate(&ident, &Matrix::scalar(0.0)).unwrap().v.entries(), &[1.0, 1.0]);
        assert!(matches!(
            linear_certificate(&p, &Matrix::scalar(0.0)),
            Err(CertifyError::NotStable { .. })
        ));
    }

    #[test]
    fn toy_net_certifies_near_crossing() {
        let net = FeedforwardNet::new(
            vec![Matrix::scalar(1.0), Matrix::scalar(-2.0)],
            vec![Activation::Tanh],
        )
        .unwrap();
        let sys = LureSystem::new(plant(), net).unwrap();
        let c = nn_aizerman_certify(&sys, 20.0, 1e-4).unwrap();
        assert!(c.certified);
        let y = c.y_bar.unwrap();
        assert!((1.3..1.45).contains(&y), "{y}");
    }

    #[test]
    fn zero_net_on_unstable_plant_fails() {
        let net = FeedforwardNet::linear(Matrix::scalar(0.0)).unwrap();
        let sys = LureSystem::new(plant(), net).unwrap();
        let c = nn_aizerman_certify(&sys, 20.0, 1e-4).unwrap();
        assert!(!c.certified);
        assert!(c.failure.unwrap().contains("Hurwitz"));
    }
}

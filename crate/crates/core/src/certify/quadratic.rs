use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::CertifyError;
use crate::model::{LureSystem, NetEvaluator, PositiveLTI};
use crate::numcore::{
    cholesky, is_hurwitz, is_metzler, lyapunov_solve, orthant_ellipsoid_max, symmetric_eigen_min, Matrix,
    HURWITZ_MARGIN, METZLER_TOL,
};

pub const DEFAULT_SAMPLES_PER_LEVEL: usize = 512;

const Q_EPSILONS: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Doubly positive `P` with `M^T P + P M < 0` for `M = A + B sigma2 C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadCertificate {
    pub p: Matrix,
    /// `Q = I + q_epsilon * ones` produced `P`
    pub q_epsilon: f64,
    /// largest eigenvalue of `M^T P + P M`
    pub residual_abscissa: f64,
    pub p_min_eigenvalue: f64,
    pub p_min_entry: f64,
}

fn max_symmetric_eigen(m: &Matrix) -> Result<f64, CertifyError> {
    Ok(-symmetric_eigen_min(&m.scale(-1.0))?)
}

pub fn quad_certificate(plant: &PositiveLTI, sigma2: &Matrix) -> Result<QuadCertificate, CertifyError> {
    let m = plant.closed_loop(sigma2)?;
    let metzler_ok = is_metzler(&m, METZLER_TOL)?;
    let hurwitz_ok = is_hurwitz(&m, HURWITZ_MARGIN)?;
    if !(metzler_ok && hurwitz_ok) {
        return Err(CertifyError::NotStable {
            metzler_ok,
            hurwitz_ok,
        });
    }
    let n = m.rows();
    for &eps in &Q_EPSILONS {
        let q = &Matrix::identity(n) + &Matrix::filled(n, n, eps);
        let p = lyapunov_solve(&m, &q)?;
        if p.min_entry() <= 0.0 || cholesky(&p).is_err() {
            continue;
        }
        let residual = &(&m.transpose() * &p) + &(&p * &m);
        let residual_abscissa = max_symmetric_eigen(&residual)?;
        if residual_abscissa >= 0.0 {
            continue;
        }
        return Ok(QuadCertificate {
            p_min_eigenvalue: symmetric_eigen_min(&p)?,
            p_min_entry: p.min_entry(),
            p,
            q_epsilon: eps,
            residual_abscissa,
        });
    }
    Err(CertifyError::NotDoublyPositive {
        max_eps: Q_EPSILONS[Q_EPSILONS.len() - 1],
    })
}

fn check_p(system: &LureSystem, p: &Matrix) -> Result<(), CertifyError> {
    let n = system.plant().state_dim();
    if p.shape() != (n, n) {
        return Err(CertifyError::Dimension(format!("P must be {n}x{n}, got {:?}", p.shape())));
    }
    Ok(())
}

/// Evaluates `V'(x) = x^T (A^T P + P A) x + 2 x^T P B NN(C x)` without
/// allocating per call.
pub struct VdotEvaluator<'a> {
    s: Matrix,
    pb: Matrix,
    c: &'a Matrix,
    net: NetEvaluator<'a>,
    y: Vec<f64>,
}

impl<'a> VdotEvaluator<'a> {
    pub fn new(system: &'a LureSystem, p: &Matrix) -> Result<Self, CertifyError> {
        check_p(system, p)?;
        let plant = system.plant();
        let s = &(&plant.a().transpose() * p) + &(p * plant.a());
        Ok(Self {
            s,
            pb: p * plant.b(),
            c: plant.c(),
            net: system.feedback().evaluator(),
            y: vec![0.0; plant.output_dim()],
        })
    }

    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.c.matvec_into(x, &mut self.y);
        let u = self.net.eval(&self.y);
        let quad = self.s.quadratic_form(x, x);
        let n = x.len();
        let mut cross = 0.0;
        for i in 0..n {
            let row = self.pb.row(i);
            let pbu: f64 = row.iter().zip(u).map(|(a, b)| a * b).sum();
            cross += x[i] * pbu;
        }
        quad + 2.0 * cross
    }
}

/// Lyapunov derivative along the closed loop at `x`.
pub fn vdot(system: &LureSystem, p: &Matrix, x: &[f64]) -> Result<f64, CertifyError> {
    if x.len() != system.plant().state_dim() {
        return Err(CertifyError::Dimension(format!(
            "state has length {}, expected {}",
            x.len(),
            system.plant().state_dim()
        )));
    }
    Ok(VdotEvaluator::new(system, p)?.eval(x))
}

/// Levels tried by the sublevel search: geometric from `rho0` by `factor`
/// up to `rho_cap`, then bisection to relative width `rel_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoSchedule {
    pub rho0: f64,
    pub factor: f64,
    pub rho_cap: f64,
    pub rel_tol: f64,
}

impl RhoSchedule {
    /// `rho0 = 1e-3 trace(P)`, factor 1.3, cap `1e6 rho0`.
    pub fn for_p(p: &Matrix) -> Self {
        let rho0 = 1e-3 * p.trace();
        Self {
            rho0,
            factor: 1.3,
            rho_cap: 1e6 * rho0,
            rel_tol: 1e-3,
        }
    }
}

/// Points `u >= 0` with `u^T P u = 1`: the coordinate axes first, then
/// Gaussian directions pushed through `L^{-T}` (`P = L L^T`) and folded into
/// the orthant.
pub fn boundary_directions(p: &Matrix, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, CertifyError> {
    let l = cholesky(p).map_err(|_| CertifyError::InvalidLyapunovMatrix)?;
    let n = p.rows();
    let mut out = Vec::with_capacity(count);
    for i in 0..n.min(count) {
        let mut u = vec![0.0; n];
        u[i] = 1.0 / p[(i, i)].sqrt();
        out.push(u);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        // back-substitute L^T z = d
        let mut z = d;
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[(k, i)] * z[k]).sum();
            z[i] = (z[i] - s) / l[(i, i)];
        }
        let x: Vec<f64> = z.iter().map(|v| v.abs()).collect();
        let q = p.quadratic_form(&x, &x);
        if !(q > 0.0 && q.is_finite()) {
            continue;
        }
        let s = q.sqrt();
        out.push(x.iter().map(|v| v / s).collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryViolation {
    pub rho: f64,
    pub x: Vec<f64>,
    pub vdot: f64,
    pub sample_index: usize,
}

/// Outcome of the sublevel-set search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SublevelRoa {
    pub rho_max: f64,
    /// The schedule ran out before any level failed.
    pub capped: bool,
    pub levels_tested: usize,
    pub samples_per_level: usize,
    pub seed: u64,
    pub schedule: RhoSchedule,
    /// Violation at the smallest failing level found.
    pub first_violation: Option<BoundaryViolation>,
    /// `max (C x)_i` over `{x >= 0 : x^T P x <= rho_max}`, per output.
    pub output_bound: Vec<f64>,
}

impl SublevelRoa {
    /// Whether the certified ellipsoid lies inside `{C x <= y_bar}`.
    pub fn within_output_box(&self, y_bar: &[f64]) -> bool {
        self.output_bound.iter().zip(y_bar).all(|(b, y)| b <= y)
    }
}

/// `max (C x)_i` over the orthant part of `{x^T P x <= rho}`.
pub fn ellipsoid_output_bound(p: &Matrix, c: &Matrix, rho: f64) -> Result<Vec<f64>, CertifyError> {
    (0..c.rows())
        .map(|i| Ok(orthant_ellipsoid_max(p, c.row(i), rho)?))
        .collect()
}

/// Largest `rho` such that `V' < 0` at every boundary sample of
/// `{x >= 0 : x^T P x = rho}` for every tested level up to it.
pub fn sublevel_roa(
    system: &LureSystem,
    p: &Matrix,
    schedule: &RhoSchedule,
    samples_per_level: usize,
    seed: u64,
) -> Result<SublevelRoa, CertifyError> {
    check_p(system, p)?;
    if !p.is_symmetric(1e-12 * p.inf_norm()) || p.min_entry() <= 0.0 {
        return Err(CertifyError::InvalidLyapunovMatrix);
    }
    let dirs = boundary_directions(p, samples_per_level, seed)?;
    let mut ev = VdotEvaluator::new(system, p)?;
    let mut x = vec![0.0; p.rows()];
    let mut test = |rho: f64| -> Option<BoundaryViolation> {
        let r = rho.sqrt();
        for (k, u) in dirs.iter().enumerate() {
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi = r * ui;
            }
            let v = ev.eval(&x);
            if !(v < 0.0) {
                return Some(BoundaryViolation {
                    rho,
                    x: x.clone(),
                    vdot: v,
                    sample_index: k,
                });
            }
        }
        None
    };

    let mut levels = 0;
    let mut last_pass = 0.0;
    let mut rho = schedule.rho0;
    let mut capped = false;
    let mut violation = None;
    loop {
        levels += 1;
        if let Some(v) = test(rho) {
            violation = Some(v);
            break;
        }
        last_pass = rho;
        if rho >= schedule.rho_cap {
            capped = true;
            break;
        }
        rho = (rho * schedule.factor).min(schedule.rho_cap);
    }

    if let Some(first) = violation.as_ref() {
        if last_pass > 0.0 {
            let mut lo = last_pass;
            let mut hi = first.rho;
            let mut smallest = first.clone();
            while hi - lo > schedule.rel_tol * hi {
                let mid = 0.5 * (lo + hi);
                levels += 1;
                match test(mid) {
                    Some(v) => {
                        hi = mid;
                        smallest = v;
                    }
                    None => lo = mid,
                }
            }
            last_pass = lo;
            violation = Some(smallest);
        }
    }

    Ok(SublevelRoa {
        rho_max: last_pass,
        capped,
        levels_tested: levels,
        samples_per_level: dirs.len(),
        seed,
        schedule: *schedule,
        first_violation: violation,
        output_bound: ellipsoid_output_bound(p, system.plant().c(), last_pass)?,
    })
}

use serde::{Deserialize, Serialize};

use super::lp::{self, Lp, LpOutcome};
use super::{Matrix, NumError};

/// Tolerance when comparing optimal ratios `v_min / v_max` across LP backends.
pub const RATIO_TOL: f64 = 1e-4;

/// A strictly positive vector together with its extreme entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeVector {
    entries: Vec<f64>,
    v_min: f64,
    v_max: f64,
}

impl ConeVector {
    /// Returns `None` unless every entry is finite and strictly positive.
    pub fn new(entries: Vec<f64>) -> Option<Self> {
        if entries.is_empty() || entries.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return None;
        }
        let v_min = entries.iter().copied().fold(f64::INFINITY, f64::min);
        let v_max = entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            entries,
            v_min,
            v_max,
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn ratio(&self) -> f64 {
        self.v_min / self.v_max
    }

    /// `v^T m` as a row.
    pub fn left_product(&self, m: &Matrix) -> Vec<f64> {
        (0..m.cols())
            .map(|j| (0..m.rows()).map(|i| self.entries[i] * m[(i, j)]).sum())
            .collect()
    }
}

/// Finds `v > 0` with `v^T m <= -slack` maximizing `v_min / v_max`.
///
/// With `v <= 1` the ratio is at least `t` whenever `t <= v`, and scaling the
/// optimum to `v_max = 1` attains it, so `max t` over
/// `{ t <= v <= 1, v^T m <= -slack }` is the optimal ratio. A second LP at
/// that `t` maximizes the decay margin.
pub fn cone_vector_max_ratio(m: &Matrix, slack: f64) -> Result<ConeVector, NumError> {
    max_ratio_with(m, slack, lp::solve)
}

pub(crate) fn max_ratio_with(
    m: &Matrix,
    slack: f64,
    solver: fn(&Lp) -> LpOutcome,
) -> Result<ConeVector, NumError> {
    let n = m.require_square("cone_vector_max_ratio")?;
    let infeasible = NumError::ConeInfeasible { slack };
    let t_star = match solver(&joint_lp(m, n, slack)) {
        LpOutcome::Optimal { x, .. } => x[n].min(1.0),
        _ => return Err(infeasible),
    };
    if t_star <= 0.0 {
        return Err(infeasible);
    }
    let mut t = t_star;
    for _ in 0..8 {
        let problem = ratio_lp(m, n, slack, t, true);
        if let Some(w) = solver(&problem).point() {
            let v = w.iter().map(|wi| (wi + t).min(1.0)).collect();
            return ConeVector::new(v).ok_or(infeasible);
        }
        // rounding in the first LP can leave t a hair above the optimum
        t -= 1e-12 + 1e-9 * t;
    }
    Err(infeasible)
}

/// LP over `(v, t) >= 0`: maximize `t` with `t <= v_i <= 1`,
/// `m^T v <= -slack`.
fn joint_lp(m: &Matrix, n: usize, slack: f64) -> Lp {
    let mut a = Matrix::zeros(3 * n, n + 1);
    let mut b = vec![0.0; 3 * n];
    for i in 0..n {
        a[(i, i)] = -1.0;
        a[(i, n)] = 1.0;
        a[(n + i, i)] = 1.0;
        b[n + i] = 1.0;
    }
    for j in 0..n {
        for i in 0..n {
            a[(2 * n + j, i)] = m[(i, j)];
        }
        b[2 * n + j] = -slack;
    }
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    Lp { c, a, b }
}

/// LP over `w = v - t 1 >= 0`:
/// `w <= 1 - t`, `m^T w <= -slack - t m^T 1`.
fn ratio_lp(m: &Matrix, n: usize, slack: f64, t: f64, maximize_margin: bool) -> Lp {
    let mut a = Matrix::zeros(2 * n, n);
    let mut b = vec![0.0; 2 * n];
    for i in 0..n {
        a[(i, i)] = 1.0;
        b[i] = 1.0 - t;
    }
    for j in 0..n {
        let mut colsum = 0.0;
        for i in 0..n {
            a[(n + j, i)] = m[(i, j)];
            colsum += m[(i, j)];
        }
        b[n + j] = -slack - t * colsum;
    }
    // optional objective: maximize -sum_j (m^T w)_j
    let c = if maximize_margin {
        (0..n).map(|i| -(0..n).map(|j| m[(i, j)]).sum::<f64>()).collect()
    } else {
        vec![0.0; n]
    };
    Lp { c, a, b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_decoupled_case() {
        let v = cone_vector_max_ratio(&Matrix::diag(&[-1.0, -1.0]), 1e-6).unwrap();
        assert_eq!(v.entries(), &[1.0, 1.0]);
        assert_eq!(v.ratio(), 1.0);
    }

    #[test]
    fn closed_loop_band() {
        let m = Matrix::from_rows(&[[-8.276, 3.724], [3.448, -1.552]]).unwrap();
        let v = cone_vector_max_ratio(&m, 1e-6).unwrap();
        // feasible band for v2/v1 is (3.724/1.552, 8.276/3.448), so the best
        // ratio is v1/v2 = 3.448/8.276 up to the slack
        let exact = 3.448 / 8.276;
        assert!((v.ratio() - exact).abs() < 1e-3, "{}", v.ratio());
        assert!(v.left_product(&m).iter().all(|&x| x < 0.0));
    }

    #[test]
    fn unstable_is_infeasible() {
        assert!(matches!(
            cone_vector_max_ratio(&Matrix::scalar(1.0), 1e-6),
            Err(NumError::ConeInfeasible { .. })
        ));
    }

    #[test]
    fn simplex_path_matches_vertex_path() {
        let m = Matrix::from_rows(&[[-3.0, 1.0, 0.5], [0.2, -2.0, 1.0], [1.0, 0.3, -4.0]]).unwrap();
        let a = max_ratio_with(&m, 1e-6, lp::vertex_enumeration).unwrap();
        let b = max_ratio_with(&m, 1e-6, lp::simplex).unwrap();
        assert!((a.ratio() - b.ratio()).abs() < 2.0 * RATIO_TOL);
        let big = cone_vector_max_ratio(&Matrix::diag(&[-1.0, -2.0, -1.0, -3.0, -1.0]), 1e-6).unwrap();
        assert_eq!(big.ratio(), 1.0);
    }
}

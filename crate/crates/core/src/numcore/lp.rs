//! Tiny dense linear programs in the form
//!
//! ```text
//! maximize c^T x  subject to  A x <= b,  x >= 0
//! ```
//!
//! Two exact backends: vertex enumeration (only sensible for a handful of
//! variables, and it assumes a bounded feasible set) and a two-phase tableau
//! simplex with Bland's rule. [`solve`] picks between them by dimension.

use super::{lu_solve, Matrix, NumError};

/// Problems with at most this many variables go to vertex enumeration.
pub const VERTEX_ENUMERATION_MAX_VARS: usize = 2;

#[derive(Debug, Clone)]
pub struct Lp {
    pub c: Vec<f64>,
    pub a: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

impl Lp {
    pub fn new(c: Vec<f64>, a: Matrix, b: Vec<f64>) -> Result<Self, NumError> {
        if a.cols() != c.len() || a.rows() != b.len() {
            return Err(NumError::DimensionMismatch {
                op: "lp",
                left: a.shape(),
                right: (b.len(), c.len()),
            });
        }
        Ok(Self { c, a, b })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    /// Largest constraint violation of `x`, including nonnegativity.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|&v| -v).fold(0.0, f64::max);
        for (i, &bi) in self.b.iter().enumerate() {
            let lhs: f64 = self.a.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            worst = worst.max(lhs - bi);
        }
        worst
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn feas_tol(&self, i: usize, x: &[f64]) -> f64 {
        let mag: f64 = self.a.row(i).iter().zip(x).map(|(a, b)| (a * b).abs()).sum();
        1e-12 * (1.0 + self.b[i].abs() + mag)
    }
}

/// Solves with vertex enumeration for small problems, simplex otherwise.
pub fn solve(lp: &Lp) -> LpOutcome {
    if lp.num_vars() <= VERTEX_ENUMERATION_MAX_VARS {
        vertex_enumeration(lp)
    } else {
        simplex(lp)
    }
}

/// Enumerates every basic point (n active constraints out of m + n) and keeps
/// the best feasible one. Never reports `Unbounded`.
pub fn vertex_enumeration(lp: &Lp) -> LpOutcome {
    let n = lp.num_vars();
    let m = lp.b.len();
    if n == 0 {
        return if lp.b.iter().all(|&v| v >= 0.0) {
            LpOutcome::Optimal {
                x: vec![],
                value: 0.0,
            }
        } else {
            LpOutcome::Infeasible
        };
    }
    // Rows 0..m are A x <= b, rows m..m+n are -x_i <= 0.
    let total = m + n;
    let row_of = |r: usize| -> (Vec<f64>, f64) {
        if r < m {
            (lp.a.row(r).to_vec(), lp.b[r])
        } else {
            let mut e = vec![0.0; n];
            e[r - m] = -1.0;
            (e, 0.0)
        }
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    if n > total {
        return LpOutcome::Infeasible;
    }
    loop {
        let mut sys = Matrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        for (k, &r) in idx.iter().enumerate() {
            let (coef, b) = row_of(r);
            for (j, v) in coef.into_iter().enumerate() {
                sys[(k, j)] = v;
            }
            rhs[k] = b;
        }
        if let Ok(x) = lu_solve(&sys, &rhs) {
            let nonneg = x.iter().all(|&v| v >= -1e-12 * (1.0 + v.abs()));
            let feasible = nonneg && (0..m).all(|i| {
                let lhs: f64 = lp.a.row(i).iter().zip(&x).map(|(a, b)| a * b).sum();
                lhs <= lp.b[i] + lp.feas_tol(i, &x)
            });
            if feasible {
                let x: Vec<f64> = x.into_iter().map(|v| v.max(0.0)).collect();
                let value = lp.objective(&x);
                if best.as_ref().map_or(true, |(_, bv)| value > *bv) {
                    best = Some((x, value));
                }
            }
        }
        // next combination in lexicographic order
        let mut k = n;
        loop {
            if k == 0 {
                return match best {
                    Some((x, value)) => LpOutcome::Optimal { x, value },
                    None => LpOutcome::Infeasible,
                };
            }
            k -= 1;
            if idx[k] < total - (n - k) {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

struct Tableau {
    /// m rows, `cols + 1` entries each; last entry is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

const PIVOT_EPS: f64 = 1e-11;

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[i][self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let prow = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Maximizes `cost` over columns allowed by `allowed`, starting from the
    /// current feasible basis. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> bool {
        let max_iter = 50 * (self.cols + self.t.len() + 10);
        for _ in 0..max_iter {
            // Bland: first improving column
            let entering = (0..self.cols).filter(|&j| allowed(j)).find(|&j| {
                let reduced = cost[j]
                    - self
                        .t
                        .iter()
                        .zip(&self.basis)
                        .map(|(r, &bj)| cost[bj] * r[j])
                        .sum::<f64>();
                reduced > PIVOT_EPS * (1.0 + cost[j].abs())
            });
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return false,
                Some((row, _)) => self.pivot(row, col),
            }
        }
        true
    }
}

/// Two-phase tableau simplex with Bland's anti-cycling rule.
pub fn simplex(lp: &Lp) -> LpOutcome {
    let n = lp.num_vars();
    let m = lp.b.len();
    let neg_rows: Vec<usize> = (0..m).filter(|&i| lp.b[i] < 0.0).collect();
    let k = neg_rows.len();
    // columns: x (n) | slack (m) | artificial (k)
    let cols = n + m + k;
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut art = 0;
    for i in 0..m {
        let flip = lp.b[i] < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sgn * lp.a[(i, j)];
        }
        t[i][n + i] = sgn;
        t[i][cols] = sgn * lp.b[i];
        if flip {
            t[i][n + m + art] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { t, basis, cols };

    if k > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(n + m) {
            *c = -1.0;
        }
        tab.optimize(&phase1, |_| true);
        let infeas: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= n + m)
            .map(|i| tab.rhs(i))
            .sum();
        let scale = 1.0 + lp.b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // drive zero-valued artificials out of the basis
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| tab.t[i][j].abs() > PIVOT_EPS) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&lp.c);
    if !tab.optimize(&phase2, |j| j < n + m) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < n {
            x[bj] = tab.rhs(i).max(0.0);
        }
    }
    let value = lp.objective(&x);
    LpOutcome::Optimal { x, value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(c: &[f64], a: &[&[f64]], b: &[f64]) -> Lp {
        Lp::new(c.to_vec(), Matrix::from_rows(a).unwrap(), b.to_vec()).unwrap()
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let p = lp(&[3.0, 5.0], &[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 2.0]], &[4.0, 12.0, 18.0]);
        for out in [vertex_enumeration(&p), simplex(&p)] {
            let LpOutcome::Optimal { x, value } = out else { panic!("{out:?}") };
            assert!((value - 36.0).abs() < 1e-9);
            assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_rhs_needs_phase_one() {
        // x + y >= 2 written as -x - y <= -2, x <= 3, y <= 3; min x + y
        let p = lp(&[-1.0, -1.0], &[&[-1.0, -1.0], &[1.0, 0.0], &[0.0, 1.0]], &[-2.0, 3.0, 3.0]);
        for out in [vertex_enumeration(&p), simplex(&p)] {
            let LpOutcome::Optimal { value, .. } = out else { panic!() };
            assert!((value + 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[1.0], &[&[1.0], &[-1.0]], &[1.0, -2.0]);
        assert_eq!(vertex_enumeration(&p), LpOutcome::Infeasible);
        assert_eq!(simplex(&p), LpOutcome::Infeasible);
        let u = lp(&[1.0, 0.0], &[&[0.0, 1.0]], &[1.0]);
        assert_eq!(simplex(&u), LpOutcome::Unbounded);
    }

    #[test]
    fn backends_agree_on_random_bounded_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=5);
            let mut rows = Vec::new();
            let mut b = Vec::new();
            for _ in 0..m {
                rows.push((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>());
                b.push(rng.gen_range(-2.0..4.0));
            }
            // box keeps the region bounded
            for j in 0..n {
                let mut r = vec![0.0; n];
                r[j] = 1.0;
                rows.push(r);
                b.push(5.0);
            }
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = Matrix::from_rows(&rows).unwrap();
            let p = Lp::new(c, a, b).unwrap();
            let v = vertex_enumeration(&p);
            let s = simplex(&p);
            match (&v, &s) {
                (LpOutcome::Infeasible, LpOutcome::Infeasible) => {}
                (LpOutcome::Optimal { value: a, .. }, LpOutcome::Optimal { value: b, x }) => {
                    assert!((a - b).abs() < 1e-7, "{v:?} vs {s:?}");
                    assert!(p.max_violation(x) < 1e-8);
                }
                _ => panic!("backends disagree: {v:?} vs {s:?}"),
            }
        }
    }
}

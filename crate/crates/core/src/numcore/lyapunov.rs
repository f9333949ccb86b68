use super::{lu_solve, spectral_abscissa, Matrix, NumError};

/// Solves `m^T P + P m = -q` for symmetric `P`.
///
/// The equation is vectorized into an `n^2 x n^2` linear system and solved
/// densely. This is O(n^6) but `n` stays small in every intended use.
pub fn lyapunov_solve(m: &Matrix, q: &Matrix) -> Result<Matrix, NumError> {
    let n = m.require_square("lyapunov_solve")?;
    if q.shape() != (n, n) {
        return Err(NumError::DimensionMismatch {
            op: "lyapunov_solve",
            left: m.shape(),
            right: q.shape(),
        });
    }
    let abscissa = spectral_abscissa(m)?;
    if abscissa >= 0.0 {
        return Err(NumError::NotHurwitz { abscissa });
    }

    // Row (i, j) of the system: sum_k m[k,i] P[k,j] + sum_k P[i,k] m[k,j] = -q[i,j],
    // with unknown P[a,b] at index a*n + b.
    let nn = n * n;
    let mut k_sys = Matrix::zeros(nn, nn);
    let mut rhs = vec![0.0; nn];
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                k_sys[(row, k * n + j)] += m[(k, i)];
                k_sys[(row, i * n + k)] += m[(k, j)];
            }
            rhs[row] = -q[(i, j)];
        }
    }
    let x = lu_solve(&k_sys, &rhs)?;
    let p = Matrix::new(n, n, x)?.symmetric_part();

    let residual = lyapunov_residual(m, &p, q);
    let bound = 1e-8 * (m.frobenius_norm() * p.frobenius_norm() + q.frobenius_norm());
    if residual > bound {
        return Err(NumError::ResidualTooLarge { residual, bound });
    }
    Ok(p)
}

/// Frobenius norm of `m^T P + P m + q`.
pub fn lyapunov_residual(m: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    let mt = m.transpose();
    let r = &(&(&mt * p) + &(p * m)) + q;
    r.frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_scalar_equations() {
        let m = Matrix::diag(&[-1.0, -2.0]);
        let p = lyapunov_solve(&m, &Matrix::identity(2)).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((p[(1, 1)] - 0.25).abs() < 1e-15);
        assert!(p[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn closed_loop_example_residual() {
        let m = Matrix::from_rows(&[[-8.276, 3.724], [3.448, -1.552]]).unwrap();
        let q = Matrix::identity(2);
        let p = lyapunov_solve(&m, &q).unwrap();
        assert!(p.is_symmetric(0.0));
        let res = lyapunov_residual(&m, &p, &q);
        assert!(res <= 1e-8 * (m.frobenius_norm() * p.frobenius_norm() + q.frobenius_norm()));
    }

    #[test]
    fn unstable_has_no_solution() {
        let r = lyapunov_solve(&Matrix::scalar(1.0), &Matrix::scalar(1.0));
        assert!(matches!(r, Err(NumError::NotHurwitz { .. })));
    }
}

use super::{Matrix, NumError};

/// Solves `a x = b` by LU factorization with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, NumError> {
    let n = a.require_square("lu_solve")?;
    if b.len() != n {
        return Err(NumError::DimensionMismatch {
            op: "lu_solve",
            left: a.shape(),
            right: (b.len(), 1),
        });
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let scale = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = scale * f64::EPSILON * n as f64;

    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= tiny || pmax == 0.0 {
            return Err(NumError::Singular { pivot: pmax });
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            x.swap(k, piv);
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = f;
            for j in k + 1..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| lu[(k, j)] * x[j]).sum();
        x[k] = (x[k] - s) / lu[(k, k)];
    }
    Ok(x)
}

/// Lower-triangular Cholesky factor `l` with `a = l l^T`.
pub fn cholesky(a: &Matrix) -> Result<Matrix, NumError> {
    let n = a.require_square("cholesky")?;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(NumError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen_min(a: &Matrix) -> Result<f64, NumError> {
    let n = a.require_square("symmetric_eigen_min")?;
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    let mut m = a.symmetric_part();
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag.max(f64::MIN_POSITIVE) {
            return Ok((0..n).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(NumError::NoConvergence {
        iterations: MAX_SWEEPS,
        residual: (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| m[(i, j)].abs())
            .fold(0.0, f64::max),
    })
}

/// Largest support size for exact enumeration in `orthant_ellipsoid_max`.
pub const ORTHANT_ENUMERATION_MAX_DIM: usize = 16;

/// `max c^T x` over `{x >= 0 : x^T P x <= rho}` for positive definite `P`.
///
/// The maximizer is `t P_SS^{-1} c_S` on some support `S` with all entries
/// positive, so every support is tried. Above
/// `ORTHANT_ENUMERATION_MAX_DIM` this falls back to the bound over the whole
/// ellipsoid, `sqrt(rho c^T P^{-1} c)`, which can only be larger.
pub fn orthant_ellipsoid_max(p: &Matrix, c: &[f64], rho: f64) -> Result<f64, NumError> {
    let n = p.require_square("orthant_ellipsoid_max")?;
    if c.len() != n {
        return Err(NumError::DimensionMismatch {
            op: "orthant_ellipsoid_max",
            left: p.shape(),
            right: (c.len(), 1),
        });
    }
    if rho <= 0.0 {
        return Ok(0.0);
    }
    if n > ORTHANT_ENUMERATION_MAX_DIM {
        let z = lu_solve(p, c)?;
        let g: f64 = c.iter().zip(&z).map(|(a, b)| a * b).sum();
        return Ok((rho * g.max(0.0)).sqrt());
    }
    let mut best = 0.0f64;
    for mask in 1u32..(1u32 << n) {
        let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let k = idx.len();
        let mut sub = Matrix::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                sub[(a, b)] = p[(i, j)];
            }
        }
        let cs: Vec<f64> = idx.iter().map(|&i| c[i]).collect();
        let Ok(z) = lu_solve(&sub, &cs) else { continue };
        if z.iter().any(|&v| v <= 0.0) {
            continue;
        }
        let g: f64 = cs.iter().zip(&z).map(|(a, b)| a * b).sum();
        if g > 0.0 {
            best = best.max((rho * g).sqrt());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_max_examples() {
        // diagonal P: the maximizer is interior to the orthant
        let p = Matrix::diag(&[4.0, 1.0]);
        let v = orthant_ellipsoid_max(&p, &[1.0, 0.0], 9.0).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
        // long axis outside the orthant: the orthant section is much smaller
        let p = Matrix::from_rows(&[[1.0, 0.999], [0.999, 1.0]]).unwrap();
        let full = {
            let z = lu_solve(&p, &[1.0, 0.0]).unwrap();
            z[0].sqrt()
        };
        let v = orthant_ellipsoid_max(&p, &[1.0, 0.0], 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        assert!(full > 20.0);
    }

    #[test]
    fn lu_solves_pivoted_system() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]).unwrap();
        let x_true = [1.0, -2.0, 0.5];
        let b = a.matvec(&x_true).unwrap();
        let x = lu_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-14);
        }
        let sing = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(lu_solve(&sing, &[1.0, 1.0]), Err(NumError::Singular { .. })));
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let back = &l * &l.transpose();
        assert!((&back - &a).frobenius_norm() < 1e-14);
        let indefinite = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(cholesky(&indefinite), Err(NumError::NotPositiveDefinite));
    }

    #[test]
    fn jacobi_min_eigenvalue() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        assert!((symmetric_eigen_min(&a).unwrap() - 1.0).abs() < 1e-14);
        let d = Matrix::diag(&[3.0, -1.5, 7.0]);
        assert_eq!(symmetric_eigen_min(&d).unwrap(), -1.5);
    }
}

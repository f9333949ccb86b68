use lurecert::numcore::{
    cone_vector_max_ratio, eigenvalues, is_metzler, lyapunov_solve, spectral_abscissa, Matrix, RATIO_TOL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    Matrix::new(n, n, (0..n * n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Shifts `m` so its spectral abscissa equals `-margin`.
fn make_hurwitz(m: &Matrix, margin: f64) -> Matrix {
    let alpha = spectral_abscissa(m).unwrap();
    m.checked_sub(&Matrix::identity(m.rows()).scale(alpha + margin)).unwrap()
}

fn random_metzler<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j { rng.gen_range(-2.0..1.0) } else { rng.gen_range(0.0..1.5) };
        }
    }
    m
}

#[test]
fn lyapunov_residual_on_random_hurwitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6);
        let m = make_hurwitz(&gaussian(&mut rng, n), rng.gen_range(0.05..2.0));
        let g = gaussian(&mut rng, n);
        let q = &(&g * &g.transpose()) + &Matrix::identity(n);
        let p = lyapunov_solve(&m, &q).unwrap();
        let r = &(&(&m.transpose() * &p) + &(&p * &m)) + &q;
        let scale = 1.0 + m.frobenius_norm() * p.frobenius_norm();
        assert!(r.frobenius_norm() <= 1e-9 * scale, "residual {}", r.frobenius_norm());
        assert!(p.is_symmetric(1e-9 * p.frobenius_norm().max(1.0)));
    }
}

#[test]
fn metzler_hurwitz_gives_nonnegative_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let n = rng.gen_range(1..=5);
        let m = make_hurwitz(&random_metzler(&mut rng, n), rng.gen_range(0.05..1.0));
        assert!(is_metzler(&m, 0.0).unwrap());
        let q = &Matrix::identity(n) + &Matrix::filled(n, n, rng.gen_range(0.0..1.0));
        let p = lyapunov_solve(&m, &q).unwrap();
        assert!(p.min_entry() >= -1e-10 * p.max_entry().max(1.0), "{p:?}");
    }
}

/// Best `min/max` over a grid of the faces `v_k = 1`, keeping feasible points.
fn grid_best_ratio(m: &Matrix, slack: f64, steps: usize) -> f64 {
    let n = m.rows();
    let mut best: f64 = 0.0;
    let total = (steps + 1).pow(n as u32 - 1);
    for face in 0..n {
        for idx in 0..total {
            let mut v = vec![1.0; n];
            let mut rest = idx;
            for (i, vi) in v.iter_mut().enumerate() {
                if i == face {
                    continue;
                }
                *vi = (rest % (steps + 1)) as f64 / steps as f64;
                rest /= steps + 1;
            }
            if v.iter().any(|&x| x <= 0.0) {
                continue;
            }
            let feasible = (0..n).all(|j| (0..n).map(|i| v[i] * m[(i, j)]).sum::<f64>() <= -slack);
            if feasible {
                best = best.max(v.iter().cloned().fold(f64::INFINITY, f64::min));
            }
        }
    }
    best
}

#[test]
fn cone_ratio_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..120 {
        let n = if trial % 2 == 0 { 2 } else { 3 };
        let m = make_hurwitz(&random_metzler(&mut rng, n), rng.gen_range(0.2..1.5));
        let slack = 1e-6;
        let v = cone_vector_max_ratio(&m, slack).unwrap();
        let lhs = v.left_product(&m);
        assert!(lhs.iter().all(|&x| x <= -slack + 1e-9), "{lhs:?}");
        let steps = if n == 2 { 2000 } else { 120 };
        let grid = grid_best_ratio(&m, slack, steps);
        assert!(v.ratio() + RATIO_TOL >= grid, "lp {} < grid {grid}", v.ratio());
        assert!(grid >= v.ratio() - 2.0 / steps as f64, "lp {} grid {grid}", v.ratio());
    }
}

proptest! {
    #[test]
    fn abscissa_is_transpose_invariant(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian(&mut rng, n);
        let a = spectral_abscissa(&m).unwrap();
        let b = spectral_abscissa(&m.transpose()).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn eigenvalues_sum_to_trace(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = gaussian(&mut rng, n);
        let ev = eigenvalues(&m).unwrap();
        prop_assert_eq!(ev.len(), n);
        let re: f64 = ev.iter().map(|z| z.0).sum();
        let im: f64 = ev.iter().map(|z| z.1).sum();
        prop_assert!((re - m.trace()).abs() <= 1e-9 * (1.0 + m.frobenius_norm()));
        prop_assert!(im.abs() <= 1e-9 * (1.0 + m.frobenius_norm()));
    }
}

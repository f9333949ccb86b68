#![allow(dead_code)]

use lurecert::model::{Activation, FeedforwardNet};
use lurecert::numcore::Matrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let scale = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Random bias-free net with `hidden` layers of width at most `max_width`.
pub fn random_net<R: Rng>(
    rng: &mut R,
    input: usize,
    output: usize,
    hidden: usize,
    max_width: usize,
    act: Activation,
) -> FeedforwardNet {
    let mut widths = vec![input];
    for _ in 0..hidden {
        widths.push(rng.gen_range(1..=max_width));
    }
    widths.push(output);
    let weights = widths
        .windows(2)
        .map(|w| gaussian_matrix(rng, w[1], w[0]))
        .collect();
    FeedforwardNet::new(weights, vec![act; hidden]).unwrap()
}

pub fn random_activation<R: Rng>(rng: &mut R) -> Activation {
    if rng.gen_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Relu
    }
}

/// The two-state positive plant used throughout the examples.
pub fn worked_plant() -> lurecert::model::PositiveLTI {
    lurecert::model::PositiveLTI::new(
        Matrix::from_rows(&[[-7.0, 5.0], [6.0, 1.0]]).unwrap(),
        Matrix::col_vector(&[1.0, 2.0]),
        Matrix::row_vector(&[1.0, 1.0]),
    )
    .unwrap()
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Activation, FeedforwardNet};
use crate::numcore::Matrix;

/// Width of both hidden layers.
pub const FIXTURE_HIDDEN: usize = 16;
/// Slope of the fixture's scalar map at the origin.
pub const FIXTURE_JACOBIAN: f64 = -1.8;

// At this input the largest pre-activation in each hidden layer equals
// PREACT_CAP, which keeps the response close to linear over [0, DESIGN_Y].
const DESIGN_Y: f64 = 5.0;
const PREACT_CAP: f64 = 0.6;

/// Deterministic 1-16-16-1 tanh network with `u(y) ~ -1.8 y` near the origin
/// that saturates slowly.
///
/// Signs are fixed (`W1 > 0`, `W2 > 0`, `W3 < 0`) so every hidden
/// pre-activation stays nonnegative for `y >= 0`.
pub fn fixture_net(seed: u64) -> FeedforwardNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = FIXTURE_HIDDEN;
    let mut draw = |rows: usize, cols: usize, sign: f64| {
        let data = (0..rows * cols).map(|_| sign * rng.gen_range(0.5..1.5)).collect();
        Matrix::new(rows, cols, data).expect("finite draws")
    };
    let w1 = draw(h, 1, 1.0);
    let w2 = draw(h, h, 1.0);
    let w3 = draw(1, h, -1.0);

    let w1 = w1.scale(PREACT_CAP / (DESIGN_Y * w1.max_entry()));
    let hidden1: Vec<f64> = w1.as_slice().iter().map(|w| (w * DESIGN_Y).tanh()).collect();
    let pre2 = w2.matvec(&hidden1).expect("fixture dims");
    let pre2_max = pre2.iter().copied().fold(0.0, f64::max);
    let w2 = w2.scale(PREACT_CAP / pre2_max);

    let jac = (&(&w3 * &w2) * &w1)[(0, 0)];
    let w3 = w3.scale(FIXTURE_JACOBIAN / jac);

    FeedforwardNet::new(vec![w1, w2, w3], vec![Activation::Tanh, Activation::Tanh])
        .expect("fixture shapes chain")
}

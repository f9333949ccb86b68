//! Positive LTI plants, sector intervals, bias-free feedforward networks and
//! the system file format that ties them together.

mod activation;
mod fixture;
mod io;

pub use activation::Activation;
pub use fixture::{fixture_net, FIXTURE_HIDDEN, FIXTURE_JACOBIAN};
pub use io::{
    document_to_string, load_document, load_system, parse_document, save_document, SystemDocument,
};

use thiserror::Error;

use crate::numcore::{is_nonnegative, metzler_violation, Matrix};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unsupported activation `{0}` (expected tanh, relu or identity)")]
    UnsupportedActivation(String),
    #[error("system file has no network block")]
    MissingNetwork,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn first_negative(m: &Matrix) -> Option<(usize, usize)> {
    (0..m.rows())
        .flat_map(|i| (0..m.cols()).map(move |j| (i, j)))
        .find(|&(i, j)| m[(i, j)] < 0.0)
}

/// `x' = A x + B u`, `y = C x` with Metzler `A` and nonnegative `B`, `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveLTI {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl PositiveLTI {
    /// Validates dimensions and positivity. Index positions in messages are
    /// 1-based.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self, ModelError> {
        let n = a.rows();
        if !a.is_square() || n == 0 {
            return Err(ModelError::Dimension(format!(
                "A must be square and nonempty, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if b.rows() != n || b.cols() == 0 {
            return Err(ModelError::Dimension(format!(
                "B must have {n} rows and at least one column, got {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        if c.cols() != n || c.rows() == 0 {
            return Err(ModelError::Dimension(format!(
                "C must have {n} columns and at least one row, got {}x{}",
                c.rows(),
                c.cols()
            )));
        }
        if let Some((i, j)) = metzler_violation(&a, 0.0) {
            return Err(ModelError::Invariant(format!(
                "A not Metzler at ({},{})",
                i + 1,
                j + 1
            )));
        }
        if let Some((i, j)) = first_negative(&b) {
            return Err(ModelError::Invariant(format!(
                "B not nonnegative at ({},{})",
                i + 1,
                j + 1
            )));
        }
        if let Some((i, j)) = first_negative(&c) {
            return Err(ModelError::Invariant(format!(
                "C not nonnegative at ({},{})",
                i + 1,
                j + 1
            )));
        }
        debug_assert!(is_nonnegative(&b) && is_nonnegative(&c));
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    /// `A + B sigma C` for a feedback slope `sigma` (m x p).
    pub fn closed_loop(&self, sigma: &Matrix) -> Result<Matrix, ModelError> {
        if sigma.shape() != (self.input_dim(), self.output_dim()) {
            return Err(ModelError::Dimension(format!(
                "sector slope must be {}x{}, got {}x{}",
                self.input_dim(),
                self.output_dim(),
                sigma.rows(),
                sigma.cols()
            )));
        }
        Ok(&self.a + &(&(&self.b * sigma) * &self.c))
    }

    /// `A + s B C` for a scalar channel.
    pub fn closed_loop_scalar(&self, s: f64) -> Matrix {
        &self.a + &(&self.b * &self.c).scale(s)
    }
}

/// Slopes `sigma1 <= sigma2` with validity box `0 <= y <= gamma_upper`.
///
/// `gamma_upper` entries may be `+inf` for a global sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorInterval {
    sigma1: Matrix,
    sigma2: Matrix,
    gamma_upper: Vec<f64>,
}

impl SectorInterval {
    pub fn new(sigma1: Matrix, sigma2: Matrix, gamma_upper: Vec<f64>) -> Result<Self, ModelError> {
        if sigma1.shape() != sigma2.shape() {
            return Err(ModelError::Dimension(format!(
                "sigma1 is {:?} but sigma2 is {:?}",
                sigma1.shape(),
                sigma2.shape()
            )));
        }
        if gamma_upper.len() != sigma1.cols() {
            return Err(ModelError::Dimension(format!(
                "y_upper has {} entries, expected {}",
                gamma_upper.len(),
                sigma1.cols()
            )));
        }
        if !sigma1.le_elementwise(&sigma2, 0.0) {
            return Err(ModelError::Invariant("sigma1 <= sigma2 fails elementwise".into()));
        }
        if gamma_upper.iter().any(|&g| g.is_nan() || g < 0.0) {
            return Err(ModelError::Invariant("y_upper must be nonnegative".into()));
        }
        Ok(Self {
            sigma1,
            sigma2,
            gamma_upper,
        })
    }

    /// Scalar sector `[s1, s2]` on `0 <= y <= y_upper`.
    pub fn scalar(s1: f64, s2: f64, y_upper: f64) -> Result<Self, ModelError> {
        Self::new(Matrix::scalar(s1), Matrix::scalar(s2), vec![y_upper])
    }

    /// Scalar sector valid on the whole nonnegative axis.
    pub fn scalar_global(s1: f64, s2: f64) -> Result<Self, ModelError> {
        Self::scalar(s1, s2, f64::INFINITY)
    }

    pub fn sigma1(&self) -> &Matrix {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &Matrix {
        &self.sigma2
    }

    pub fn gamma_upper(&self) -> &[f64] {
        &self.gamma_upper
    }

    /// Does `sigma1 y <= phi <= sigma2 y` hold for this output sample?
    pub fn contains(&self, y: &[f64], phi: &[f64], tol: f64) -> bool {
        let lo = self.sigma1.matvec(y).expect("sector dims");
        let hi = self.sigma2.matvec(y).expect("sector dims");
        phi.iter()
            .zip(lo.iter().zip(&hi))
            .all(|(&u, (&l, &h))| l - tol <= u && u <= h + tol)
    }
}

/// Bias-free feedforward network, `u = W_{q+1} phi_q(W_q ... phi_1(W_1 y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet {
    weights: Vec<Matrix>,
    activations: Vec<Activation>,
}

impl FeedforwardNet {
    pub fn new(weights: Vec<Matrix>, activations: Vec<Activation>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::Parse("network has an empty weight list".into()));
        }
        if weights.len() != activations.len() + 1 {
            return Err(ModelError::Dimension(format!(
                "{} weight matrices need {} activations, got {}",
                weights.len(),
                weights.len() - 1,
                activations.len()
            )));
        }
        for (i, pair) in weights.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(ModelError::Dimension(format!(
                    "weights[{}] has {} columns but weights[{}] has {} rows",
                    i + 1,
                    pair[1].cols(),
                    i,
                    pair[0].rows()
                )));
            }
        }
        if weights.iter().any(|w| w.rows() == 0 || w.cols() == 0) {
            return Err(ModelError::Dimension("empty weight matrix".into()));
        }
        Ok(Self {
            weights,
            activations,
        })
    }

    /// A single linear layer `u = W y`.
    pub fn linear(w: Matrix) -> Result<Self, ModelError> {
        Self::new(vec![w], vec![])
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].rows()
    }

    pub fn hidden_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.weights.iter().map(|w| w.rows()))
            .collect()
    }

    /// Exact forward pass.
    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if y.len() != self.input_dim() {
            return Err(ModelError::Dimension(format!(
                "network input has length {}, expected {}",
                y.len(),
                self.input_dim()
            )));
        }
        let mut ev = self.evaluator();
        Ok(ev.eval(y).to_vec())
    }

    /// Reusable forward-pass buffers for hot loops.
    pub fn evaluator(&self) -> NetEvaluator<'_> {
        let widest = self.layer_widths().into_iter().max().unwrap_or(0);
        NetEvaluator {
            net: self,
            a: vec![0.0; widest],
            b: vec![0.0; widest],
        }
    }

    /// `W_{q+1} diag(phi'(0)) ... W_1`, the derivative of the network at 0.
    pub fn jacobian_at_zero(&self) -> Matrix {
        let mut j = self.weights[0].clone();
        for (w, act) in self.weights[1..].iter().zip(&self.activations) {
            let d = act.derivative_at_zero();
            j = (w * &j).scale(d);
        }
        j
    }
}

/// Borrowing evaluator with preallocated layer buffers.
pub struct NetEvaluator<'a> {
    net: &'a FeedforwardNet,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl NetEvaluator<'_> {
    /// Forward pass; `y` must have the network's input width.
    pub fn eval(&mut self, y: &[f64]) -> &[f64] {
        let net = self.net;
        let mut width = y.len();
        self.a[..width].copy_from_slice(y);
        for (i, w) in net.weights.iter().enumerate() {
            let out = w.rows();
            w.matvec_into(&self.a[..width], &mut self.b[..out]);
            if let Some(act) = net.activations.get(i) {
                for v in &mut self.b[..out] {
                    *v = act.eval(*v);
                }
            }
            std::mem::swap(&mut self.a, &mut self.b);
            width = out;
        }
        &self.a[..width]
    }
}

/// A positive plant closed through a network: `x' = A x + B NN(C x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LureSystem {
    plant: PositiveLTI,
    feedback: FeedforwardNet,
}

impl LureSystem {
    pub fn new(plant: PositiveLTI, feedback: FeedforwardNet) -> Result<Self, ModelError> {
        if feedback.input_dim() != plant.output_dim() {
            return Err(ModelError::Dimension(format!(
                "network input width {} does not match plant output dimension {}",
                feedback.input_dim(),
                plant.output_dim()
            )));
        }
        if feedback.output_dim() != plant.input_dim() {
            return Err(ModelError::Dimension(format!(
                "network output width {} does not match plant input dimension {}",
                feedback.output_dim(),
                plant.input_dim()
            )));
        }
        Ok(Self { plant, feedback })
    }

    pub fn plant(&self) -> &PositiveLTI {
        &self.plant
    }

    pub fn feedback(&self) -> &FeedforwardNet {
        &self.feedback
    }
}

//! Local sector bounds for bias-free feedforward networks.
//!
//! Given a box `0 <= y <= y_bar`, the engine finds slope matrices `gamma1`,
//! `gamma2` with `gamma1 y <= NN(y) <= gamma2 y` on the box. Pre-activation
//! intervals decide which chord relaxation each neuron gets; slope rows are
//! then pushed through the next layer with the signed split of its weights.

use serde::Serialize;
use thiserror::Error;

use crate::model::{Activation, FeedforwardNet, SectorInterval};
use crate::numcore::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("box has {got} coordinates, network expects {expected}")]
    BoxDimension { expected: usize, got: usize },
    #[error("box upper corner must be finite and nonnegative, got {0}")]
    InvalidBox(f64),
    #[error("target sector is {got:?}, network needs {expected:?}")]
    TargetDimension {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("certified search needs a scalar-input network, got input width {0}")]
    NotScalarInput(usize),
    #[error("search bound y_probe_max and tolerance must be positive and finite")]
    InvalidSearch,
}

/// Axis-aligned box `{ y : 0 <= y <= upper }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaBox {
    pub upper: Vec<f64>,
}

impl GammaBox {
    pub fn new(upper: Vec<f64>) -> Result<Self, BoundError> {
        if let Some(&bad) = upper.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
            return Err(BoundError::InvalidBox(bad));
        }
        Ok(Self { upper })
    }

    pub fn scalar(y_bar: f64) -> Result<Self, BoundError> {
        Self::new(vec![y_bar])
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.upper.len() && y.iter().zip(&self.upper).all(|(&v, &u)| (0.0..=u).contains(&v))
    }
}

/// Pre-activation bounds of one layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerInterval {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LayerInterval {
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&lo, &hi))| lo - tol <= x && x <= hi + tol)
    }
}

/// Which relaxation a neuron received.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RelaxCase {
    /// `lower >= 0 < upper`
    Positive,
    /// `lower < 0 >= upper`
    Negative,
    /// `lower < 0 < upper`
    Crossing,
    /// The interval is the single point 0.
    Zero,
}

impl RelaxCase {
    pub fn classify(lower: f64, upper: f64) -> Self {
        if lower >= 0.0 && upper > 0.0 {
            RelaxCase::Positive
        } else if lower < 0.0 && upper <= 0.0 {
            RelaxCase::Negative
        } else if lower < 0.0 && upper > 0.0 {
            RelaxCase::Crossing
        } else {
            RelaxCase::Zero
        }
    }
}

/// Diagonal slopes for one layer plus the case each neuron fell in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Relaxation {
    pub d_low: Vec<f64>,
    pub d_up: Vec<f64>,
    pub cases: Vec<RelaxCase>,
}

fn relax_neuron(lo: f64, hi: f64, act: Activation) -> (f64, f64, RelaxCase) {
    relax_neuron_at(lo, hi, act.eval(lo), act.eval(hi), act)
}

/// `relax_neuron` with `phi(lo)`, `phi(hi)` already evaluated.
fn relax_neuron_at(lo: f64, hi: f64, f_lo: f64, f_hi: f64, act: Activation) -> (f64, f64, RelaxCase) {
    let case = RelaxCase::classify(lo, hi);
    let chord = |v: f64, f: f64, at_zero: f64| if v == 0.0 { at_zero } else { f / v };
    let (dl, du) = match (case, act) {
        (_, Activation::Identity) => (1.0, 1.0),
        (RelaxCase::Positive, _) => (
            chord(hi, f_hi, act.right_slope_at_zero()),
            chord(lo, f_lo, act.right_slope_at_zero()),
        ),
        (RelaxCase::Negative, _) => (
            chord(hi, f_hi, act.left_slope_at_zero()),
            chord(lo, f_lo, act.left_slope_at_zero()),
        ),
        (RelaxCase::Crossing, Activation::Tanh) => (-1.0, 1.0),
        (RelaxCase::Crossing, Activation::Relu) => (0.0, 1.0),
        (RelaxCase::Zero, _) => (0.0, 0.0),
    };
    (dl, du, case)
}

/// Per-neuron chord relaxation `d_low * lhat <= phi(v) <= d_up * uhat`.
pub fn relax_activation(interval: &LayerInterval, act: Activation) -> Relaxation {
    let n = interval.lower.len();
    let mut out = Relaxation {
        d_low: Vec::with_capacity(n),
        d_up: Vec::with_capacity(n),
        cases: Vec::with_capacity(n),
    };
    for (&lo, &hi) in interval.lower.iter().zip(&interval.upper) {
        let (dl, du, case) = relax_neuron(lo, hi, act);
        out.d_low.push(dl);
        out.d_up.push(du);
        out.cases.push(case);
    }
    out
}

fn check_box(net: &FeedforwardNet, y_box: &GammaBox) -> Result<(), BoundError> {
    if y_box.upper.len() != net.input_dim() {
        return Err(BoundError::BoxDimension {
            expected: net.input_dim(),
            got: y_box.upper.len(),
        });
    }
    Ok(())
}

fn interval_into(w: &Matrix, z_lo: &[f64], z_hi: &[f64], lower: &mut [f64], upper: &mut [f64]) {
    for i in 0..w.rows() {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (&wij, (&zl, &zh)) in w.row(i).iter().zip(z_lo.iter().zip(z_hi)) {
            if wij >= 0.0 {
                lo += wij * zl;
                hi += wij * zh;
            } else {
                lo += wij * zh;
                hi += wij * zl;
            }
        }
        lower[i] = lo;
        upper[i] = hi;
    }
}

fn interval_step(w: &Matrix, z_lo: &[f64], z_hi: &[f64]) -> LayerInterval {
    let mut lower = vec![0.0; w.rows()];
    let mut upper = vec![0.0; w.rows()];
    interval_into(w, z_lo, z_hi, &mut lower, &mut upper);
    LayerInterval { lower, upper }
}

/// Interval bounds on every pre-activation, including the output layer as
/// the last entry.
pub fn preactivation_intervals(
    net: &FeedforwardNet,
    y_box: &GammaBox,
) -> Result<Vec<LayerInterval>, BoundError> {
    check_box(net, y_box)?;
    let mut z_lo = vec![0.0; net.input_dim()];
    let mut z_hi = y_box.upper.clone();
    let mut out = Vec::with_capacity(net.weights().len());
    for (i, w) in net.weights().iter().enumerate() {
        let iv = interval_step(w, &z_lo, &z_hi);
        if let Some(act) = net.activations().get(i) {
            z_lo = iv.lower.iter().map(|&v| act.eval(v)).collect();
            z_hi = iv.upper.iter().map(|&v| act.eval(v)).collect();
        }
        out.push(iv);
    }
    Ok(out)
}

/// Slope rows entering and leaving one hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorBoundState {
    /// `L` with `L y <= v` (pre-activation)
    pub l_slopes: Matrix,
    /// `U` with `v <= U y`
    pub u_slopes: Matrix,
    pub interval: LayerInterval,
    pub relaxation: Relaxation,
}

/// Whole-network sector on a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSector {
    pub gamma1: Matrix,
    pub gamma2: Matrix,
    pub gamma_box: GammaBox,
    pub layers: Vec<SectorBoundState>,
}

impl NetworkSector {
    /// Is `target.sigma1 <= gamma1` and `gamma2 <= target.sigma2`?
    pub fn within(&self, target: &SectorInterval) -> bool {
        slopes_within(&self.gamma1, &self.gamma2, target)
    }

    /// Largest elementwise violation of `gamma1 y <= u <= gamma2 y`.
    pub fn violation(&self, y: &[f64], u: &[f64]) -> f64 {
        let lo = self.gamma1.matvec(y).expect("sector dims");
        let hi = self.gamma2.matvec(y).expect("sector dims");
        u.iter()
            .zip(lo.iter().zip(&hi))
            .map(|(&v, (&l, &h))| (l - v).max(v - h).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Reusable buffers for repeated sector propagation on one network.
pub struct SlopePropagator<'a> {
    net: &'a FeedforwardNet,
    z_lo: Vec<f64>,
    z_hi: Vec<f64>,
    v_lo: Vec<f64>,
    v_hi: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    l_next: Vec<f64>,
    u_next: Vec<f64>,
}

impl<'a> SlopePropagator<'a> {
    pub fn new(net: &'a FeedforwardNet) -> Self {
        let wmax = net.layer_widths().into_iter().max().unwrap_or(0);
        let slab = wmax * net.input_dim();
        Self {
            net,
            z_lo: vec![0.0; wmax],
            z_hi: vec![0.0; wmax],
            v_lo: vec![0.0; wmax],
            v_hi: vec![0.0; wmax],
            l: vec![0.0; slab],
            u: vec![0.0; slab],
            l_next: vec![0.0; slab],
            u_next: vec![0.0; slab],
        }
    }

    /// `(gamma1, gamma2)` on the box.
    pub fn slopes(&mut self, y_box: &GammaBox) -> Result<(Matrix, Matrix), BoundError> {
        check_box(self.net, y_box)?;
        Ok(self.run(&y_box.upper, None))
    }

    fn run(&mut self, upper: &[f64], mut record: Option<&mut Vec<SectorBoundState>>) -> (Matrix, Matrix) {
        let net = self.net;
        let p = upper.len();
        let weights = net.weights();
        self.z_lo[..p].fill(0.0);
        self.z_hi[..p].copy_from_slice(upper);
        let w1 = &weights[0];
        interval_into(w1, &self.z_lo[..p], &self.z_hi[..p], &mut self.v_lo, &mut self.v_hi);
        let n1 = w1.rows() * p;
        self.l[..n1].copy_from_slice(w1.as_slice());
        self.u[..n1].copy_from_slice(w1.as_slice());

        for (k, &act) in net.activations().iter().enumerate() {
            let n = weights[k].rows();
            if let Some(rec) = record.as_deref_mut() {
                let interval = LayerInterval {
                    lower: self.v_lo[..n].to_vec(),
                    upper: self.v_hi[..n].to_vec(),
                };
                rec.push(SectorBoundState {
                    l_slopes: Matrix::new(n, p, self.l[..n * p].to_vec()).expect("finite slopes"),
                    u_slopes: Matrix::new(n, p, self.u[..n * p].to_vec()).expect("finite slopes"),
                    relaxation: relax_activation(&interval, act),
                    interval,
                });
            }
            for j in 0..n {
                let (lo, hi) = (self.v_lo[j], self.v_hi[j]);
                // every supported activation fixes 0
                let phi = |v: f64| if v == 0.0 { 0.0 } else { act.eval(v) };
                let (f_lo, f_hi) = (phi(lo), phi(hi));
                let (dl, du, case) = relax_neuron_at(lo, hi, f_lo, f_hi, act);
                let abs_rows = case == RelaxCase::Crossing && act != Activation::Identity;
                for c in j * p..(j + 1) * p {
                    let (lv, uv) = if abs_rows {
                        (self.l[c].abs(), self.u[c].abs())
                    } else {
                        (self.l[c], self.u[c])
                    };
                    self.l[c] = dl * lv;
                    self.u[c] = du * uv;
                }
                self.z_lo[j] = f_lo;
                self.z_hi[j] = f_hi;
            }

            let w = &weights[k + 1];
            let m = w.rows();
            interval_into(w, &self.z_lo[..n], &self.z_hi[..n], &mut self.v_lo, &mut self.v_hi);
            self.l_next[..m * p].fill(0.0);
            self.u_next[..m * p].fill(0.0);
            for i in 0..m {
                for (j, &wij) in w.row(i).iter().enumerate() {
                    // W+ feeds l into the lower row, W- feeds u into it
                    let (to_low, to_up) = if wij >= 0.0 { (&self.l, &self.u) } else { (&self.u, &self.l) };
                    for c in 0..p {
                        self.l_next[i * p + c] += wij * to_low[j * p + c];
                        self.u_next[i * p + c] += wij * to_up[j * p + c];
                    }
                }
            }
            std::mem::swap(&mut self.l, &mut self.l_next);
            std::mem::swap(&mut self.u, &mut self.u_next);
        }
        let m = net.output_dim();
        (
            Matrix::new(m, p, self.l[..m * p].to_vec()).expect("finite slopes"),
            Matrix::new(m, p, self.u[..m * p].to_vec()).expect("finite slopes"),
        )
    }
}

/// Sector slopes `(gamma1, gamma2)` of `net` on `y_box`, with the per-layer
/// slope rows and relaxations that produced them.
pub fn propagate_sector(net: &FeedforwardNet, y_box: &GammaBox) -> Result<NetworkSector, BoundError> {
    check_box(net, y_box)?;
    let mut layers = Vec::with_capacity(net.hidden_layers());
    let (gamma1, gamma2) = SlopePropagator::new(net).run(&y_box.upper, Some(&mut layers));
    Ok(NetworkSector {
        gamma1,
        gamma2,
        gamma_box: y_box.clone(),
        layers,
    })
}

/// Is `target.sigma1 <= gamma1` and `gamma2 <= target.sigma2`?
pub fn slopes_within(gamma1: &Matrix, gamma2: &Matrix, target: &SectorInterval) -> bool {
    target.sigma1().le_elementwise(gamma1, 0.0) && gamma2.le_elementwise(target.sigma2(), 0.0)
}

/// Outcome of a Γ search. `Empty` means even a vanishing box fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum GammaSearch {
    Found { y_bar: f64, sector: NetworkSector },
    Empty,
}

impl GammaSearch {
    pub fn y_bar(&self) -> Option<f64> {
        match self {
            GammaSearch::Found { y_bar, .. } => Some(*y_bar),
            GammaSearch::Empty => None,
        }
    }
}

/// Relative size of the first probe box, as a fraction of `tol`.
const SMALL_BOX_FRACTION: f64 = 1e-3;

/// Size of the smallest box a search tries before declaring Γ empty.
pub fn first_probe(y_probe_max: f64, tol: f64) -> f64 {
    (tol * SMALL_BOX_FRACTION).min(0.5 * y_probe_max)
}

/// Largest `y_bar` in `(0, y_probe_max]` (to `tol`) whose slopes
/// `(gamma1, gamma2)` on `[0, y_bar]` satisfy `accept`, for a scalar-input
/// network.
///
/// Bisection assumes acceptance is monotone in the box. Whatever the shape of
/// the accepted set, the returned box itself was accepted.
pub fn bisect_box<F>(
    net: &FeedforwardNet,
    y_probe_max: f64,
    tol: f64,
    mut accept: F,
) -> Result<GammaSearch, BoundError>
where
    F: FnMut(&Matrix, &Matrix) -> bool,
{
    if net.input_dim() != 1 {
        return Err(BoundError::NotScalarInput(net.input_dim()));
    }
    if !(y_probe_max.is_finite() && y_probe_max > 0.0 && tol.is_finite() && tol > 0.0) {
        return Err(BoundError::InvalidSearch);
    }
    let mut prop = SlopePropagator::new(net);
    let mut ok = |y: f64| -> Result<bool, BoundError> {
        let (g1, g2) = prop.slopes(&GammaBox::scalar(y)?)?;
        Ok(accept(&g1, &g2))
    };
    let found = |y_bar: f64| -> Result<GammaSearch, BoundError> {
        Ok(GammaSearch::Found {
            y_bar,
            sector: propagate_sector(net, &GammaBox::scalar(y_bar)?)?,
        })
    };

    if ok(y_probe_max)? {
        return found(y_probe_max);
    }
    let mut lo = first_probe(y_probe_max, tol);
    if !ok(lo)? {
        return Ok(GammaSearch::Empty);
    }
    let mut hi = y_probe_max;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    found(lo)
}

/// Largest certified box for a fixed target sector.
pub fn gamma_search(
    net: &FeedforwardNet,
    target: &SectorInterval,
    y_probe_max: f64,
    tol: f64,
) -> Result<GammaSearch, BoundError> {
    let expected = (net.output_dim(), net.input_dim());
    if target.sigma1().shape() != expected {
        return Err(BoundError::TargetDimension {
            expected,
            got: target.sigma1().shape(),
        });
    }
    bisect_box(net, y_probe_max, tol, |g1, g2| slopes_within(g1, g2, target))
}

/// For vector inputs: per input axis `k`, the largest `y_bar` such that the
/// segment `{ y_k in [0, y_bar], other coordinates 0 }` satisfies `target`.
///
/// Each entry is certified on its own axis only. The box spanned by the
/// entries is not certified.
pub fn axis_scan(
    net: &FeedforwardNet,
    target: &SectorInterval,
    y_probe_max: f64,
    tol: f64,
) -> Result<Vec<Option<f64>>, BoundError> {
    let p = net.input_dim();
    let expected = (net.output_dim(), p);
    if target.sigma1().shape() != expected {
        return Err(BoundError::TargetDimension {
            expected,
            got: target.sigma1().shape(),
        });
    }
    if !(y_probe_max.is_finite() && y_probe_max > 0.0 && tol.is_finite() && tol > 0.0) {
        return Err(BoundError::InvalidSearch);
    }
    let mut prop = SlopePropagator::new(net);
    let mut out = Vec::with_capacity(p);
    for k in 0..p {
        let mut ok = |y: f64| -> Result<bool, BoundError> {
            let mut upper = vec![0.0; p];
            upper[k] = y;
            let (g1, g2) = prop.slopes(&GammaBox::new(upper)?)?;
            Ok(slopes_within(&g1, &g2, target))
        };
        if ok(y_probe_max)? {
            out.push(Some(y_probe_max));
            continue;
        }
        let mut lo = first_probe(y_probe_max, tol);
        if !ok(lo)? {
            out.push(None);
            continue;
        }
        let mut hi = y_probe_max;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if ok(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(Some(lo));
    }
    Ok(out)
}

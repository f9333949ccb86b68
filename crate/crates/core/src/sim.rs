//! Closed-loop simulation, empirical region-of-attraction checks and direct
//! sector scans of a network.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::certify::AizermanROA;
use crate::model::{FeedforwardNet, LureSystem, ModelError, NetEvaluator, SectorInterval};
use crate::numcore::{orthant_ellipsoid_max, Matrix, NumError};

pub const DEFAULT_HORIZON: f64 = 50.0;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const CONVERGED_NORM: f64 = 1e-4;
pub const REEXCURSION_NORM: f64 = 1e-3;
pub const DIVERGED_NORM: f64 = 1e6;
pub const ORTHANT_TOL: f64 = 1e-9;

const MAX_DRAWS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("step must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("horizon must be finite and at least the step, got horizon={horizon}, step={step}")]
    InvalidHorizon { horizon: f64, step: f64 },
    #[error("initial state must be finite and nonnegative, got {0:?}")]
    InvalidInitialState(Vec<f64>),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("rejection sampling accepted only {accepted} of {requested} points")]
    SamplingExhausted { accepted: usize, requested: usize },
    #[error("gamma scan needs a scalar-input network and grid >= 2")]
    InvalidScan,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    Censored,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::Censored => "censored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitEvent {
    LeftOrthant { time: f64 },
    LeftGamma { time: f64 },
    Diverged { time: f64 },
}

impl ExitEvent {
    pub fn time(&self) -> f64 {
        match *self {
            ExitEvent::LeftOrthant { time } | ExitEvent::LeftGamma { time } | ExitEvent::Diverged { time } => time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Recorded sample times; always includes `t = 0` and the last step.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub verdict: Verdict,
    /// Start of the final stretch with `|x|_inf < CONVERGED_NORM`.
    pub converged_at: Option<f64>,
    /// First occurrence of each kind, in time order.
    pub events: Vec<ExitEvent>,
    pub final_state: Vec<f64>,
}

impl Trajectory {
    pub fn converged(&self) -> bool {
        self.verdict == Verdict::Converged
    }

    pub fn exit_event(&self) -> Option<ExitEvent> {
        self.events.first().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    /// Record every `record_stride`-th step; 0 keeps only the endpoints.
    pub record_stride: usize,
    /// Upper corner of Γ; leaving `[0, upper]` is flagged.
    pub gamma_upper: Option<Vec<f64>>,
    pub orthant_tol: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            record_stride: 1,
            gamma_upper: None,
            orthant_tol: ORTHANT_TOL,
        }
    }
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

struct Field<'a> {
    a: &'a Matrix,
    b: &'a Matrix,
    c: &'a Matrix,
    net: NetEvaluator<'a>,
    y: Vec<f64>,
}

impl<'a> Field<'a> {
    fn new(system: &'a LureSystem) -> Self {
        let plant = system.plant();
        Self {
            a: plant.a(),
            b: plant.b(),
            c: plant.c(),
            net: system.feedback().evaluator(),
            y: vec![0.0; plant.output_dim()],
        }
    }

    fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        self.c.matvec_into(x, &mut self.y);
        let u = self.net.eval(&self.y);
        self.a.matvec_into(x, out);
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.b.row(i).iter().zip(u).map(|(b, u)| b * u).sum::<f64>();
        }
    }
}

fn check_run(system: &LureSystem, x0: &[f64], horizon: f64, step: f64) -> Result<usize, SimError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(SimError::InvalidStep(step));
    }
    if !(horizon.is_finite() && horizon >= step) {
        return Err(SimError::InvalidHorizon { horizon, step });
    }
    let n = system.plant().state_dim();
    if x0.len() != n {
        return Err(SimError::Dimension(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if x0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(SimError::InvalidInitialState(x0.to_vec()));
    }
    Ok((horizon / step).round().max(1.0) as usize)
}

/// Fixed-step RK4 on `x' = A x + B NN(C x)`, recording every step.
pub fn integrate(system: &LureSystem, x0: &[f64], horizon: f64, step: f64) -> Result<Trajectory, SimError> {
    integrate_with(system, x0, horizon, step, &IntegrateOptions::default())
}

pub fn integrate_with(
    system: &LureSystem,
    x0: &[f64],
    horizon: f64,
    step: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, SimError> {
    let steps = check_run(system, x0, horizon, step)?;
    let n = x0.len();
    if let Some(g) = &opts.gamma_upper {
        if g.len() != system.plant().output_dim() {
            return Err(SimError::Dimension(format!(
                "gamma upper has length {}, expected {}",
                g.len(),
                system.plant().output_dim()
            )));
        }
    }
    let mut field = Field::new(system);
    let c = system.plant().c();
    let mut x = x0.to_vec();
    let mut y = vec![0.0; c.rows()];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        outputs: Vec::new(),
        verdict: Verdict::Censored,
        converged_at: None,
        events: Vec::new(),
        final_state: Vec::new(),
    };
    let mut left_orthant = false;
    let mut left_gamma = false;
    let mut below_since: Option<f64> = None;

    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        c.matvec_into(&x, &mut y);
        let norm = inf_norm(&x);
        let diverged = !(norm <= DIVERGED_NORM);
        let last = k == steps || diverged;
        let record = k == 0 || last || (opts.record_stride > 0 && k % opts.record_stride == 0);
        if record {
            traj.times.push(t);
            traj.states.push(x.clone());
            traj.outputs.push(y.clone());
        }
        if !left_orthant && x.iter().any(|&v| v < -opts.orthant_tol) {
            left_orthant = true;
            traj.events.push(ExitEvent::LeftOrthant { time: t });
        }
        if let Some(g) = &opts.gamma_upper {
            if !left_gamma && y.iter().zip(g).any(|(&yi, &gi)| yi > gi || yi < -opts.orthant_tol) {
                left_gamma = true;
                traj.events.push(ExitEvent::LeftGamma { time: t });
            }
        }
        if diverged {
            traj.events.push(ExitEvent::Diverged { time: t });
            traj.verdict = Verdict::Diverged;
            below_since = None;
            break;
        }
        if norm < CONVERGED_NORM {
            below_since.get_or_insert(t);
        } else if norm > REEXCURSION_NORM {
            below_since = None;
        }
        if last {
            break;
        }

        field.eval(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * step * k1[i];
        }
        field.eval(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * step * k2[i];
        }
        field.eval(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + step * k3[i];
        }
        field.eval(&tmp, &mut k4);
        for i in 0..n {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        k += 1;
    }
    if traj.verdict != Verdict::Diverged && below_since.is_some() {
        traj.verdict = Verdict::Converged;
        traj.converged_at = below_since;
    }
    traj.final_state = x;
    Ok(traj)
}

/// Least-squares fit `ln |x(t)|_inf ~ ln K - rate t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub log_k: f64,
    pub points: usize,
}

/// Fits the decay over recorded samples until the norm first drops below
/// `floor`. `None` with fewer than two usable samples.
pub fn decay_rate(traj: &Trajectory, floor: f64) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, x)| (t, inf_norm(x)))
        .take_while(|&(_, v)| v >= floor && v.is_finite())
        .map(|(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(DecayFit {
        rate: -slope,
        log_k: ml - slope * mt,
        points: pts.len(),
    })
}

/// Region initial conditions are drawn from, uniformly by rejection from a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoaRegion {
    /// `{0 <= x <= upper : c^T x <= bound}`
    HalfSpace { c: Vec<f64>, bound: f64, upper: Vec<f64> },
    /// `{x >= 0 : x^T P x <= rho}`
    Ellipsoid { p: Matrix, rho: f64 },
}

impl RoaRegion {
    /// Half-space region with box `upper_i = bound / c_i`; every `c_i` must be positive.
    pub fn half_space(c: Vec<f64>, bound: f64) -> Result<Self, SimError> {
        if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::InvalidRegion(
                "half-space needs c > 0 to derive a box; pass one explicitly".into(),
            ));
        }
        let upper = c.iter().map(|ci| (bound / ci).max(0.0)).collect();
        Ok(RoaRegion::HalfSpace { c, bound, upper })
    }

    pub fn from_aizerman(roa: &AizermanROA, c: &Matrix) -> Result<Self, SimError> {
        if c.rows() != 1 {
            return Err(SimError::Dimension("Aizerman region needs a single output".into()));
        }
        Self::half_space(c.row(0).to_vec(), roa.bound)
    }

    /// Same shape with the half-space bound or the level scaled by `factor`.
    pub fn inflated(&self, factor: f64) -> Self {
        match self {
            RoaRegion::HalfSpace { c, bound, upper } => RoaRegion::HalfSpace {
                c: c.clone(),
                bound: bound * factor,
                upper: upper.iter().map(|u| u * factor).collect(),
            },
            RoaRegion::Ellipsoid { p, rho } => RoaRegion::Ellipsoid {
                p: p.clone(),
                rho: rho * factor,
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RoaRegion::HalfSpace { c, .. } => c.len(),
            RoaRegion::Ellipsoid { p, .. } => p.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            RoaRegion::HalfSpace { bound, upper, .. } => *bound <= 0.0 || upper.iter().any(|&u| u <= 0.0),
            RoaRegion::Ellipsoid { rho, .. } => *rho <= 0.0,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.iter().any(|&v| v < 0.0) {
            return false;
        }
        match self {
            RoaRegion::HalfSpace { c, bound, upper } => {
                x.iter().zip(upper).all(|(v, u)| v <= u)
                    && c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() <= *bound
            }
            RoaRegion::Ellipsoid { p, rho } => p.quadratic_form(x, x) <= *rho,
        }
    }

    fn bounding_box(&self) -> Result<Vec<f64>, SimError> {
        match self {
            RoaRegion::HalfSpace { c, upper, .. } => {
                if c.len() != upper.len() {
                    return Err(SimError::Dimension("c and upper differ in length".into()));
                }
                Ok(upper.clone())
            }
            RoaRegion::Ellipsoid { p, rho } => {
                let n = p.rows();
                (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        Ok(orthant_ellipsoid_max(p, &e, *rho)?)
                    })
                    .collect()
            }
        }
    }

    /// `count` seeded uniform draws from the region.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, SimError> {
        if count == 0 || self.is_empty() {
            return Ok(Vec::new());
        }
        let upper = self.bounding_box()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let budget = count.saturating_mul(MAX_DRAWS_PER_SAMPLE);
        for _ in 0..budget {
            let x: Vec<f64> = upper.iter().map(|&u| rng.gen::<f64>() * u).collect();
            if self.contains(&x) {
                out.push(x);
                if out.len() == count {
                    return Ok(out);
                }
            }
        }
        Err(SimError::SamplingExhausted {
            accepted: out.len(),
            requested: count,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub horizon: f64,
    pub step: f64,
    /// Worker threads; 0 picks the available parallelism.
    pub threads: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            step: DEFAULT_STEP,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoaSample {
    pub x0: Vec<f64>,
    pub verdict: Verdict,
    pub converged_at: Option<f64>,
    pub final_norm: f64,
    pub left_orthant: bool,
}

/// Samples the region and classifies each initial condition with default
/// horizon and step.
pub fn classify_roa(
    system: &LureSystem,
    region: &RoaRegion,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<RoaSample>, SimError> {
    classify_roa_with(system, region, n_samples, seed, &ClassifyOptions::default())
}

pub fn classify_roa_with(
    system: &LureSystem,
    region: &RoaRegion,
    n_samples: usize,
    seed: u64,
    opts: &ClassifyOptions,
) -> Result<Vec<RoaSample>, SimError> {
    if region.dim() != system.plant().state_dim() {
        return Err(SimError::Dimension(format!(
            "region has dimension {}, plant has {}",
            region.dim(),
            system.plant().state_dim()
        )));
    }
    let points = region.sample(n_samples, seed)?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    check_run(system, &points[0], opts.horizon, opts.step)?;
    let run_opts = IntegrateOptions {
        record_stride: 0,
        ..IntegrateOptions::default()
    };
    let classify = |x0: &Vec<f64>| -> Result<RoaSample, SimError> {
        let traj = integrate_with(system, x0, opts.horizon, opts.step, &run_opts)?;
        Ok(RoaSample {
            x0: x0.clone(),
            verdict: traj.verdict,
            converged_at: traj.converged_at,
            final_norm: inf_norm(&traj.final_state),
            left_orthant: traj.events.iter().any(|e| matches!(e, ExitEvent::LeftOrthant { .. })),
        })
    };
    let threads = match opts.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(points.len());
    if threads <= 1 {
        return points.iter().map(classify).collect();
    }
    let chunk = points.len().div_ceil(threads);
    let parts: Vec<Result<Vec<RoaSample>, SimError>> = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(classify).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(points.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn converged_fraction(samples: &[RoaSample]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let ok = samples.iter().filter(|s| s.verdict == Verdict::Converged).count();
    Some(ok as f64 / samples.len() as f64)
}

fn in_sector(eval: &mut NetEvaluator<'_>, sector: &SectorInterval, y: f64) -> bool {
    let u = eval.eval(&[y]);
    let (s1, s2) = (sector.sigma1(), sector.sigma2());
    u.iter()
        .enumerate()
        .all(|(i, &ui)| s1[(i, 0)] * y <= ui && ui <= s2[(i, 0)] * y)
}

/// Largest `y_bar <= y_max` with `Σ1 y <= NN(y) <= Σ2 y` at every grid point
/// of `(0, y_bar]`, refined by bisection past the last passing grid point.
pub fn gamma_scan(net: &FeedforwardNet, sector: &SectorInterval, y_max: f64, grid: usize) -> Result<f64, SimError> {
    if net.input_dim() != 1 || grid < 2 {
        return Err(SimError::InvalidScan);
    }
    if !(y_max.is_finite() && y_max > 0.0) {
        return Err(SimError::InvalidRegion(format!("y_max must be positive, got {y_max}")));
    }
    if sector.sigma1().shape() != (net.output_dim(), 1) {
        return Err(SimError::Dimension(format!(
            "sector is {:?}, network maps 1 -> {}",
            sector.sigma1().shape(),
            net.output_dim()
        )));
    }
    let mut eval = net.evaluator();
    let h = y_max / grid as f64;
    for k in 1..=grid {
        let y = h * k as f64;
        if in_sector(&mut eval, sector, y) {
            continue;
        }
        if k == 1 {
            return Ok(0.0);
        }
        let tol = h / 100.0;
        let (mut lo, mut hi) = (y - h, y);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if in_sector(&mut eval, sector, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(lo);
    }
    Ok(y_max)
}

/// Writes `t,x1..xn,y1..yp`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let n = traj.states.first().map_or(0, Vec::len);
    let p = traj.outputs.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=p).map(|i| format!("y{i}")));
    w.write_record(&header)?;
    for ((t, x), y) in traj.times.iter().zip(&traj.states).zip(&traj.outputs) {
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(f64::to_string));
        rec.extend(y.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `x0_1..x0_n,verdict`.
pub fn write_roa_csv<W: Write>(samples: &[RoaSample], n: usize, out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("x0_{i}")).collect();
    header.push("verdict".into());
    w.write_record(&header)?;
    for s in samples {
        let mut rec: Vec<String> = s.x0.iter().map(f64::to_string).collect();
        rec.push(s.verdict.as_str().into());
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, PositiveLTI};

    fn decoupled() -> LureSystem {
        let plant = PositiveLTI::new(
            Matrix::identity(2).scale(-1.0),
            Matrix::col_vector(&[0.0, 0.0]),
            Matrix::row_vector(&[1.0, 1.0]),
        )
        .unwrap();
        LureSystem::new(plant, FeedforwardNet::linear(Matrix::scalar(0.0)).unwrap()).unwrap()
    }

    fn toy_net() -> FeedforwardNet {
        FeedforwardNet::new(vec![Matrix::scalar(1.0), Matrix::scalar(-2.0)], vec![Activation::Tanh]).unwrap()
    }

    #[test]
    fn exponential_decay() {
        let tr = integrate(&decoupled(), &[1.0, 1.0], 1.0, 1e-3).unwrap();
        let e = (-1.0f64).exp();
        let last = tr.states.last().unwrap();
        assert!((last[0] - e).abs() < 1e-8 && (last[1] - e).abs() < 1e-8);
        assert_eq!(tr.times.len(), 1001);
        assert!((tr.times[1000] - 1.0).abs() < 1e-12);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn classification_rules() {
        let tr = integrate_with(&decoupled(), &[1.0, 1.0], 20.0, 1e-2, &IntegrateOptions::default()).unwrap();
        assert_eq!(tr.verdict, Verdict::Converged);
        // e^{-t} < 1e-4 after t = 9.21
        let t = tr.converged_at.unwrap();
        assert!((9.2..9.23).contains(&t), "{t}");
        let short = integrate(&decoupled(), &[1.0, 1.0], 2.0, 1e-2).unwrap();
        assert_eq!(short.verdict, Verdict::Censored);

        let plant = PositiveLTI::new(
            Matrix::from_rows(&[[-7.0, 5.0], [6.0, 1.0]]).unwrap(),
            Matrix::col_vector(&[1.0, 2.0]),
            Matrix::row_vector(&[1.0, 1.0]),
        )
        .unwrap();
        let zero = LureSystem::new(plant, FeedforwardNet::linear(Matrix::scalar(0.0)).unwrap()).unwrap();
        let tr = integrate(&zero, &[1.0, 1.0], 50.0, 1e-3).unwrap();
        assert_eq!(tr.verdict, Verdict::Diverged);
        assert!(matches!(tr.exit_event(), Some(ExitEvent::Diverged { .. })));
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = decoupled();
        assert!(matches!(integrate(&s, &[1.0, -1.0], 1.0, 0.1), Err(SimError::InvalidInitialState(_))));
        assert!(matches!(integrate(&s, &[1.0, 1.0], 1.0, 0.0), Err(SimError::InvalidStep(_))));
        assert!(matches!(integrate(&s, &[1.0, 1.0], 0.01, 0.1), Err(SimError::InvalidHorizon { .. })));
        assert!(matches!(integrate(&s, &[1.0], 1.0, 0.1), Err(SimError::Dimension(_))));
    }

    #[test]
    fn gamma_exit_is_flagged() {
        let opts = IntegrateOptions {
            gamma_upper: Some(vec![1.5]),
            ..IntegrateOptions::default()
        };
        let tr = integrate_with(&decoupled(), &[1.0, 1.0], 1.0, 1e-2, &opts).unwrap();
        assert_eq!(tr.exit_event(), Some(ExitEvent::LeftGamma { time: 0.0 }));
    }

    #[test]
    fn decay_fit_on_pure_exponential() {
        let opts = IntegrateOptions {
            record_stride: 10,
            ..IntegrateOptions::default()
        };
        let tr = integrate_with(&decoupled(), &[2.0, 1.0], 5.0, 1e-3, &opts).unwrap();
        let fit = decay_rate(&tr, 1e-12).unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6);
        assert!((fit.log_k - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn toy_scan_matches_root() {
        let sector = SectorInterval::scalar_global(-3.0, -1.276).unwrap();
        let y = gamma_scan(&toy_net(), &sector, 20.0, 2000).unwrap();
        // -2 tanh(y)/y = -1.276
        let root = {
            let (mut lo, mut hi) = (0.5f64, 3.0f64);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if 2.0 * m.tanh() / m > 1.276 {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            lo
        };
        assert!((y - root).abs() <= 20.0 / 2000.0 / 100.0 + 1e-12, "{y} vs {root}");
    }

    #[test]
    fn scan_edge_cases() {
        let net = FeedforwardNet::linear(Matrix::scalar(-2.0)).unwrap();
        let inside = SectorInterval::scalar_global(-3.0, -1.0).unwrap();
        assert_eq!(gamma_scan(&net, &inside, 7.0, 10).unwrap(), 7.0);
        let outside = SectorInterval::scalar_global(-1.5, -1.0).unwrap();
        assert_eq!(gamma_scan(&net, &outside, 7.0, 10).unwrap(), 0.0);
        assert!(matches!(gamma_scan(&net, &inside, 7.0, 1), Err(SimError::InvalidScan)));
    }

    #[test]
    fn region_sampling() {
        let r = RoaRegion::half_space(vec![1.0, 1.0], 2.0).unwrap();
        let pts = r.sample(500, 3).unwrap();
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|x| r.contains(x)));
        assert_eq!(pts, r.sample(500, 3).unwrap());
        assert!(RoaRegion::half_space(vec![1.0, 1.0], 0.0).unwrap().sample(5, 0).unwrap().is_empty());

        let e = RoaRegion::Ellipsoid {
            p: Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap(),
            rho: 3.0,
        };
        let pts = e.sample(300, 1).unwrap();
        assert!(pts.iter().all(|x| e.contains(x)));
        // the box reaches the section's extent along each axis
        let max0 = pts.iter().map(|x| x[0]).fold(0.0, f64::max);
        assert!(max0 > 1.0 && max0 <= 1.5f64.sqrt() + 1e-12);
    }

    #[test]
    fn classify_zero_samples_and_dimension() {
        let s = decoupled();
        let r = RoaRegion::half_space(vec![1.0, 1.0], 1.0).unwrap();
        assert!(classify_roa(&s, &r, 0, 0).unwrap().is_empty());
        let bad = RoaRegion::half_space(vec![1.0], 1.0).unwrap();
        assert!(matches!(classify_roa(&s, &bad, 3, 0), Err(SimError::Dimension(_))));
        let opts = ClassifyOptions {
            horizon: 20.0,
            step: 1e-2,
            threads: 2,
        };
        let out = classify_roa_with(&s, &r, 8, 4, &opts).unwrap();
        assert_eq!(out.len(), 8);
        assert_eq!(converged_fraction(&out), Some(1.0));
        let serial = classify_roa_with(&s, &r, 8, 4, &ClassifyOptions { threads: 1, ..opts }).unwrap();
        assert_eq!(out, serial);
    }

    #[test]
    fn csv_layout() {
        let tr = integrate(&decoupled(), &[1.0, 0.5], 0.002, 1e-3).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x1,x2,y1"));
        assert_eq!(lines.next(), Some("0,1,0.5,1.5"));
        assert_eq!(text.lines().count(), 4);

        let samples = vec![RoaSample {
            x0: vec![0.25, 1.0],
            verdict: Verdict::Censored,
            converged_at: None,
            final_norm: 0.1,
            left_orthant: false,
        }];
        let mut buf = Vec::new();
        write_roa_csv(&samples, 2, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x0_1,x0_2,verdict\n0.25,1,censored\n");
    }
}

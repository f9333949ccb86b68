use lurecert::certify::DEFAULT_SAMPLES_PER_LEVEL;
use lurecert::sim::{
    classify_roa_with, converged_fraction, integrate_with, write_roa_csv, write_trajectory_csv, ClassifyOptions,
    IntegrateOptions, RoaRegion, Verdict,
};
use serde_json::{json, Value};

use super::{aizerman_pipeline, lyap};
use crate::run::{num, CmdResult, InputError, Output, RegionKind, RunOptions, SimulateArgs, Status};

const DEFAULT_SAMPLES: usize = 200;
const TRAJECTORY_ROWS: usize = 2000;

pub fn run(opts: &RunOptions, args: &SimulateArgs) -> CmdResult {
    opts.check_integration()?;
    if !(args.inflate.is_finite() && args.inflate > 0.0) {
        return Err(InputError(format!("--inflate must be positive, got {}", args.inflate)));
    }
    let (system, doc) = opts.system()?;
    let base = json!({ "command": "simulate", "input": opts.input_name() });
    let not_certified = |reason: String| {
        let mut report = base.clone();
        report["failure"] = Value::String(reason.clone());
        let mut out = Output::new(Status::NotCertified, report);
        out.line(format!("no certified region to sample: {reason}"));
        out
    };

    let (region, description) = match args.region {
        RegionKind::Aizerman => {
            let run = aizerman_pipeline(&system, opts)?;
            let Some(roa) = run.roa else {
                return Ok(not_certified(run.cert.failure.unwrap_or_else(|| "no certifiable box".into())));
            };
            let region = RoaRegion::from_aizerman(&roa, system.plant().c())?;
            (region, format!("x0 >= 0, C x0 <= {:.6}", roa.bound))
        }
        RegionKind::Lyapunov => {
            let sigma2 = match lyap::upper_sector(&system, doc.sector.map(|s| s.sigma2().clone()), opts)? {
                Ok(s) => s,
                Err(reason) => return Ok(not_certified(reason)),
            };
            let run = match lyap::pipeline(&system, sigma2.0, sigma2.1, DEFAULT_SAMPLES_PER_LEVEL, opts.seed)? {
                Ok(r) => r,
                Err(reason) => return Ok(not_certified(reason)),
            };
            let rho = run.roa.rho_max;
            (
                RoaRegion::Ellipsoid { p: run.quad.p, rho },
                format!("x0 >= 0, x0^T P x0 <= {rho:.6e}"),
            )
        }
    };
    let region = if args.inflate == 1.0 { region } else { region.inflated(args.inflate) };

    let samples = opts.samples.unwrap_or(DEFAULT_SAMPLES);
    let classify = ClassifyOptions {
        horizon: opts.horizon,
        step: opts.step,
        threads: 0,
    };
    let results = classify_roa_with(&system, &region, samples, opts.seed, &classify)?;
    let count = |v: Verdict| results.iter().filter(|s| s.verdict == v).count();
    let (converged, diverged, censored) = (count(Verdict::Converged), count(Verdict::Diverged), count(Verdict::Censored));
    let fraction = converged_fraction(&results);

    let n = system.plant().state_dim();
    let mut files = Vec::new();
    let mut roa_csv = Vec::new();
    write_roa_csv(&results, n, &mut roa_csv)?;
    files.push(("roa_samples.csv".to_string(), roa_csv));
    if let Some(first) = results.first() {
        let steps = (opts.horizon / opts.step).round() as usize;
        let record = IntegrateOptions {
            record_stride: (steps / TRAJECTORY_ROWS).max(1),
            ..IntegrateOptions::default()
        };
        let traj = integrate_with(&system, &first.x0, opts.horizon, opts.step, &record)?;
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf)?;
        files.push(("trajectory.csv".to_string(), buf));
    }

    let mut report = base;
    report["region"] = json!({
        "kind": match args.region { RegionKind::Aizerman => "aizerman", RegionKind::Lyapunov => "lyapunov" },
        "description": description,
        "inflate": num(args.inflate),
        "spec": serde_json::to_value(&region)?,
    });
    report["sampling"] = json!({
        "samples": samples,
        "seed": opts.seed,
        "horizon": num(opts.horizon),
        "step": num(opts.step),
    });
    report["results"] = json!({
        "converged": converged,
        "diverged": diverged,
        "censored": censored,
        "left_orthant": results.iter().filter(|s| s.left_orthant).count(),
        "converged_fraction": fraction.map(num),
    });
    let mut out = Output::new(Status::Ok, report);
    out.files = files;
    out.line(format!("region: {description} (inflate x{})", args.inflate));
    match fraction {
        Some(f) => out.line(format!(
            "{} samples: {converged} converged, {diverged} diverged, {censored} censored; converged fraction {f:.4}",
            results.len()
        )),
        None => out.line("0 samples drawn"),
    }
    Ok(out)
}

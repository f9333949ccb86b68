use lurecert::certify::{
    quad_certificate, sublevel_roa, CertifyError, QuadCertificate, RhoSchedule, SublevelRoa, VdotEvaluator,
    DEFAULT_SAMPLES_PER_LEVEL,
};
use lurecert::model::LureSystem;
use lurecert::numcore::{orthant_ellipsoid_max, Matrix};
use serde_json::{json, Value};

use super::aizerman_pipeline;
use crate::run::{csv_bytes, matrix, num, vector, CmdResult, InputError, LyapArgs, Output, RunOptions, Status};

pub struct LyapRun {
    pub sigma2: Matrix,
    pub sigma2_source: &'static str,
    pub quad: QuadCertificate,
    pub roa: SublevelRoa,
}

/// Upper sector from the file if it has one, else from the Aizerman search.
pub fn upper_sector(system: &LureSystem, file_sigma2: Option<Matrix>, opts: &RunOptions) -> Result<Result<(Matrix, &'static str), String>, InputError> {
    if let Some(s) = file_sigma2 {
        return Ok(Ok((s, "file")));
    }
    let run = aizerman_pipeline(system, opts)?;
    if run.cert.certified {
        Ok(Ok((run.cert.sector.gamma2, "network sector")))
    } else {
        Ok(Err(run.cert.failure.unwrap_or_else(|| "no certifiable box".into())))
    }
}

/// `Ok(Err(reason))` when the loop cannot be certified.
pub fn pipeline(
    system: &LureSystem,
    sigma2: Matrix,
    sigma2_source: &'static str,
    samples: usize,
    seed: u64,
) -> Result<Result<LyapRun, String>, InputError> {
    let quad = match quad_certificate(system.plant(), &sigma2) {
        Ok(q) => q,
        Err(e @ (CertifyError::NotStable { .. } | CertifyError::NotDoublyPositive { .. })) => return Ok(Err(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let roa = sublevel_roa(system, &quad.p, &RhoSchedule::for_p(&quad.p), samples, seed)?;
    Ok(Ok(LyapRun {
        sigma2,
        sigma2_source,
        quad,
        roa,
    }))
}

pub fn run_json(run: &LyapRun) -> Value {
    let s = &run.roa.schedule;
    json!({
        "sigma2": matrix(&run.sigma2),
        "sigma2_source": run.sigma2_source,
        "p": matrix(&run.quad.p),
        "q_epsilon": num(run.quad.q_epsilon),
        "residual_abscissa": num(run.quad.residual_abscissa),
        "p_min_eigenvalue": num(run.quad.p_min_eigenvalue),
        "p_min_entry": num(run.quad.p_min_entry),
        "rho_max": num(run.roa.rho_max),
        "capped": run.roa.capped,
        "levels_tested": run.roa.levels_tested,
        "samples_per_level": run.roa.samples_per_level,
        "seed": run.roa.seed,
        "schedule": {
            "rho0": num(s.rho0),
            "factor": num(s.factor),
            "rho_cap": num(s.rho_cap),
            "rel_tol": num(s.rel_tol),
        },
        "first_violation": run.roa.first_violation.as_ref().map(|v| json!({
            "rho": num(v.rho),
            "x": vector(&v.x),
            "vdot": num(v.vdot),
            "sample_index": v.sample_index,
        })),
        "output_bound": vector(&run.roa.output_bound),
    })
}

pub fn run(opts: &RunOptions, args: &LyapArgs) -> CmdResult {
    if args.grid < 2 {
        return Err(InputError(format!("--grid must be at least 2, got {}", args.grid)));
    }
    let (system, doc) = opts.system()?;
    let samples = opts.samples.unwrap_or(DEFAULT_SAMPLES_PER_LEVEL);
    if samples == 0 {
        return Err(InputError("--samples must be positive for lyap".into()));
    }
    let base = json!({ "command": "lyap", "input": opts.input_name() });
    let not_certified = |reason: String| {
        let mut report = base.clone();
        report["failure"] = Value::String(reason.clone());
        let mut out = Output::new(Status::NotCertified, report);
        out.line(format!("not certified: {reason}"));
        out
    };
    let (sigma2, source) = match upper_sector(&system, doc.sector.map(|s| s.sigma2().clone()), opts)? {
        Ok(s) => s,
        Err(reason) => return Ok(not_certified(reason)),
    };
    let run = match pipeline(&system, sigma2, source, samples, opts.seed)? {
        Ok(r) => r,
        Err(reason) => return Ok(not_certified(reason)),
    };

    let (header, rows) = vdot_grid(&system, &run, args.grid)?;
    let mut report = base;
    report["certificate"] = run_json(&run);
    report["vdot_grid"] = json!({ "points_per_axis": args.grid, "file": "vdot_grid.csv" });
    let status = if run.roa.rho_max > 0.0 { Status::Ok } else { Status::NotCertified };
    let mut out = Output::new(status, report);
    out.files.push(("vdot_grid.csv".into(), csv_bytes(&header, &rows)?));
    out.line(format!(
        "P = {:?} (Q = I + {} * ones), residual abscissa {:.3e}",
        run.quad.p.to_rows(),
        run.quad.q_epsilon,
        run.quad.residual_abscissa
    ));
    out.line(format!(
        "rho_max = {:.6e} after {} levels{}",
        run.roa.rho_max,
        run.roa.levels_tested,
        if run.roa.capped { " (schedule cap reached)" } else { "" }
    ));
    if let Some(v) = &run.roa.first_violation {
        out.line(format!("first boundary violation at rho = {:.6e}, x = {:?}", v.rho, v.x));
    }
    Ok(out)
}

/// `V'` on a grid over the first two coordinates (the rest held at 0),
/// covering 1.25x the certified set's extent along each axis.
fn vdot_grid(system: &LureSystem, run: &LyapRun, points: usize) -> Result<(Vec<String>, Vec<Vec<f64>>), InputError> {
    let p = &run.quad.p;
    let n = p.rows();
    let axes = n.min(2);
    let rho = run.roa.rho_max;
    let mut extent = Vec::with_capacity(axes);
    for i in 0..axes {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        extent.push(1.25 * orthant_ellipsoid_max(p, &e, rho)?);
    }
    let mut eval = VdotEvaluator::new(system, p)?;
    let mut header: Vec<String> = (1..=axes).map(|i| format!("x{i}")).collect();
    header.push("vdot".into());
    header.push("level".into());
    let mut rows = Vec::new();
    let coord = |k: usize, i: usize| extent[i] * k as f64 / (points - 1) as f64;
    let mut x = vec![0.0; n];
    let mut push = |x: &[f64], rows: &mut Vec<Vec<f64>>| {
        let mut row: Vec<f64> = x[..axes].to_vec();
        row.push(eval.eval(x));
        row.push(if rho > 0.0 { p.quadratic_form(x, x) / rho } else { f64::INFINITY });
        rows.push(row);
    };
    if axes == 1 {
        for k in 0..points {
            x[0] = coord(k, 0);
            push(&x, &mut rows);
        }
    } else {
        for a in 0..points {
            for b in 0..points {
                x[0] = coord(a, 0);
                x[1] = coord(b, 1);
                push(&x, &mut rows);
            }
        }
    }
    Ok((header, rows))
}

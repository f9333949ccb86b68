use std::time::{Duration, Instant};

use lurecert::certify::DEFAULT_SAMPLES_PER_LEVEL;
use serde_json::{json, Value};

use super::{aizerman_pipeline, lyap};
use crate::run::{num, CmdResult, Output, RunOptions, Status};

const REFERENCE: &str = include_str!("../../../../docs/reference_methods.json");
const REPEATS: usize = 5;

fn fastest<T>(mut f: impl FnMut() -> T) -> (T, Duration) {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..REPEATS {
        let t = Instant::now();
        let v = f();
        best = best.min(t.elapsed());
        last = Some(v);
    }
    (last.expect("at least one repeat"), best)
}

pub fn run(opts: &RunOptions) -> CmdResult {
    opts.check_search()?;
    let (system, doc) = opts.system()?;
    let samples = opts.samples.unwrap_or(DEFAULT_SAMPLES_PER_LEVEL);

    let (sector, sector_time) = fastest(|| aizerman_pipeline(&system, opts));
    let sector = sector?;
    let sigma2 = doc.sector.as_ref().map(|s| s.sigma2().clone());
    let upper = lyap::upper_sector(&system, sigma2, opts)?;
    let (lyap_run, lyap_time) = match &upper {
        Ok((s, source)) => {
            let (r, t) = fastest(|| lyap::pipeline(&system, s.clone(), source, samples, opts.seed));
            (r?, Some(t))
        }
        Err(reason) => (Err(reason.clone()), None),
    };

    let sector_row = json!({
        "method": "local sector bound",
        "source": "computed",
        "runtime_s": num(sector_time.as_secs_f64()),
        "certified": sector.roa.is_some(),
        "region": sector.roa.as_ref().map(|r| format!("C x0 <= {:.4}", r.bound)),
        "failure": sector.cert.failure,
    });
    let lyap_row = json!({
        "method": "quadratic Lyapunov sublevel set",
        "source": "computed",
        "runtime_s": lyap_time.map(|t| num(t.as_secs_f64())),
        "certified": lyap_run.is_ok(),
        "region": lyap_run.as_ref().ok().map(|r| format!("x^T P x <= {:.4e}", r.roa.rho_max)),
        "failure": lyap_run.as_ref().err(),
    });
    let reference: Value = serde_json::from_str(REFERENCE)?;
    let mut rows = vec![sector_row, lyap_row];
    if let Some(external) = reference["rows"].as_array() {
        rows.extend(external.iter().cloned());
    }

    let both = sector.roa.is_some() && lyap_run.is_ok();
    let report = json!({
        "command": "compare",
        "input": opts.input_name(),
        "repeats": REPEATS,
        "samples_per_level": samples,
        "seed": opts.seed,
        "rows": rows,
        "reference_note": reference["note"],
    });
    let mut out = Output::new(if both { Status::Ok } else { Status::NotCertified }, report);
    out.line(format!("{:<34} {:>12}  region", "method", "runtime (s)"));
    for row in &rows {
        let runtime = row["runtime_s"].as_f64().map_or("-".to_string(), |t| format!("{t:.3e}"));
        let label = match row["source"].as_str() {
            Some("computed") => row["method"].as_str().unwrap_or("").to_string(),
            _ => format!("{} [external]", row["method"].as_str().unwrap_or("")),
        };
        let region = row["region"].as_str().unwrap_or("not certified");
        out.line(format!("{label:<34} {runtime:>12}  {region}"));
    }
    Ok(out)
}

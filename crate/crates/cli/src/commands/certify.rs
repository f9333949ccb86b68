use lurecert::certify::linear_certificate;
use serde_json::json;

use super::{aizerman_pipeline, certificate_json, roa_json};
use crate::run::{num, CmdResult, Output, RunOptions, Status};

pub fn run(opts: &RunOptions) -> CmdResult {
    let (system, _) = opts.system()?;
    let run = aizerman_pipeline(&system, opts)?;
    let linear = match &run.roa {
        Some(_) => Some(linear_certificate(system.plant(), &run.cert.sector.gamma2)?),
        None => None,
    };
    let report = json!({
        "command": "certify",
        "input": opts.input_name(),
        "certificate": certificate_json(&run.cert),
        "region": run.roa.as_ref().map(roa_json),
        "linear_lyapunov": linear.as_ref().map(|l| json!({
            "v": l.v.entries().iter().copied().map(num).collect::<Vec<_>>(),
            "margin": num(l.margin),
        })),
    });
    let status = if run.roa.is_some() { Status::Ok } else { Status::NotCertified };
    let mut out = Output::new(status, report);
    match (&run.roa, run.cert.y_bar) {
        (Some(roa), Some(y_bar)) => {
            out.line(format!(
                "certified: Γ = [0, {y_bar:.6}], gamma1 = {:.6}, gamma2 = {:.6}",
                run.cert.sector.gamma1[(0, 0)],
                run.cert.sector.gamma2[(0, 0)]
            ));
            out.line(format!("region of attraction: x0 >= 0, C x0 <= {:.6} (cone ratio {:.5})", roa.bound, roa.ratio));
        }
        _ => out.line(format!(
            "not certified: {}",
            run.cert.failure.as_deref().unwrap_or("no certifiable box")
        )),
    }
    Ok(out)
}

use lurecert::certify::sector_limits;
use serde_json::json;

use crate::run::{num, CmdResult, Output, RunOptions, Status};

pub fn run(opts: &RunOptions) -> CmdResult {
    let doc = opts.document()?;
    let plant = &doc.plant;
    let (n, m, p) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    let limits = if m == 1 && p == 1 { Some(sector_limits(plant)?) } else { None };
    let stable = limits.is_some_and(|l| !l.is_empty());
    let report = json!({
        "command": "check",
        "input": opts.input_name(),
        "plant": { "states": n, "inputs": m, "outputs": p },
        "positive": true,
        "network": doc.network.as_ref().map(|net| json!({
            "layer_widths": net.layer_widths(),
            "activations": net.activations().iter().map(|a| a.name()).collect::<Vec<_>>(),
        })),
        "sector_limits": limits.map(|l| json!({
            "sigma1_min": num(l.sigma1_min),
            "sigma2_max": l.sigma2_max.map(num),
        })),
        "stable_sector": stable,
    });
    let status = if stable { Status::Ok } else { Status::NotCertified };
    let mut out = Output::new(status, report);
    out.line(format!("plant: {n} states, {m} input(s), {p} output(s); A Metzler, B >= 0, C >= 0"));
    match limits {
        None => out.line("sector limits: only defined for a single-input single-output channel"),
        Some(l) => match l.sigma2_max {
            Some(s2) => out.line(format!("stable sector: sigma1_min = {}, sigma2_max = {s2:.6}", l.sigma1_min)),
            None => out.line(format!("no stable sector (sigma1_min = {})", l.sigma1_min)),
        },
    }
    Ok(out)
}

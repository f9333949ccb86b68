use lurecert::certify::sector_limits;
use lurecert::model::SectorInterval;
use lurecert::nnbound::{gamma_search, propagate_sector, GammaBox};
use lurecert::sim::gamma_scan;
use serde_json::json;

use crate::run::{csv_bytes, matrix, num, vector, CmdResult, InputError, Output, RunOptions, SectorArgs, Status};

const DEFAULT_BOXES: usize = 20;
const ENVELOPE_POINTS: usize = 1000;
const SCAN_GRID: usize = 10_000;

pub fn run(opts: &RunOptions, args: &SectorArgs) -> CmdResult {
    opts.check_search()?;
    let (system, doc) = opts.system()?;
    let net = system.feedback();
    if net.input_dim() != 1 {
        return Err(InputError(format!("sector sweep needs a scalar-input network, got {}", net.input_dim())));
    }
    let y_bars: Vec<f64> = if args.y_bars.is_empty() {
        (1..=DEFAULT_BOXES).map(|k| opts.y_max * k as f64 / DEFAULT_BOXES as f64).collect()
    } else {
        args.y_bars.clone()
    };
    if let Some(bad) = y_bars.iter().find(|y| !(y.is_finite() && **y > 0.0)) {
        return Err(InputError(format!("box sizes must be positive, got {bad}")));
    }

    let p = net.output_dim();
    let mut eval = net.evaluator();
    let mut rows = Vec::with_capacity(y_bars.len());
    let mut table = Vec::with_capacity(y_bars.len());
    for &y_bar in &y_bars {
        let sector = propagate_sector(net, &GammaBox::scalar(y_bar)?)?;
        // direct min/max of NN(y)/y over (0, y_bar]
        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for k in 1..=ENVELOPE_POINTS {
            let y = y_bar * k as f64 / ENVELOPE_POINTS as f64;
            for (i, u) in eval.eval(&[y]).iter().enumerate() {
                lo[i] = lo[i].min(u / y);
                hi[i] = hi[i].max(u / y);
            }
        }
        let mut row = vec![y_bar];
        row.extend(sector.gamma1.col(0));
        row.extend(sector.gamma2.col(0));
        row.extend(&lo);
        row.extend(&hi);
        rows.push(row);
        table.push(json!({
            "y_bar": num(y_bar),
            "gamma1": matrix(&sector.gamma1),
            "gamma2": matrix(&sector.gamma2),
            "scan_min": vector(&lo),
            "scan_max": vector(&hi),
        }));
    }
    let header: Vec<String> = if p == 1 {
        ["y_bar", "gamma1", "gamma2", "scan_min", "scan_max"].map(String::from).to_vec()
    } else {
        let mut h = vec!["y_bar".to_string()];
        for name in ["gamma1", "gamma2", "scan_min", "scan_max"] {
            h.extend((1..=p).map(|i| format!("{name}_{i}")));
        }
        h
    };

    let target = match doc.sector {
        Some(s) => Some((s, "file")),
        None if p == 1 && doc.plant.input_dim() == 1 && doc.plant.output_dim() == 1 => {
            let lim = sector_limits(&doc.plant)?;
            match lim.sigma2_max {
                Some(s2) if lim.sigma1_min.is_finite() && s2.is_finite() => {
                    Some((SectorInterval::scalar_global(lim.sigma1_min, s2)?, "stable sector of the plant"))
                }
                _ => None,
            }
        }
        None => None,
    };
    let gamma = match &target {
        Some((t, source)) => {
            let search = gamma_search(net, t, opts.y_max, opts.tol)?;
            let scan = gamma_scan(net, t, opts.y_max, SCAN_GRID)?;
            Some((t, *source, search.y_bar(), scan))
        }
        None => None,
    };

    let report = json!({
        "command": "sector",
        "input": opts.input_name(),
        "y_max": num(opts.y_max),
        "tol": num(opts.tol),
        "envelope_points": ENVELOPE_POINTS,
        "boxes": table,
        "gamma": gamma.as_ref().map(|(t, source, search, scan)| json!({
            "target_source": source,
            "sigma1": matrix(t.sigma1()),
            "sigma2": matrix(t.sigma2()),
            "y_bar_bound_engine": search.map(num),
            "y_bar_direct_scan": num(*scan),
            "scan_grid": SCAN_GRID,
        })),
    });
    let mut out = Output::new(Status::Ok, report);
    out.files.push(("sector.csv".into(), csv_bytes(&header, &rows)?));
    out.line(format!("{:>12} {:>14} {:>14}", "y_bar", "gamma1", "gamma2"));
    for r in &rows {
        out.line(format!("{:>12.6} {:>14.8} {:>14.8}", r[0], r[1], r[1 + p]));
    }
    if let Some((_, source, search, scan)) = &gamma {
        let search = search.map_or("none".to_string(), |y| format!("{y:.6}"));
        out.line(format!("largest Γ for the {source}: bound engine {search}, direct scan {scan:.6}"));
    }
    Ok(out)
}

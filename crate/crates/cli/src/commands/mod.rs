pub mod certify;
pub mod check;
pub mod compare;
pub mod lyap;
pub mod sector;
pub mod simulate;

use lurecert::certify::{aizerman_roa, nn_aizerman_certify, AizermanROA, NnAizerman};
use lurecert::model::LureSystem;
use serde_json::{json, Value};

use crate::run::{matrix, num, InputError, RunOptions};

pub struct AizermanRun {
    pub cert: NnAizerman,
    pub roa: Option<AizermanROA>,
}

pub fn aizerman_pipeline(system: &LureSystem, opts: &RunOptions) -> Result<AizermanRun, InputError> {
    opts.check_search()?;
    let cert = nn_aizerman_certify(system, opts.y_max, opts.tol)?;
    let roa = match (cert.certified, cert.y_bar, cert.sector_interval()) {
        (true, Some(y_bar), Some(sector)) => Some(aizerman_roa(system.plant(), &sector, y_bar)?),
        _ => None,
    };
    Ok(AizermanRun { cert, roa })
}

pub fn certificate_json(cert: &NnAizerman) -> Value {
    json!({
        "certified": cert.certified,
        "y_probe_max": num(cert.y_probe_max),
        "tol": num(cert.tol),
        "sector_limits": cert.limits.map(|l| json!({
            "sigma1_min": num(l.sigma1_min),
            "sigma2_max": l.sigma2_max.map(num),
        })),
        "y_bar": cert.y_bar.map(num),
        "gamma1": matrix(&cert.sector.gamma1),
        "gamma2": matrix(&cert.sector.gamma2),
        "verdict": {
            "metzler_ok": cert.verdict.metzler_ok,
            "hurwitz_ok": cert.verdict.hurwitz_ok,
            "upper_abscissa": num(cert.verdict.upper_abscissa),
        },
        "failure": cert.failure,
    })
}

pub fn roa_json(roa: &AizermanROA) -> Value {
    json!({
        "cone_vector": roa.v.entries().iter().copied().map(num).collect::<Vec<_>>(),
        "ratio": num(roa.ratio),
        "y_bar": num(roa.y_bar),
        "bound": num(roa.bound),
        "slack": num(roa.slack),
    })
}

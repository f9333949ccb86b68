use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, FeedforwardNet, LureSystem, ModelError, PositiveLTI, SectorInterval};
use crate::numcore::Matrix;

/// Everything a system file can carry. Only the plant is mandatory.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDocument {
    pub plant: PositiveLTI,
    pub network: Option<FeedforwardNet>,
    pub sector: Option<SectorInterval>,
}

impl SystemDocument {
    pub fn from_system(system: &LureSystem) -> Self {
        Self {
            plant: system.plant().clone(),
            network: Some(system.feedback().clone()),
            sector: None,
        }
    }

    pub fn into_system(self) -> Result<LureSystem, ModelError> {
        let net = self.network.ok_or(ModelError::MissingNetwork)?;
        LureSystem::new(self.plant, net)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "B")]
    b: Matrix,
    #[serde(rename = "C")]
    c: Matrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    network: Option<NetworkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector: Option<SectorFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    weights: Vec<Matrix>,
    activations: Vec<String>,
    // present only so that biased layers get a specific error
    #[serde(default, skip_serializing)]
    biases: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectorFile {
    sigma1: Matrix,
    sigma2: Matrix,
    // null encodes +inf
    y_upper: Vec<Option<f64>>,
}

/// Parses a system document from JSON text.
pub fn parse_document(text: &str) -> Result<SystemDocument, ModelError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SystemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ModelError::Parse(format!(
            "line {} column {}, field `{}`: {}",
            inner.line(),
            inner.column(),
            path,
            inner
        ))
    })?;

    let plant = PositiveLTI::new(file.a, file.b, file.c)?;
    let network = file.network.map(network_from_file).transpose()?;
    let sector = file
        .sector
        .map(|s| {
            let ys = s.y_upper.into_iter().map(|y| y.unwrap_or(f64::INFINITY)).collect();
            SectorInterval::new(s.sigma1, s.sigma2, ys)
        })
        .transpose()?;
    if let Some(net) = &network {
        LureSystem::new(plant.clone(), net.clone())?;
    }
    if let Some(s) = &sector {
        if s.sigma1().shape() != (plant.input_dim(), plant.output_dim()) {
            return Err(ModelError::Dimension(format!(
                "sector slopes must be {}x{}",
                plant.input_dim(),
                plant.output_dim()
            )));
        }
    }
    Ok(SystemDocument {
        plant,
        network,
        sector,
    })
}

fn network_from_file(n: NetworkFile) -> Result<FeedforwardNet, ModelError> {
    if n.biases.is_some() {
        return Err(ModelError::Parse(
            "network.biases: biased layers are not supported".into(),
        ));
    }
    if n.weights.is_empty() {
        return Err(ModelError::Parse("network.weights: empty weight list".into()));
    }
    let acts = n
        .activations
        .iter()
        .map(|s| s.parse::<Activation>())
        .collect::<Result<Vec<_>, _>>()?;
    FeedforwardNet::new(n.weights, acts)
}

fn read(path: &Path) -> Result<String, ModelError> {
    fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_document(path: impl AsRef<Path>) -> Result<SystemDocument, ModelError> {
    parse_document(&read(path.as_ref())?)
}

/// Loads a file that must contain a network.
pub fn load_system(path: impl AsRef<Path>) -> Result<LureSystem, ModelError> {
    load_document(path)?.into_system()
}

/// Serializes to pretty JSON. Floats use shortest round-trip formatting, so
/// reloading reproduces every entry bit-exactly.
pub fn document_to_string(doc: &SystemDocument) -> String {
    let file = SystemFile {
        a: doc.plant.a().clone(),
        b: doc.plant.b().clone(),
        c: doc.plant.c().clone(),
        network: doc.network.as_ref().map(|n| NetworkFile {
            weights: n.weights().to_vec(),
            activations: n.activations().iter().map(|a| a.name().to_string()).collect(),
            biases: None,
        }),
        sector: doc.sector.as_ref().map(|s| SectorFile {
            sigma1: s.sigma1().clone(),
            sigma2: s.sigma2().clone(),
            y_upper: s
                .gamma_upper()
                .iter()
                .map(|&y| y.is_finite().then_some(y))
                .collect(),
        }),
    };
    serde_json::to_string_pretty(&file).expect("system document serializes")
}

pub fn save_document(doc: &SystemDocument, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, document_to_string(doc) + "\n").map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

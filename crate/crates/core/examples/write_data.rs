//! Regenerates the JSON system files under `data/`.
//!
//! cargo run -p lurecert --example write_data -- data

use std::path::PathBuf;

use lurecert::model::{
    fixture_net, save_document, Activation, FeedforwardNet, PositiveLTI, SectorInterval, SystemDocument,
};
use lurecert::numcore::Matrix;

fn worked_plant() -> PositiveLTI {
    PositiveLTI::new(
        Matrix::from_rows(&[[-7.0, 5.0], [6.0, 1.0]]).unwrap(),
        Matrix::col_vector(&[1.0, 2.0]),
        Matrix::row_vector(&[1.0, 1.0]),
    )
    .unwrap()
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir).expect("create data dir");
    let write = |name: &str, doc: SystemDocument| {
        let path = dir.join(name);
        save_document(&doc, &path).expect("write system file");
        println!("wrote {}", path.display());
    };

    write(
        "worked_plant.json",
        SystemDocument {
            plant: worked_plant(),
            network: None,
            sector: None,
        },
    );
    write(
        "fixture_system.json",
        SystemDocument {
            plant: worked_plant(),
            network: Some(fixture_net(0)),
            sector: None,
        },
    );
    let toy = FeedforwardNet::new(vec![Matrix::scalar(1.0), Matrix::scalar(-2.0)], vec![Activation::Tanh]).unwrap();
    write(
        "toy_system.json",
        SystemDocument {
            plant: worked_plant(),
            network: Some(toy),
            sector: Some(SectorInterval::scalar_global(-3.0, -1.276).unwrap()),
        },
    );
    write(
        "zero_feedback.json",
        SystemDocument {
            plant: worked_plant(),
            network: Some(FeedforwardNet::linear(Matrix::scalar(0.0)).unwrap()),
            sector: None,
        },
    );
    let no_sector = PositiveLTI::new(
        Matrix::identity(2),
        Matrix::col_vector(&[1.0, 0.0]),
        Matrix::row_vector(&[0.0, 1.0]),
    )
    .unwrap();
    write(
        "empty_sector.json",
        SystemDocument {
            plant: no_sector,
            network: Some(FeedforwardNet::linear(Matrix::scalar(-1.0)).unwrap()),
            sector: None,
        },
    );
}

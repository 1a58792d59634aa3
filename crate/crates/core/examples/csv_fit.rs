//! Round trip through CSV: write a simulated dataset, load it back by
//! schema, fit every estimator.
//!
//! cargo run --example csv_fit [FILE]

use std::fs::File;

use sfd::dataset::{load_csv, CsvSchema};
use sfd::estimation::{fit, robinson_fit, EstimatorKind};
use sfd::inference::SeMethod;
use sfd::ordering::{order_1d, Axis};
use sfd::simulation::simulate_common_cause;
use sfd::simulation::Scenario;

fn main() -> sfd::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("sfd_common_cause.csv").display().to_string());
    let sim = simulate_common_cause(500, Scenario::B, 21)?;
    sim.dataset.write_csv(File::create(&path).map_err(|e| sfd::Error::Io {
        path: path.clone().into(),
        source: e,
    })?)?;

    let ds = load_csv(&path, &CsvSchema::new("y", &["x"]))?;
    let order = order_1d(&ds, Axis::X);
    println!("{path}: {} units", ds.len());
    for kind in [EstimatorKind::Levels, EstimatorKind::Sfd, EstimatorKind::Sdd] {
        let f = fit(&ds, &order, kind, &SeMethod::NeweyWest { lag: 2 })?;
        println!("{}", f.table());
    }
    println!("{}", robinson_fit(&ds, &order, 10, &SeMethod::Hc)?.table());
    Ok(())
}

//! Degree days from hourly temperatures, plus the column transforms.

use sfd::dataset::{apply_transforms, degree_days, SpatialDataset, TransformSpec, Unit};
use sfd::geometry::Point;
use sfd::ordering::{order_1d, Axis};

fn main() -> sfd::Result<()> {
    let day: Vec<f64> = (0..24)
        .map(|h| 22.0 + 10.0 * ((h as f64 - 9.0) / 24.0 * std::f64::consts::TAU).sin())
        .collect();
    let (below, above) = degree_days(&day, 29.0)?;
    println!("one day: {below:.3} degree days below 29C, {above:.3} above");

    let units = (0..6)
        .map(|i| {
            let t = 24.0 + i as f64;
            Unit::new(
                format!("c{i}"),
                Point::new(i as f64, 0.0),
                0.0,
                vec![t - 2.0, t + 3.0, 400.0 + 10.0 * i as f64],
            )
        })
        .collect();
    let ds = SpatialDataset::new("yield", vec!["tmin".into(), "tmax".into(), "precip".into()], units)?;
    let path = order_1d(&ds, Axis::X);
    let out = apply_transforms(
        &ds,
        Some(&path),
        &[
            TransformSpec::degree_days(&["tmin", "tmax"], 29.0, "dd"),
            TransformSpec::polynomial("precip", 2, "precip_sq"),
            TransformSpec::spatial_lag("precip", 1, "precip_lag1"),
        ],
    )?;
    println!("columns: {:?}", out.columns());
    for u in out.units() {
        println!("  {} {:?}", u.id, u.regressors);
    }
    Ok(())
}

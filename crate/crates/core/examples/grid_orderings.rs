//! West-east and north-south channels on a lattice, and the same channels
//! recovered by band sampling at zero rotation.

use sfd::estimation::{fit, EstimatorKind};
use sfd::inference::SeMethod;
use sfd::ordering::{assign_channels, lattice_row_spacing, order_grid, GridDirection};
use sfd::simulation::{DGPConfig, DgpKind};

fn main() -> sfd::Result<()> {
    let sim = DGPConfig::new(DgpKind::ChannelConfounded { rows: 12 }, 600, 3).draw(0)?;
    let ds = sim.dataset.select_columns(&["x"])?;

    for dir in [GridDirection::WE, GridDirection::NS] {
        let path = order_grid(&ds, dir)?;
        let f = fit(&ds, &path, EstimatorKind::Sfd, &SeMethod::Cluster)?;
        println!(
            "{:?}: {} channels, longest {}, slope {:.4} (se {:.4})",
            dir,
            path.channels().len(),
            path.longest_channel(),
            f.coef("x").unwrap(),
            f.se("x").unwrap()
        );
    }

    let spacing = lattice_row_spacing(&ds).expect("lattice");
    let bands = assign_channels(&ds, spacing, 0.0)?;
    let rows = order_grid(&ds, GridDirection::WE)?;
    println!("bands at theta = 0 match rows: {}", bands.channels() == rows.channels());
    Ok(())
}

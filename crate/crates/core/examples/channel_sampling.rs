//! Band sampling over polygon units at a few rotations.

use sfd::ordering::{assign_channels, default_channel_width};
use sfd::simulation::simulate_isotropic_grid;

fn main() -> sfd::Result<()> {
    let sim = simulate_isotropic_grid(20, 9)?;
    let ds = &sim.dataset;
    let width = default_channel_width(ds).unwrap_or(1.0);
    println!("{} units, channel width {width}", ds.len());

    for theta in [0.0, 15.0, 45.0, -60.0, 90.0] {
        let path = assign_channels(ds, width, theta)?;
        let lens: Vec<usize> = path.channels().iter().map(Vec::len).collect();
        println!(
            "theta {theta:>5}: {:>3} channels, {} units placed, longest {}, shortest {}",
            lens.len(),
            path.n_units(),
            lens.iter().max().unwrap_or(&0),
            lens.iter().min().unwrap_or(&0)
        );
    }

    let mut out = Vec::new();
    assign_channels(ds, width, 30.0)?.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    for line in text.lines().take(5) {
        println!("  {line}");
    }
    Ok(())
}

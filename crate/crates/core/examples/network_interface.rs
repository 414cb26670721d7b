//! A channel between a t = 1 region and an r = 1 region carries a state across
//! the single-switch path; deep inside either region states circle a face.

use netflux::dynamics::{evolve, NetworkModel};
use netflux::flux::cc_flux_blocks;
use netflux::lattice::{build_window, LatticeCoord};
use netflux::linalg::{ONE, ZERO};
use netflux::network::{ScatteringField, ScatteringParams};
use netflux::path::{side_partition, single_switch_path, validate};

fn main() -> netflux::Result<()> {
    let window = build_window(8)?;
    let mut field = ScatteringField::constant(ScatteringParams::IDENTITY);
    let full_t = ScatteringParams::new(ONE, ZERO, ONE)?;
    for &z in window.kagome_vertices.iter().filter(|z| z.a < 0) {
        field.set(z, full_t);
    }
    let path = single_switch_path(&window, 0.9)?;
    let part = side_partition(&validate(&path, &window)?, &window)?;
    let blocks = cc_flux_blocks(&field, &part, &window)?;
    let model = NetworkModel::new(field, window, &part, blocks)?;

    let trace = evolve(&model, &model.basis(LatticeCoord::new(-3, 69))?, 72)?;
    for row in trace.rows.iter().step_by(6) {
        println!("t={:2} <P>={:.0} mean x={:+.2}", row.t, row.p_expect, row.mean_x);
    }
    println!("telescoping residual {:.1e}", trace.telescoping_residual);
    Ok(())
}

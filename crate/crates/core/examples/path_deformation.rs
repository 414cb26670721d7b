//! The index along a homotopy of fields and across path shapes.

use netflux::flux::{cc_flux_blocks, homotopy_sweep, spectral_index};
use netflux::lattice::{build_window, LatticeCoord};
use netflux::network::{hadamard_field, ScatteringField};
use netflux::path::{canonical_path, check_tail_regularity, side_partition, validate, PathShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = build_window(5)?;
    let hadamard = hadamard_field(&window);
    let start = ScatteringField::random(&window, &mut ChaCha8Rng::seed_from_u64(3), 0.1, 0.9, hadamard.default);

    for shape in [PathShape::SingleSwitch, PathShape::TripleSwitch] {
        let path = canonical_path(shape, &window, LatticeCoord::new(0, 0), 0.95)?;
        let vp = validate(&path, &window)?;
        let part = side_partition(&vp, &window)?;
        let params: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let sweep = homotopy_sweep(&params, |s| {
            let mut field = ScatteringField::constant(start.default.interpolate(&hadamard.default, s));
            for &z in &window.kagome_vertices {
                field.set(z, start.get(z).interpolate(hadamard.get(z), s));
            }
            let tail = check_tail_regularity(&path, &field, &window)?;
            spectral_index(&cc_flux_blocks(&field, &part, &window)?.with_tail(tail), 1e-8)
        })?;
        println!("{shape:?}: index {} along the sweep, min gap {:.4}", sweep.index, sweep.min_gap);
    }
    Ok(())
}

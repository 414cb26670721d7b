//! Random admissible paths: the per-vertex count agrees with the block spectra.

use netflux::flux::{cc_flux_blocks, spectral_index};
use netflux::lattice::build_window;
use netflux::network::{hadamard_field, ScatteringField};
use netflux::path::{check_tail_regularity, combinatorial_index, random_path, side_partition, validate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = build_window(5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let default = hadamard_field(&window).default;
    for k in 0..8 {
        let Some(path) = random_path(&window, &mut rng, 10, 500, 0.9) else { continue };
        let vp = validate(&path, &window)?;
        let part = side_partition(&vp, &window)?;
        let field = ScatteringField::random(&window, &mut rng, 0.1, 0.9, default);
        let cert = combinatorial_index(&vp, &part, &field, &window)?;
        let tail = check_tail_regularity(&path, &field, &window)?;
        let spec = spectral_index(&cc_flux_blocks(&field, &part, &window)?.with_tail(tail), 1e-8)?;
        println!("path {k}: {} centers, combinatorial {:+}, spectral {:+}", path.centers.len(), cert.index, spec.index);
    }
    Ok(())
}

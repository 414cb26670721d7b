//! Flux index of the walk for coins that break the decoupling on a few sites.

use netflux::flux::{qw_flux_matrix, spectral_index};
use netflux::walk::{remark_perturbation, LeadProjection, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = WalkWindow::new(-9, 9, -6, 5)?;
    let lead = LeadProjection::default();
    for seed in 1..=5u64 {
        let coins = remark_perturbation(&mut ChaCha8Rng::seed_from_u64(seed));
        let flux = qw_flux_matrix(&coins, &lead, &window)?;
        let r = spectral_index(&flux, 1e-9)?;
        println!(
            "seed {seed}: index {} trace {:.12} gap {:.3} boundary residual {:.1e}",
            r.index,
            flux.matrix.trace().re,
            r.gap,
            flux.boundary_residual
        );
    }
    Ok(())
}

//! Index from localized solutions of the lead equations, next to the spectral index.

use netflux::flux::{fredholm_counts, qw_flux_matrix, spectral_index};
use netflux::walk::{fully_decoupled, remark_perturbation, CoinPair, LeadProjection, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = WalkWindow::new(-9, 9, -6, 5)?;
    let lead = LeadProjection::default();
    let cases = [
        ("decoupled", fully_decoupled(&CoinPair::random_box(&mut ChaCha8Rng::seed_from_u64(0), -9..=9, -6..=5))),
        ("perturbed", remark_perturbation(&mut ChaCha8Rng::seed_from_u64(1))),
    ];
    for (name, coins) in cases {
        let f = fredholm_counts(&coins, &lead, 16, 1e-8)?;
        let s = spectral_index(&qw_flux_matrix(&coins, &lead, &window)?, 1e-9)?;
        println!(
            "{name}: localized backward {} forward {} -> index {}, spectral {}",
            f.localized_backward(),
            f.localized_forward(),
            f.index(),
            s.index
        );
    }
    Ok(())
}

//! The +1 eigenspace of the flux next to the states that enter the lead and never leave.

use netflux::dynamics::incoming_subspace;
use netflux::flux::qw_flux_matrix;
use netflux::linalg::C64;
use netflux::walk::{remark_perturbation, LeadProjection, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn print_support(label: &str, window: &WalkWindow, v: &[C64]) {
    let parts: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 1e-6)
        .map(|(i, a)| {
            let ((x, y), spin) = window.site_of(i);
            format!("({x},{y};{}) {:.3}", if spin == 0 { '+' } else { '-' }, a.norm())
        })
        .collect();
    println!("  {label}: {}", parts.join(", "));
}

fn main() -> netflux::Result<()> {
    let window = WalkWindow::new(-9, 9, -6, 5)?;
    let lead = LeadProjection::default();
    let coins = remark_perturbation(&mut ChaCha8Rng::seed_from_u64(1));

    println!("ker(flux - 1):");
    for v in qw_flux_matrix(&coins, &lead, &window)?.unit_eigenvectors(1.0, 1e-9)? {
        print_support("v", &window, &v);
    }
    let region = WalkWindow::new(-6, 6, -3, 3)?;
    println!("incoming:");
    for v in incoming_subspace(&coins, &lead, &region, 12, 1e-9)? {
        print_support("w", &region, &v);
    }
    Ok(())
}

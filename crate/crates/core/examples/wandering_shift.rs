//! With both lead rows decoupled, U shifts the lead one site to the right and
//! the two states at x = -1 generate a wandering subspace.

use netflux::linalg::inner;
use netflux::walk::{apply_kernel, fully_decoupled, l0_basis, CoinPair, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = WalkWindow::new(-4, 30, -4, 3)?;
    let coins = fully_decoupled(&CoinPair::random_box(&mut ChaCha8Rng::seed_from_u64(9), -4..=30, -4..=3));
    let l0 = l0_basis(&window)?;
    let mut orbit = l0.clone();
    let mut worst = 0.0f64;
    for n in 1..=20 {
        for v in orbit.iter_mut() {
            *v = apply_kernel(&coins, &window, v, false)?;
        }
        for a in &l0 {
            for b in &orbit {
                worst = worst.max(inner(a, b).norm());
            }
        }
        let peak = orbit[0].iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap().0;
        if n % 5 == 0 {
            println!("n = {n:2}: (-1,0;+) has moved to {:?}", window.site_of(peak));
        }
    }
    println!("max |<L0, U^n L0>| for n = 1..20: {worst:.2e}");
    Ok(())
}

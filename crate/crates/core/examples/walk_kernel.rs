//! The walk step as a sparse kernel against the four factors applied in turn.

use netflux::linalg::norm;
use netflux::walk::{apply_factors, apply_kernel, CoinPair, Factor, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = WalkWindow::square(4)?;
    let coins = CoinPair::random_box(&mut ChaCha8Rng::seed_from_u64(5), -4..=4, -4..=4);
    let all = [Factor::C1, Factor::Tx, Factor::C2, Factor::Ty];
    let mut worst = 0.0f64;
    for x in -3..=3 {
        for y in -3..=3 {
            for spin in 0..2 {
                let v = window.basis((x, y), spin)?;
                let a = apply_kernel(&coins, &window, &v, false)?;
                let b = apply_factors(&v, &coins, &window, &all)?;
                let d: Vec<_> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
                worst = worst.max(norm(&d));
            }
        }
    }
    println!("max |U e - T_y C2 T_x C1 e| over 98 basis states: {worst:.2e}");
    Ok(())
}

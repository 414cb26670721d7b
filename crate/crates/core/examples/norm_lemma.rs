//! Operator and trace norm of the flux through an R-path: sup |r| and 2 sum |r|.

use netflux::flux::{cc_flux_blocks, flux_norms};
use netflux::lattice::{build_window, LatticeCoord};
use netflux::network::{ScatteringField, ScatteringParams};
use netflux::path::{canonical_path, check_tail_regularity, contributing_set, side_partition, validate, PathShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let window = build_window(5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let field = ScatteringField::random(&window, &mut rng, 0.0, 1.0, ScatteringParams::with_modulus(0.0)?);
    let path = canonical_path(PathShape::RPath, &window, LatticeCoord::new(0, 0), 0.5)?;
    let vp = validate(&path, &window)?;
    let part = side_partition(&vp, &window)?;
    let tail = check_tail_regularity(&path, &field, &window)?;
    let (op, tr) = flux_norms(&cc_flux_blocks(&field, &part, &window)?.with_tail(tail))?;

    let rs: Vec<f64> = contributing_set(&vp).into_iter().map(|z| field.get(z).r.norm()).collect();
    let sup = rs.iter().copied().fold(0.0, f64::max);
    println!("{} contributing vertices", rs.len());
    println!("operator norm {op:.12}  sup|r|   {sup:.12}");
    println!("trace norm    {tr:.12}  2 sum|r| {:.12}", 2.0 * rs.iter().sum::<f64>());
    Ok(())
}

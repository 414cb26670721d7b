//! Index of the flux through the single-switch path for the Hadamard network.

use netflux::flux::{cc_flux_blocks, spectral_index};
use netflux::lattice::build_window;
use netflux::network::hadamard_field;
use netflux::path::{check_tail_regularity, combinatorial_index, side_partition, single_switch_path, validate};

fn main() -> netflux::Result<()> {
    let window = build_window(6)?;
    let field = hadamard_field(&window);
    let path = single_switch_path(&window, 0.9)?;
    let vp = validate(&path, &window)?;
    let part = side_partition(&vp, &window)?;

    let cert = combinatorial_index(&vp, &part, &field, &window)?;
    let tail = check_tail_regularity(&path, &field, &window)?;
    let spec = spectral_index(&cc_flux_blocks(&field, &part, &window)?.with_tail(tail), 1e-8)?;

    println!("combinatorial index {}", cert.index);
    println!("spectral index      {} (gap {:.4}, unit eigenvalues {:?})", spec.index, spec.gap, spec.unit_eigenvalues);
    for (z, (out, inc)) in cert.per_vertex.iter().filter(|(_, (o, i))| o != i) {
        println!("  {z}: {out} out, {inc} in");
    }
    Ok(())
}

//! Incoming states of the walk travel down the lead at one site per step.

use netflux::dynamics::edge_current_demo;
use netflux::flux::qw_flux_matrix;
use netflux::walk::{remark_perturbation, LeadProjection, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> netflux::Result<()> {
    let lead = LeadProjection::default();
    let coins = remark_perturbation(&mut ChaCha8Rng::seed_from_u64(1));
    let flux = qw_flux_matrix(&coins, &lead, &WalkWindow::new(-9, 9, -6, 5)?)?;
    let demo = edge_current_demo(&coins, &lead, 50, 3, &flux)?;
    println!("{} incoming states", demo.dim_incoming);
    for (k, run) in demo.runs.iter().enumerate() {
        println!(
            "state {k}: entry step {:?}, velocity {:?}, max |<P> - 1| {:.1e}",
            run.entry_step, run.velocity, run.p_deviation_after_entry
        );
        for row in run.trace.rows.iter().step_by(10) {
            println!("  t={:2} <P>={:.6} <flux>={:+.6} mean x={:.3}", row.t, row.p_expect, row.flux_expect, row.mean_x);
        }
    }
    Ok(())
}

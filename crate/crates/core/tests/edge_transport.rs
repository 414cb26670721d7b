use netflux::dynamics::{evolve, incoming_subspace, NetworkModel};
use netflux::flux::{cc_flux_blocks, qw_flux_matrix};
use netflux::lattice::{build_window, LatticeCoord, Window};
use netflux::linalg::{inner, norm, C64, ONE, ZERO};
use netflux::network::{apply_step_dense, ScatteringField, ScatteringParams};
use netflux::path::{side_partition, single_switch_path, validate};
use netflux::walk::{remark_perturbation, LeadProjection, WalkWindow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FULL_T: ScatteringParams = ScatteringParams { q: ONE, r: ZERO, t: ONE };

fn network_model(field: ScatteringField, window: Window) -> NetworkModel {
    let path = single_switch_path(&window, 0.9).unwrap();
    let part = side_partition(&validate(&path, &window).unwrap(), &window).unwrap();
    let blocks = cc_flux_blocks(&field, &part, &window).unwrap();
    NetworkModel::new(field, window, &part, blocks).unwrap()
}

/// t = 1 left of the line a = 0 and r = 1 on the right.
fn interface_field(window: &Window) -> ScatteringField {
    let mut f = ScatteringField::constant(ScatteringParams::IDENTITY);
    for &z in window.kagome_vertices.iter().filter(|z| z.a < 0) {
        f.set(z, FULL_T);
    }
    f
}

#[test]
fn interface_channel_crosses_the_path_ballistically() {
    let window = build_window(8).unwrap();
    let model = network_model(interface_field(&window), window);
    let trace = evolve(&model, &model.basis(LatticeCoord::new(-3, 69)).unwrap(), 72).unwrap();
    assert!(trace.telescoping_residual <= 1e-12);
    assert!(trace.norm_drift <= 1e-12);
    let p: Vec<f64> = trace.rows.iter().map(|r| r.p_expect).collect();
    assert_eq!(p[0], 1.0);
    assert_eq!(*p.last().unwrap(), 0.0);
    assert_eq!(p.windows(2).filter(|w| w[0] != w[1]).count(), 1);
    let flux_total: f64 = trace.rows.iter().map(|r| r.flux_expect).sum();
    assert!((flux_total + 1.0).abs() < 1e-12);
    for w in trace.rows.windows(7) {
        assert!((w[6].mean_x - w[0].mean_x - 0.5).abs() < 1e-12);
    }
}

fn return_time(field: ScatteringField, start: LatticeCoord) -> usize {
    let window = build_window(3).unwrap();
    let mut psi = vec![ZERO; window.num_ruby()];
    let i = window.ruby_index(start).unwrap();
    psi[i] = ONE;
    (1..=12)
        .find(|_| {
            psi = apply_step_dense(&field, &window, &psi, false).unwrap();
            psi[i].norm() == 1.0
        })
        .unwrap()
}

#[test]
fn pure_fields_circulate_around_faces() {
    let start = LatticeCoord::new(-3, -3);
    assert_eq!(return_time(ScatteringField::constant(FULL_T), start), 6);
    assert_eq!(return_time(ScatteringField::constant(ScatteringParams::IDENTITY), start), 3);
}

fn remark_window() -> WalkWindow {
    WalkWindow::new(-9, 9, -6, 5).unwrap()
}

#[test]
fn remark_second_vector_sits_on_row_zero_sites() {
    let window = remark_window();
    let lead = LeadProjection::default();
    let probe = window.basis((-1, -1), 1).unwrap();
    for seed in 1..=5u64 {
        let coins = remark_perturbation(&mut ChaCha8Rng::seed_from_u64(seed));
        let vecs = qw_flux_matrix(&coins, &lead, &window).unwrap().unit_eigenvectors(1.0, 1e-9).unwrap();
        assert_eq!(vecs.len(), 2);
        let overlap: f64 = vecs.iter().map(|v| inner(v, &probe).norm_sqr()).sum();
        assert!((overlap - 1.0).abs() < 1e-9);
        let second = vecs
            .iter()
            .map(|v| {
                let c = inner(&probe, v);
                v.iter().zip(&probe).map(|(a, p)| a - c * p).collect::<Vec<C64>>()
            })
            .max_by(|a, b| norm(a).total_cmp(&norm(b)))
            .unwrap();
        let n = norm(&second);
        let amp = |s, spin| second[window.index(s, spin).unwrap()].norm() / n;
        for (s, spin) in [((-1, 0), 0), ((-1, 0), 1), ((1, 0), 1), ((3, 0), 1)] {
            assert!(amp(s, spin) > 1e-3, "seed {seed} {s:?};{spin}");
        }
        let on_sites: f64 =
            [((-1, 0), 0), ((-1, 0), 1), ((1, 0), 1), ((3, 0), 1)].iter().map(|&(s, sp)| amp(s, sp).powi(2)).sum();
        assert!((on_sites - 1.0).abs() < 1e-9, "seed {seed}: weight {on_sites}");
        // spin + at x = 1, 3 would leave Ran P_perp
        assert!(amp((1, 0), 0) < 1e-12 && amp((3, 0), 0) < 1e-12);
    }
}

#[test]
fn truly_incoming_states_live_on_row_zero() {
    let region = WalkWindow::new(-6, 6, -3, 3).unwrap();
    let lead = LeadProjection::default();
    for seed in 1..=3u64 {
        let coins = remark_perturbation(&mut ChaCha8Rng::seed_from_u64(seed));
        let w = incoming_subspace(&coins, &lead, &region, 12, 1e-9).unwrap();
        assert_eq!(w.len(), 2);
        for v in &w {
            let weight: f64 = v
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let ((x, y), _) = region.site_of(*i);
                    y == 0 && (1..=3).contains(&x)
                })
                .map(|(_, a)| a.norm_sqr())
                .sum();
            assert!((weight - 1.0).abs() < 1e-9, "seed {seed}: weight {weight}");
            assert!(v[region.index((-1, -1), 1).unwrap()].norm() < 1e-9);
        }
    }
}

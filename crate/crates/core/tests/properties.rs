use std::f64::consts::SQRT_2;

use netflux::error::Error;
use netflux::flux::{cc_flux_block, cc_flux_blocks, flux_norms, qw_flux_matrix, spectral_index, FluxBlocks};
use netflux::lattice::{build_window, Window};
use netflux::linalg::{hermitian_eig, matrix_norms, norm, ComplexMatrix, C64, ZERO};
use netflux::network::{apply_step_dense, hadamard_field, ScatteringField, ScatteringParams};
use netflux::path::{
    canonical_path, check_tail_regularity, combinatorial_index, contributing_set, random_path, side_partition,
    single_switch_path, validate, PathShape,
};
use netflux::walk::{
    apply_kernel, decouple_rows, decoupled_coins, fully_decoupled, hs_bound_report, CoinPair, LeadProjection,
    WalkWindow,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn window4() -> &'static Window {
    static W: std::sync::OnceLock<Window> = std::sync::OnceLock::new();
    W.get_or_init(|| build_window(4).unwrap())
}

fn walk_window() -> WalkWindow {
    WalkWindow::new(-9, 9, -6, 5).unwrap()
}

/// Generic coins on a box, decoupled on both lead rows from `k` on.
fn compact_perturbation(seed: u64, k: i64) -> CoinPair {
    let generic = CoinPair::random_box(&mut rng(seed), -8..=8, -4..=4);
    decouple_rows(&generic, Some(k), Some(k))
}

fn random_state(r: &mut ChaCha8Rng, n: usize, allowed: impl Fn(usize) -> bool) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|i| if allowed(i) { C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) } else { ZERO })
        .collect();
    let n = norm(&v);
    v.iter_mut().for_each(|a| *a /= n);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cc_block_squares_below_one_and_commute_with_p(seed in any::<u64>(), pin in any::<[bool; 2]>(), pout in any::<[bool; 2]>()) {
        let s = ScatteringParams::random(&mut rng(seed)).block();
        let b = cc_flux_block(&s, pin, pout);
        for l in hermitian_eig(&b).unwrap().eigenvalues {
            prop_assert!(l.abs() <= 1.0 + 1e-12);
        }
        let sq = &b * &b;
        let f = |x: bool| C64::new(x as u8 as f64, 0.0);
        let d = ComplexMatrix::diagonal(&[f(pin[0]), f(pin[1])]);
        prop_assert!((&(&sq * &d) - &(&d * &sq)).max_abs() < 1e-12);
    }

    #[test]
    fn network_step_is_unitary(seed in any::<u64>()) {
        let w = window4();
        let mut r = rng(seed);
        let default = ScatteringParams::random(&mut r);
        let field = ScatteringField::random(w, &mut r, 0.0, 1.0, default);
        let v = random_state(&mut r, w.num_ruby(), |i| w.is_steppable(w.ruby_vertices[i]));
        let u = apply_step_dense(&field, w, &v, false).unwrap();
        prop_assert!((norm(&u) - 1.0).abs() < 1e-12);
        let back = apply_step_dense(&field, w, &u, true).unwrap();
        prop_assert!(back.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn walk_step_is_unitary(seed in any::<u64>()) {
        let w = WalkWindow::square(5).unwrap();
        let mut r = rng(seed);
        let coins = CoinPair::random_box(&mut r, -5..=5, -5..=5);
        let v = random_state(&mut r, w.dim(), |i| {
            let ((x, y), _) = w.site_of(i);
            x.abs() <= 3 && y.abs() <= 3
        });
        let u = apply_kernel(&coins, &w, &v, false).unwrap();
        prop_assert!((norm(&u) - 1.0).abs() < 1e-12);
        let back = apply_kernel(&coins, &w, &u, true).unwrap();
        prop_assert!(back.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn combinatorial_equals_spectral_on_random_paths(seed in any::<u64>()) {
        let w = window4();
        let mut r = rng(seed);
        let path = random_path(w, &mut r, 8, 200, 0.9);
        prop_assume!(path.is_some());
        let path = path.unwrap();
        let vp = validate(&path, w);
        prop_assume!(vp.is_ok());
        let vp = vp.unwrap();
        let part = side_partition(&vp, w);
        prop_assume!(part.is_ok());
        let part = part.unwrap();
        let field = ScatteringField::random(w, &mut r, 0.1, 0.9, hadamard_field(w).default);
        let cert = combinatorial_index(&vp, &part, &field, w).unwrap();
        let tail = check_tail_regularity(&path, &field, w).unwrap();
        let blocks = cc_flux_blocks(&field, &part, w).unwrap().with_tail(tail);
        let spec = spectral_index(&blocks, 1e-8).unwrap();
        prop_assert_eq!(cert.index, spec.index);
    }

    #[test]
    fn r_path_blocks_square_to_r_modulus(seed in any::<u64>()) {
        let w = window4();
        let mut r = rng(seed);
        let field = ScatteringField::random(w, &mut r, 0.0, 1.0, ScatteringParams::with_modulus(0.3).unwrap());
        let path = canonical_path(PathShape::RPath, w, netflux::lattice::LatticeCoord::new(0, 0), 0.5).unwrap();
        let vp = validate(&path, w).unwrap();
        let part = side_partition(&vp, w).unwrap();
        let blocks = cc_flux_blocks(&field, &part, w).unwrap();
        for z in contributing_set(&vp) {
            let b = &blocks.blocks[&z];
            let r2 = field.get(z).r.norm_sqr();
            let sq = b * b;
            prop_assert!((&sq - &ComplexMatrix::diagonal(&[C64::new(r2, 0.0), C64::new(r2, 0.0)])).max_abs() < 1e-12);
        }
        let (op, tr) = flux_norms(&blocks.with_tail(0.0)).unwrap();
        let rs: Vec<f64> = contributing_set(&vp).into_iter().map(|z| field.get(z).r.norm()).collect();
        prop_assert!((op - rs.iter().copied().fold(0.0, f64::max)).abs() < 1e-10);
        prop_assert!((tr - 2.0 * rs.iter().sum::<f64>()).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn walk_flux_is_bounded_and_commutes(seed in any::<u64>(), k in 1i64..6) {
        let lead = LeadProjection::default();
        let flux = qw_flux_matrix(&compact_perturbation(seed, k), &lead, &walk_window()).unwrap();
        prop_assert!(flux.boundary_residual < 1e-14);
        for l in hermitian_eig(&flux.matrix).unwrap().eigenvalues {
            prop_assert!(l.abs() <= 1.0 + 1e-12);
        }
        prop_assert!(flux.commutator_defect(&lead) < 1e-12);
    }

    #[test]
    fn walk_flux_trace_equals_index(seed in any::<u64>(), k in 1i64..6) {
        let lead = LeadProjection::default();
        let flux = qw_flux_matrix(&compact_perturbation(seed, k), &lead, &walk_window()).unwrap();
        let spec = spectral_index(&flux, 1e-9).unwrap();
        prop_assert_eq!(spec.index, 2);
        prop_assert!((flux.matrix.trace().re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn trace_norm_distance_bounded_by_hs_weights(seed in any::<u64>(), k in 1i64..7) {
        let lead = LeadProjection::default();
        let coins = compact_perturbation(seed, k);
        let window = WalkWindow::new(-9, 14, -6, 5).unwrap();
        let f = qw_flux_matrix(&coins, &lead, &window).unwrap();
        let f0 = qw_flux_matrix(&decoupled_coins(&coins), &lead, &window).unwrap();
        prop_assert!(f.boundary_residual < 1e-14 && f0.boundary_residual < 1e-14);
        let (_, tr) = matrix_norms(&(&f.matrix - &f0.matrix)).unwrap();
        let report = hs_bound_report(&coins, 0, 12);
        prop_assert!(report.all_bounds_hold);
        prop_assert!(tr <= 4.0 * SQRT_2 * report.partial_sums.last().unwrap() + 1e-12);
    }

    #[test]
    fn decoupled_rows_are_invariant(seed in any::<u64>()) {
        let w = WalkWindow::square(6).unwrap();
        let coins = fully_decoupled(&CoinPair::random_box(&mut rng(seed), -6..=6, -6..=6));
        for x in -4..=4 {
            for (y, spin) in [(0, 0), (-1, 1)] {
                let u = apply_kernel(&coins, &w, &w.basis((x, y), spin).unwrap(), false).unwrap();
                let leak: f64 = u.iter().enumerate().filter(|(i, _)| {
                    let ((_, yy), s) = w.site_of(*i);
                    !((yy == 0 && s == 0) || (yy == -1 && s == 1))
                }).map(|(_, a)| a.norm_sqr()).sum();
                prop_assert!(leak < 1e-24);
            }
        }
        let again = decoupled_coins(&decoupled_coins(&coins));
        for x in -6..=6 {
            for y in -2..=1 {
                let (a, b) = (again.c1.get((x, y)).block(), decoupled_coins(&coins).c1.get((x, y)).block());
                prop_assert!((&a - &b).max_abs() == 0.0);
            }
        }
    }
}

#[test]
fn network_flux_with_tails_is_not_trace_class() {
    let w = window4();
    let field = hadamard_field(w);
    let path = single_switch_path(w, 0.9).unwrap();
    let vp = validate(&path, w).unwrap();
    let part = side_partition(&vp, w).unwrap();
    let tail = check_tail_regularity(&path, &field, w).unwrap();
    let blocks: FluxBlocks = cc_flux_blocks(&field, &part, w).unwrap().with_tail(tail);
    assert!(matches!(flux_norms(&blocks), Err(Error::UnboundedSum)));
}

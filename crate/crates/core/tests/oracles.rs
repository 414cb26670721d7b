//! Independent oracles for derived quantities.

use netflux::flux::{cc_flux_block, count_unit_eigenvalues};
use netflux::lattice::{
    build_window, cross, head_of, io_pairs, link_for_edge, scattering_edges, tail_of, LatticeCoord, WeightClass, Window,
};
use netflux::linalg::{hermitian_eig, singular_values, ComplexMatrix, C64};
use netflux::network::{hadamard_field, ScatteringParams};
use netflux::path::{
    canonical_path, side_partition, single_switch_path, validate, AdmissiblePath, PathShape, SidePartition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type M4 = [[C64; 4]; 4];

fn mul4(a: &M4, b: &M4) -> M4 {
    let mut c = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Characteristic polynomial coefficients (monic, highest first) by Faddeev-LeVerrier.
fn char_poly(a: &M4) -> [C64; 5] {
    let mut coeffs = [C64::new(0.0, 0.0); 5];
    coeffs[0] = C64::new(1.0, 0.0);
    let mut m = [[C64::new(0.0, 0.0); 4]; 4];
    for k in 1..=4 {
        let mut am = mul4(a, &m);
        for i in 0..4 {
            am[i][i] += coeffs[k - 1];
        }
        m = am;
        let t: C64 = (0..4).map(|i| mul4(a, &m)[i][i]).sum();
        coeffs[k] = -t / k as f64;
    }
    coeffs
}

fn durand_kerner(c: &[C64; 5]) -> Vec<C64> {
    let p = |z: C64| c.iter().fold(C64::new(0.0, 0.0), |acc, &k| acc * z + k);
    let seed = C64::new(0.4, 0.9);
    let mut roots: Vec<C64> = (0..4).map(|k| seed.powu(k as u32) * 3.0).collect();
    for _ in 0..2000 {
        for i in 0..4 {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = p(roots[i]) / den;
            roots[i] -= step;
        }
    }
    roots
}

#[test]
fn hermitian_eig_matches_characteristic_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let mut a = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            a[i][i] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in i + 1..4 {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[i][j] = z;
                a[j][i] = z.conj();
            }
        }
        let mut roots: Vec<f64> = durand_kerner(&char_poly(&a))
            .into_iter()
            .map(|z| {
                assert!(z.im.abs() < 1e-8, "complex root {z}");
                z.re
            })
            .collect();
        roots.sort_by(f64::total_cmp);
        let m = ComplexMatrix::from_fn(4, 4, |i, j| a[i][j]);
        let e = hermitian_eig(&m).unwrap();
        for (x, y) in roots.iter().zip(&e.eigenvalues) {
            assert!((x - y).abs() < 1e-9, "{roots:?} vs {:?}", e.eigenvalues);
        }
    }
}

#[test]
fn singular_values_of_diagonal_times_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let d: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..2.0)).collect();
        let u = ScatteringParams::random(&mut rng).block();
        let m = &ComplexMatrix::diagonal(&[C64::new(d[0], 0.0), C64::new(d[1], 0.0)]) * &u;
        let mut want = d.clone();
        want.sort_by(|a, b| b.total_cmp(a));
        let got = singular_values(&m);
        assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
    }
}

/// The non-rectangle face beside a Ruby edge, from the Kagome corner angle at `via`:
/// a 60 degree corner closes a triangle with centroid `(z + u + w) / 3`, a 120
/// degree corner a hexagon with center `u + w - z`.
#[test]
fn link_faces_match_corner_geometry() {
    let window = build_window(2).unwrap();
    for &z in &window.kagome_vertices {
        for e in scattering_edges(z).unwrap() {
            let u = tail_of(e.source).unwrap();
            let w = head_of(e.target).unwrap();
            let (ux, uy) = (u - z).plane();
            let (wx, wy) = (w - z).plane();
            let cos = (ux * wx + uy * wy) / ((ux * ux + uy * uy).sqrt() * (wx * wx + wy * wy).sqrt());
            let want = if (cos - 0.5).abs() < 1e-12 {
                assert_eq!(e.weight_class, WeightClass::R, "60 degree corner at {z}");
                let s = z + u + w;
                assert!(s.a % 3 == 0 && s.b % 3 == 0);
                LatticeCoord::new(s.a / 3, s.b / 3)
            } else {
                assert!((cos + 0.5).abs() < 1e-12, "corner at {z} has cos {cos}");
                assert_eq!(e.weight_class, WeightClass::T, "120 degree corner at {z}");
                u + w - z
            };
            assert_eq!(link_for_edge(&e).face_b, want, "edge {} -> {}", e.source, e.target);
        }
    }
}

/// PLUS membership from ray casting against the polygon closed by extending
/// both ends of the path far along its mean direction and returning on the left.
fn polygon_oracle(path: &AdmissiblePath, x: LatticeCoord) -> bool {
    let pts: Vec<(f64, f64)> = path.centers.iter().map(|c| c.plane()).collect();
    let (f, l) = (pts[0], pts[pts.len() - 1]);
    let (dx, dy) = (l.0 - f.0, l.1 - f.1);
    let n = (dx * dx + dy * dy).sqrt();
    let (dx, dy) = (dx / n * 1e3, dy / n * 1e3);
    let mut poly = vec![(f.0 - dx, f.1 - dy)];
    poly.extend(&pts);
    poly.push((l.0 + dx, l.1 + dy));
    poly.push((l.0 + dx - dy, l.1 + dy + dx));
    poly.push((f.0 - dx - dy, f.1 - dy + dx));
    let (px, py) = x.plane();
    let mut inside = false;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if (a.1 > py) != (b.1 > py) && px < a.0 + (py - a.1) * (b.0 - a.0) / (b.1 - a.1) {
            inside = !inside;
        }
    }
    inside
}

fn partition(path: &AdmissiblePath, window: &Window) -> SidePartition {
    side_partition(&validate(path, window).unwrap(), window).unwrap()
}

#[test]
fn canonical_partitions_match_polygon_oracle() {
    let window = build_window(4).unwrap();
    for shape in [PathShape::RPath, PathShape::TPath, PathShape::SingleSwitch, PathShape::TripleSwitch] {
        for shift in [LatticeCoord::new(0, 0), LatticeCoord::new(12, 12), LatticeCoord::new(-12, 0)] {
            let path = canonical_path(shape, &window, shift, 0.9).unwrap();
            let part = partition(&path, &window);
            for &x in &window.ruby_vertices {
                assert_eq!(part.is_plus(x).unwrap(), polygon_oracle(&path, x), "{shape:?} {shift} at {x}");
            }
        }
    }
}

#[test]
fn parallel_paths_bound_a_strip() {
    let window = build_window(4).unwrap();
    let low = canonical_path(PathShape::RPath, &window, LatticeCoord::new(0, 0), 0.9).unwrap();
    let high = canonical_path(PathShape::RPath, &window, LatticeCoord::new(-12, 12), 0.9).unwrap();
    let (pl, ph) = (partition(&low, &window), partition(&high, &window));
    let strip: Vec<LatticeCoord> =
        window.ruby_vertices.iter().copied().filter(|&x| pl.is_plus(x).unwrap() != ph.is_plus(x).unwrap()).collect();
    assert!(!strip.is_empty());
    for &x in &window.ruby_vertices {
        let between = polygon_oracle(&low, x) && !polygon_oracle(&high, x);
        assert_eq!(strip.contains(&x), between, "{x}");
    }
    // the strip projection has flux blocks differing by the two path fluxes, with index 0
    let field = hadamard_field(&window);
    let mut spectrum = Vec::new();
    for &z in &window.kagome_vertices {
        let io = io_pairs(z).unwrap();
        let inside = |x: LatticeCoord| strip.contains(&x);
        let b = cc_flux_block(&field.get(z).block(), io.incoming.map(inside), io.outgoing.map(inside));
        spectrum.extend(hermitian_eig(&b).unwrap().eigenvalues);
    }
    assert_eq!(count_unit_eigenvalues(&spectrum, 0.0, 1e-8).unwrap().index, 0);
}

#[test]
fn seeding_rule_matches_cross_sign() {
    let window = build_window(3).unwrap();
    let path = single_switch_path(&window, 0.9).unwrap();
    let vp = validate(&path, &window).unwrap();
    let part = side_partition(&vp, &window).unwrap();
    for b in &vp.bisected {
        let (c0, c1) = (path.centers[b.index], path.centers[b.index + 1]);
        for p in [b.link.bisects.source, b.link.bisects.target] {
            let left = cross(c1 - c0, p * 2 - (c0 + c1)) > 0;
            assert_eq!(part.is_plus(p).unwrap(), left);
        }
    }
}

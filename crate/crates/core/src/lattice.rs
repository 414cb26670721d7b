//! Exact integer geometry of the Kagome graph, the Ruby graph and its dual.
//!
//! A [`LatticeCoord`] `(a, b)` denotes the plane point `(a v1 + b v2) / 12`
//! with `v1 = e^{i pi/3}` and `v2 = e^{i 2 pi/3}`. Residues mod 12 classify
//! every point of interest: Kagome vertices (three sublattices), Ruby vertices
//! (midpoints of Kagome edges) and the centers of the triangle and hexagon
//! faces. Rectangle faces of the Ruby graph are centered on Kagome vertices.
//!
//! Kagome edges run anticlockwise around hexagons and clockwise around
//! triangles. A Ruby vertex is *incoming* to the head of its Kagome edge and
//! *outgoing* from its tail.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCoord {
    pub a: i64,
    pub b: i64,
}

impl LatticeCoord {
    pub const fn new(a: i64, b: i64) -> Self {
        LatticeCoord { a, b }
    }

    pub fn residue(self) -> (i64, i64) {
        (self.a.rem_euclid(12), self.b.rem_euclid(12))
    }

    /// Cartesian position in the plane.
    pub fn plane(self) -> (f64, f64) {
        let a = self.a as f64;
        let b = self.b as f64;
        ((a - b) / 24.0, 3f64.sqrt() * (a + b) / 24.0)
    }
}

impl fmt::Display for LatticeCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.a, self.b)
    }
}

impl Add for LatticeCoord {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        LatticeCoord::new(self.a + o.a, self.b + o.b)
    }
}

impl Sub for LatticeCoord {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        LatticeCoord::new(self.a - o.a, self.b - o.b)
    }
}

impl Neg for LatticeCoord {
    type Output = Self;
    fn neg(self) -> Self {
        LatticeCoord::new(-self.a, -self.b)
    }
}

impl Mul<i64> for LatticeCoord {
    type Output = Self;
    fn mul(self, k: i64) -> Self {
        LatticeCoord::new(self.a * k, self.b * k)
    }
}

const fn lc(a: i64, b: i64) -> LatticeCoord {
    LatticeCoord::new(a, b)
}

/// Oriented area sign of `(u, w)`; positive when `w` is anticlockwise of `u`.
/// The basis `(v1, v2)` is positively oriented, so the integer determinant
/// has the sign of the planar cross product.
pub fn cross(u: LatticeCoord, w: LatticeCoord) -> i64 {
    u.a * w.b - u.b * w.a
}

/// Planar dot product scaled by 2 (`v1.v1 = v2.v2 = 1`, `v1.v2 = 1/2`).
pub fn dot2(u: LatticeCoord, w: LatticeCoord) -> i64 {
    2 * u.a * w.a + 2 * u.b * w.b + u.a * w.b + u.b * w.a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteClass {
    K1,
    K2,
    K3,
    RubyVertex,
    TriangleCenter,
    HexagonCenter,
}

impl SiteClass {
    pub fn is_kagome(self) -> bool {
        matches!(self, SiteClass::K1 | SiteClass::K2 | SiteClass::K3)
    }
}

pub fn classify(c: LatticeCoord) -> Result<SiteClass> {
    use SiteClass::*;
    Ok(match c.residue() {
        (0, 0) => K1,
        (6, 0) => K2,
        (0, 6) => K3,
        (3, 0) | (9, 0) | (0, 3) | (0, 9) | (3, 3) | (9, 9) => RubyVertex,
        (2, 2) | (10, 10) => TriangleCenter,
        (6, 6) => HexagonCenter,
        _ => return Err(Error::NotALatticePoint { a: c.a, b: c.b }),
    })
}

pub fn is_kagome(c: LatticeCoord) -> bool {
    classify(c).is_ok_and(SiteClass::is_kagome)
}

pub fn is_ruby(c: LatticeCoord) -> bool {
    matches!(classify(c), Ok(SiteClass::RubyVertex))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightClass {
    R,
    T,
}

/// Incoming and outgoing Ruby vertices of a Kagome vertex. `outgoing[0]` is
/// the class-R target of `incoming[0]`, and `outgoing[1]` that of `incoming[1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IoPairs {
    pub incoming: [LatticeCoord; 2],
    pub outgoing: [LatticeCoord; 2],
}

pub fn io_pairs(z: LatticeCoord) -> Result<IoPairs> {
    let (inc, out) = match classify(z)? {
        SiteClass::K1 => (lc(3, 0), lc(0, 3)),
        SiteClass::K2 => (lc(3, -3), lc(3, 0)),
        // the K3 incoming pair is ordered (z - (0,3), z + (0,3))
        SiteClass::K3 => (lc(0, -3), lc(3, -3)),
        _ => return Err(Error::NotKagome { a: z.a, b: z.b }),
    };
    Ok(IoPairs { incoming: [z + inc, z - inc], outgoing: [z + out, z - out] })
}

/// Weight class of the turn `source -> via -> target`: class R for a turn of
/// -120 degrees, class T for +60 degrees.
pub fn turn_class(source: LatticeCoord, via: LatticeCoord, target: LatticeCoord) -> Option<WeightClass> {
    let h1 = via - source;
    let h2 = target - via;
    match (cross(h1, h2).signum(), dot2(h1, h2).signum()) {
        (-1, -1) => Some(WeightClass::R),
        (1, 1) => Some(WeightClass::T),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RubyEdge {
    pub source: LatticeCoord,
    pub target: LatticeCoord,
    pub via: LatticeCoord,
    pub weight_class: WeightClass,
}

impl RubyEdge {
    /// Twice the edge midpoint.
    pub fn midpoint2(&self) -> LatticeCoord {
        self.source + self.target
    }
}

/// The four directed edges at `z`, ordered `x1->y1, x1->y2, x2->y1, x2->y2`.
pub fn scattering_edges(z: LatticeCoord) -> Result<[RubyEdge; 4]> {
    let io = io_pairs(z)?;
    let mk = |i: usize, j: usize| {
        let (s, t) = (io.incoming[i], io.outgoing[j]);
        let weight_class = turn_class(s, z, t).expect("every Kagome turn is +60 or -120 degrees");
        RubyEdge { source: s, target: t, via: z, weight_class }
    };
    Ok([mk(0, 0), mk(0, 1), mk(1, 0), mk(1, 1)])
}

/// Kagome vertex that `x` is incoming to.
pub fn head_of(x: LatticeCoord) -> Result<LatticeCoord> {
    ruby_endpoints(x).map(|(_, head)| head)
}

/// Kagome vertex that `x` is outgoing from.
pub fn tail_of(x: LatticeCoord) -> Result<LatticeCoord> {
    ruby_endpoints(x).map(|(tail, _)| tail)
}

fn ruby_endpoints(x: LatticeCoord) -> Result<(LatticeCoord, LatticeCoord)> {
    let half = match x.residue() {
        (3, 0) | (9, 0) => lc(3, 0),
        (0, 3) | (0, 9) => lc(0, 3),
        (3, 3) | (9, 9) => lc(3, -3),
        _ => return Err(Error::NotRuby { a: x.a, b: x.b }),
    };
    let (p, q) = (x + half, x - half);
    if io_pairs(p)?.incoming.contains(&x) {
        Ok((q, p))
    } else {
        Ok((p, q))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceKind {
    Rectangle,
    Triangle,
    Hexagon,
}

pub fn face_kind(c: LatticeCoord) -> Option<FaceKind> {
    match classify(c).ok()? {
        SiteClass::K1 | SiteClass::K2 | SiteClass::K3 => Some(FaceKind::Rectangle),
        SiteClass::TriangleCenter => Some(FaceKind::Triangle),
        SiteClass::HexagonCenter => Some(FaceKind::Hexagon),
        SiteClass::RubyVertex => None,
    }
}

/// Ruby vertices on the boundary of the face centered at `c`.
pub fn face_corners(c: LatticeCoord) -> Result<Vec<LatticeCoord>> {
    let offsets: &[(i64, i64)] = match classify(c)? {
        SiteClass::TriangleCenter if c.residue() == (2, 2) => &[(1, -2), (-2, 1), (1, 1)],
        SiteClass::TriangleCenter => &[(-1, 2), (2, -1), (-1, -1)],
        SiteClass::HexagonCenter => &[(3, 3), (-3, 6), (-6, 3), (-3, -3), (3, -6), (6, -3)],
        k if k.is_kagome() => {
            let io = io_pairs(c)?;
            return Ok(vec![io.incoming[0], io.outgoing[0], io.incoming[1], io.outgoing[1]]);
        }
        _ => return Err(Error::NotALatticePoint { a: c.a, b: c.b }),
    };
    Ok(offsets.iter().map(|&(a, b)| c + lc(a, b)).collect())
}

/// A dual-graph link: joins the rectangle center `face_a` to the adjacent
/// triangle or hexagon center `face_b` across the edge `bisects`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DualLink {
    pub face_a: LatticeCoord,
    pub face_b: LatticeCoord,
    pub bisects: RubyEdge,
}

pub fn link_for_edge(e: &RubyEdge) -> DualLink {
    // the other face center lies on the ray from `via` through the edge midpoint:
    // at 4/3 of the way for short (class R) sides, 4 times for long (class T) sides
    let d = e.midpoint2() - e.via * 2;
    let other = match e.weight_class {
        WeightClass::R => {
            debug_assert!(d.a % 3 == 0 && d.b % 3 == 0);
            e.via + lc(2 * d.a / 3, 2 * d.b / 3)
        }
        WeightClass::T => e.via + d * 2,
    };
    DualLink { face_a: e.via, face_b: other, bisects: *e }
}

/// Dual-graph neighbors of a face center, with the Ruby edge each link bisects.
pub fn dual_neighbors(c: LatticeCoord) -> Result<Vec<(LatticeCoord, RubyEdge)>> {
    match face_kind(c) {
        Some(FaceKind::Rectangle) => Ok(scattering_edges(c)?.iter().map(|e| (link_for_edge(e).face_b, *e)).collect()),
        Some(_) => {
            let mut rects = BTreeSet::new();
            for x in face_corners(c)? {
                let (t, h) = ruby_endpoints(x)?;
                rects.insert(t);
                rects.insert(h);
            }
            let mut out = Vec::new();
            for z in rects {
                for e in scattering_edges(z)? {
                    if link_for_edge(&e).face_b == c {
                        out.push((z, e));
                    }
                }
            }
            Ok(out)
        }
        None => Err(Error::NotALatticePoint { a: c.a, b: c.b }),
    }
}

/// The Ruby edge bisected by the link between two face centers, if they are adjacent.
pub fn link_between(c1: LatticeCoord, c2: LatticeCoord) -> Option<RubyEdge> {
    let (rect, other) = match (face_kind(c1)?, face_kind(c2)?) {
        (FaceKind::Rectangle, FaceKind::Rectangle) => return None,
        (FaceKind::Rectangle, _) => (c1, c2),
        (_, FaceKind::Rectangle) => (c2, c1),
        _ => return None,
    };
    scattering_edges(rect).ok()?.into_iter().find(|e| link_for_edge(e).face_b == other)
}

/// Finite truncation: the Kagome vertices of the unit cells `|i|, |j| <= radius`
/// together with all their incoming and outgoing Ruby vertices.
#[derive(Clone, Debug)]
pub struct Window {
    pub radius: i64,
    pub kagome_vertices: Vec<LatticeCoord>,
    pub ruby_vertices: Vec<LatticeCoord>,
    kagome_index: HashMap<LatticeCoord, usize>,
    ruby_index: HashMap<LatticeCoord, usize>,
}

pub fn build_window(radius: i64) -> Result<Window> {
    if radius < 1 {
        return Err(Error::BadRadius(radius));
    }
    let mut kagome = Vec::new();
    for i in -radius..=radius {
        for j in -radius..=radius {
            let base = lc(12 * i, 12 * j);
            kagome.extend([base, base + lc(6, 0), base + lc(0, 6)]);
        }
    }
    kagome.sort();
    let mut ruby = BTreeSet::new();
    for &z in &kagome {
        let io = io_pairs(z)?;
        ruby.extend(io.incoming);
        ruby.extend(io.outgoing);
    }
    let ruby: Vec<_> = ruby.into_iter().collect();
    let kagome_index = kagome.iter().enumerate().map(|(i, &z)| (z, i)).collect();
    let ruby_index = ruby.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    Ok(Window { radius, kagome_vertices: kagome, ruby_vertices: ruby, kagome_index, ruby_index })
}

impl Window {
    pub fn contains_kagome(&self, z: LatticeCoord) -> bool {
        self.kagome_index.contains_key(&z)
    }

    pub fn kagome_index(&self, z: LatticeCoord) -> Option<usize> {
        self.kagome_index.get(&z).copied()
    }

    pub fn ruby_index(&self, x: LatticeCoord) -> Option<usize> {
        self.ruby_index.get(&x).copied()
    }

    pub fn num_ruby(&self) -> usize {
        self.ruby_vertices.len()
    }

    /// Ruby vertex whose head lies in the window, so one step can be applied to it.
    pub fn is_steppable(&self, x: LatticeCoord) -> bool {
        head_of(x).is_ok_and(|z| self.contains_kagome(z))
    }

    pub fn edges(&self) -> impl Iterator<Item = RubyEdge> + '_ {
        self.kagome_vertices.iter().flat_map(|&z| scattering_edges(z).expect("window holds Kagome vertices"))
    }

    /// A triangle or hexagon center with some sides inside the window and some outside.
    pub fn is_open_face(&self, f: LatticeCoord) -> bool {
        match face_kind(f) {
            Some(FaceKind::Triangle | FaceKind::Hexagon) => {
                let rects: Vec<_> = dual_neighbors(f).unwrap_or_default().into_iter().map(|(z, _)| z).collect();
                let inside = rects.iter().filter(|z| self.contains_kagome(**z)).count();
                inside > 0 && inside < rects.len()
            }
            _ => false,
        }
    }

    /// Unit cell translations (in twelfths) that keep the window's Kagome set.
    pub fn cell_of(z: LatticeCoord) -> (i64, i64) {
        (z.a.div_euclid(12), z.b.div_euclid(12))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(lc(0, 0)).unwrap(), SiteClass::K1);
        assert_eq!(classify(lc(3, 0)).unwrap(), SiteClass::RubyVertex);
        assert_eq!(classify(lc(-6, 12)).unwrap(), SiteClass::K2);
        assert!(matches!(classify(lc(1, 0)), Err(Error::NotALatticePoint { .. })));
    }

    #[test]
    fn triangle_center_is_centroid_of_its_corners() {
        // triangle (0,0),(6,0),(0,6): ruby corners are the midpoints of its sides
        let corners = [lc(3, 0), lc(0, 3), lc(3, 3)];
        let sum = corners.iter().fold(lc(0, 0), |s, &c| s + c);
        assert_eq!((sum.a % 3, sum.b % 3), (0, 0));
        let centroid = lc(sum.a / 3, sum.b / 3);
        assert_eq!(centroid, lc(2, 2));
        assert_eq!(classify(centroid).unwrap(), SiteClass::TriangleCenter);
    }

    #[test]
    fn io_pair_examples() {
        let k1 = io_pairs(lc(0, 0)).unwrap();
        assert_eq!(k1.incoming, [lc(3, 0), lc(-3, 0)]);
        let k2 = io_pairs(lc(6, 0)).unwrap();
        let inc: BTreeSet<_> = k2.incoming.iter().map(|x| x.residue()).collect();
        assert_eq!(inc, BTreeSet::from([(9, 9), (3, 3)]));
        let k3 = io_pairs(lc(0, 6)).unwrap();
        assert_eq!(BTreeSet::from(k3.outgoing), BTreeSet::from([lc(3, 3), lc(-3, 9)]));
        assert!(matches!(io_pairs(lc(3, 0)), Err(Error::NotKagome { .. })));
    }

    #[test]
    fn flow_consistency_on_patch() {
        // every Ruby vertex of a 3x3-cell patch is incoming to exactly one and
        // outgoing from exactly one Kagome vertex
        let mut inc: HashMap<LatticeCoord, usize> = HashMap::new();
        let mut out: HashMap<LatticeCoord, usize> = HashMap::new();
        for i in -3..=3 {
            for j in -3..=3 {
                for off in [lc(0, 0), lc(6, 0), lc(0, 6)] {
                    let io = io_pairs(lc(12 * i, 12 * j) + off).unwrap();
                    for x in io.incoming {
                        *inc.entry(x).or_default() += 1;
                    }
                    for x in io.outgoing {
                        *out.entry(x).or_default() += 1;
                    }
                }
            }
        }
        for i in -1..=1 {
            for j in -1..=1 {
                for r in [(3, 0), (9, 0), (0, 3), (0, 9), (3, 3), (9, 9)] {
                    let x = lc(12 * i + r.0, 12 * j + r.1);
                    assert_eq!(inc.get(&x), Some(&1), "incoming count of {x}");
                    assert_eq!(out.get(&x), Some(&1), "outgoing count of {x}");
                    assert!(io_pairs(head_of(x).unwrap()).unwrap().incoming.contains(&x));
                    assert!(io_pairs(tail_of(x).unwrap()).unwrap().outgoing.contains(&x));
                }
            }
        }
    }

    #[test]
    fn weight_class_examples() {
        let e = scattering_edges(lc(0, 0)).unwrap();
        let find = |s, t| e.iter().find(|x| x.source == s && x.target == t).unwrap().weight_class;
        assert_eq!(find(lc(3, 0), lc(0, 3)), WeightClass::R);
        assert_eq!(find(lc(3, 0), lc(0, -3)), WeightClass::T);
        let e = scattering_edges(lc(0, 6)).unwrap();
        let r = e.iter().find(|x| x.source == lc(0, 3) && x.target == lc(3, 3)).unwrap();
        assert_eq!(r.weight_class, WeightClass::R);
    }

    #[test]
    fn turn_rule_totality_and_basis_convention() {
        for z in build_window(2).unwrap().kagome_vertices {
            let e = scattering_edges(z).unwrap();
            let classes: Vec<_> = e.iter().map(|x| x.weight_class).collect();
            assert_eq!(classes, vec![WeightClass::R, WeightClass::T, WeightClass::T, WeightClass::R], "at {z}");
        }
    }

    #[test]
    fn links_match_face_incidence() {
        // oracle: the bisected edge's endpoints are corners of both faces of the link
        for z in build_window(1).unwrap().kagome_vertices {
            for e in scattering_edges(z).unwrap() {
                let link = link_for_edge(&e);
                assert_eq!(link.face_a, z);
                let corners = face_corners(link.face_b).unwrap();
                assert!(corners.contains(&e.source) && corners.contains(&e.target), "{e:?}");
                let kind = face_kind(link.face_b).unwrap();
                let expected = if e.weight_class == WeightClass::R { FaceKind::Triangle } else { FaceKind::Hexagon };
                assert_eq!(kind, expected);
            }
        }
    }

    #[test]
    fn dual_links_are_injective_over_window() {
        let w = build_window(2).unwrap();
        let mut seen = BTreeSet::new();
        let mut count = 0;
        for e in w.edges() {
            let l = link_for_edge(&e);
            assert!(seen.insert((l.face_a, l.face_b)));
            count += 1;
        }
        assert_eq!(count, 4 * w.kagome_vertices.len());
    }

    #[test]
    fn dual_degrees() {
        assert_eq!(dual_neighbors(lc(0, 0)).unwrap().len(), 4);
        assert_eq!(dual_neighbors(lc(2, 2)).unwrap().len(), 3);
        assert_eq!(dual_neighbors(lc(6, 6)).unwrap().len(), 6);
        assert!(link_between(lc(0, 0), lc(2, 2)).is_some());
        assert!(link_between(lc(0, 0), lc(6, -6)).is_some());
        assert!(link_between(lc(0, 0), lc(6, 6)).is_none());
    }

    #[test]
    fn per_cell_counts_and_euler() {
        let mut counts: HashMap<&str, i64> = HashMap::new();
        for a in 0..12 {
            for b in 0..12 {
                let key = match classify(lc(a, b)) {
                    Ok(k) if k.is_kagome() => "kagome",
                    Ok(SiteClass::RubyVertex) => "ruby",
                    Ok(SiteClass::TriangleCenter) => "triangle",
                    Ok(SiteClass::HexagonCenter) => "hexagon",
                    _ => continue,
                };
                *counts.entry(key).or_default() += 1;
            }
        }
        assert_eq!(counts["kagome"], 3);
        assert_eq!(counts["ruby"], 6);
        assert_eq!(counts["triangle"], 2);
        assert_eq!(counts["hexagon"], 1);
        let vertices = counts["ruby"];
        let edges = 4 * counts["kagome"];
        let faces = counts["kagome"] + counts["triangle"] + counts["hexagon"];
        assert_eq!(vertices - edges + faces, 0);
    }

    #[test]
    fn window_closure_and_nesting() {
        let w2 = build_window(2).unwrap();
        let w3 = build_window(3).unwrap();
        assert_eq!(w2.kagome_vertices.len(), 3 * 25);
        for &z in &w2.kagome_vertices {
            let io = io_pairs(z).unwrap();
            for x in io.incoming.iter().chain(&io.outgoing) {
                assert!(w2.ruby_index(*x).is_some());
            }
            assert!(w3.contains_kagome(z));
        }
        for &x in &w2.ruby_vertices {
            assert!(w3.ruby_index(x).is_some());
        }
        assert!(w2.kagome_vertices.windows(2).all(|p| p[0] < p[1]));
        assert!(matches!(build_window(0), Err(Error::BadRadius(0))));
    }
}

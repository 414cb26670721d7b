//! Admissible paths in the dual graph, the side partition they induce on the
//! Ruby vertices, and the combinatorial index.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    cross, dual_neighbors, face_kind, io_pairs, link_between, link_for_edge, DualLink, FaceKind, LatticeCoord,
    WeightClass, Window,
};
use crate::network::ScatteringField;

/// Declared class of the infinite continuation beyond the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TailTag {
    #[serde(rename = "R_PATH")]
    RPath,
    #[serde(rename = "T_PATH")]
    TPath,
}

impl TailTag {
    pub fn class(self) -> WeightClass {
        match self {
            TailTag::RPath => WeightClass::R,
            TailTag::TPath => WeightClass::T,
        }
    }

    pub fn from_class(c: WeightClass) -> Self {
        match c {
            WeightClass::R => TailTag::RPath,
            WeightClass::T => TailTag::TPath,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePath {
    pub centers: Vec<LatticeCoord>,
    pub left_tail: TailTag,
    pub right_tail: TailTag,
    pub tail_bound: f64,
}

/// One bisected edge, at link position `index` (between `centers[index]` and `centers[index + 1]`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BisectedEdge {
    pub index: usize,
    pub link: DualLink,
}

impl BisectedEdge {
    pub fn class(&self) -> WeightClass {
        self.link.bisects.weight_class
    }
}

/// Maximal run of consecutive links of one class, as link positions `start..=end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub class: WeightClass,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug)]
pub struct ValidatedPath {
    pub path: AdmissiblePath,
    pub bisected: Vec<BisectedEdge>,
    pub segments: Vec<Segment>,
}

pub fn validate(path: &AdmissiblePath, window: &Window) -> Result<ValidatedPath> {
    let n = path.centers.len();
    if n < 3 {
        return Err(Error::PathTooShort(n));
    }
    let mut seen = HashMap::new();
    for (i, &c) in path.centers.iter().enumerate() {
        if face_kind(c).is_none() {
            return Err(Error::NotALatticePoint { a: c.a, b: c.b });
        }
        if seen.insert(c, i).is_some() {
            return Err(Error::PathSelfIntersecting { index: i });
        }
    }
    for (i, &c) in path.centers.iter().enumerate() {
        let inner = i > 0 && i + 1 < n;
        let leaves = match face_kind(c) {
            Some(FaceKind::Rectangle) => !inner || !window.contains_kagome(c),
            _ => inner && window.is_open_face(c),
        };
        if leaves {
            return Err(Error::PathLeavesWindow { index: i, center: c.to_string() });
        }
    }
    for &end in [path.centers[0], path.centers[n - 1]].iter() {
        if !window.is_open_face(end) {
            return Err(Error::PathEndpoint(end.to_string()));
        }
    }
    let mut bisected = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let e = link_between(path.centers[i], path.centers[i + 1])
            .ok_or(Error::PathNotAdjacent { index: i, next: i + 1 })?;
        bisected.push(BisectedEdge { index: i, link: link_for_edge(&e) });
    }
    let first = bisected[0].class();
    let last = bisected[n - 2].class();
    if first != path.left_tail.class() {
        return Err(Error::TailMismatch { side: "left", declared: path.left_tail.class(), found: first });
    }
    if last != path.right_tail.class() {
        return Err(Error::TailMismatch { side: "right", declared: path.right_tail.class(), found: last });
    }
    let mut segments: Vec<Segment> = Vec::new();
    for b in &bisected {
        match segments.last_mut() {
            Some(s) if s.class == b.class() => s.end = b.index,
            _ => segments.push(Segment { class: b.class(), start: b.index, end: b.index }),
        }
    }
    Ok(ValidatedPath { path: path.clone(), bisected, segments })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SidePartition {
    pub membership: BTreeMap<LatticeCoord, Side>,
}

impl SidePartition {
    pub fn side(&self, x: LatticeCoord) -> Result<Side> {
        self.membership.get(&x).copied().ok_or(Error::MissingMembership(x))
    }

    pub fn is_plus(&self, x: LatticeCoord) -> Result<bool> {
        Ok(self.side(x)? == Side::Plus)
    }

    pub fn plus_set(&self) -> BTreeSet<LatticeCoord> {
        self.membership.iter().filter(|(_, s)| **s == Side::Plus).map(|(x, _)| *x).collect()
    }
}

/// Left/right seeding for a bisected edge: the endpoint to the left of the
/// directed link is PLUS.
fn seeds(path: &ValidatedPath) -> Vec<(LatticeCoord, Side)> {
    let mut out = Vec::new();
    for b in &path.bisected {
        let (c0, c1) = (path.path.centers[b.index], path.path.centers[b.index + 1]);
        let dir = c1 - c0;
        let mid2 = c0 + c1;
        for p in [b.link.bisects.source, b.link.bisects.target] {
            let side = if cross(dir, p * 2 - mid2) > 0 { Side::Plus } else { Side::Minus };
            out.push((p, side));
        }
    }
    out
}

pub fn side_partition(path: &ValidatedPath, window: &Window) -> Result<SidePartition> {
    let cut: BTreeSet<(LatticeCoord, LatticeCoord)> =
        path.bisected.iter().map(|b| (b.link.bisects.source, b.link.bisects.target)).collect();
    let mut adj: HashMap<LatticeCoord, Vec<LatticeCoord>> = HashMap::new();
    for e in window.edges() {
        if cut.contains(&(e.source, e.target)) {
            continue;
        }
        adj.entry(e.source).or_default().push(e.target);
        adj.entry(e.target).or_default().push(e.source);
    }
    let mut membership: BTreeMap<LatticeCoord, Side> = BTreeMap::new();
    for (seed, side) in seeds(path) {
        match membership.get(&seed) {
            Some(s) if *s == side => continue,
            Some(_) => {
                return Err(Error::SeparationFailure(format!("{seed} is reached from both sides")));
            }
            None => {}
        }
        membership.insert(seed, side);
        let mut queue = VecDeque::from([seed]);
        while let Some(x) = queue.pop_front() {
            for &y in adj.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
                match membership.get(&y) {
                    Some(s) if *s == side => {}
                    Some(_) => {
                        return Err(Error::SeparationFailure(format!("{y} is reached from both sides")));
                    }
                    None => {
                        membership.insert(y, side);
                        queue.push_back(y);
                    }
                }
            }
        }
    }
    if let Some(x) = window.ruby_vertices.iter().find(|x| !membership.contains_key(x)) {
        return Err(Error::SeparationFailure(format!("component of {x} touches no bisected edge")));
    }
    Ok(SidePartition { membership })
}

/// Kagome vertices incident to a bisected edge.
pub fn contributing_set(path: &ValidatedPath) -> BTreeSet<LatticeCoord> {
    path.bisected.iter().map(|b| b.link.bisects.via).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexCertificate {
    pub index: i64,
    /// `z -> (dim Ran P Qhat_z, dim Ran P Q_z)`: PLUS counts among outgoing and incoming vertices.
    #[serde(with = "crate::network::coord_map")]
    pub per_vertex: BTreeMap<LatticeCoord, (usize, usize)>,
    /// Largest tail modulus found outside the window.
    pub regularity: f64,
    pub tail_bound: f64,
}

impl IndexCertificate {
    pub fn contribution(&self, z: LatticeCoord) -> i64 {
        self.per_vertex.get(&z).map_or(0, |&(o, i)| o as i64 - i as i64)
    }
}

/// Largest tail-class modulus over the field default and explicit entries
/// outside the window; errors when it exceeds the path's tail bound.
pub fn check_tail_regularity(path: &AdmissiblePath, field: &ScatteringField, window: &Window) -> Result<f64> {
    let c = path.tail_bound;
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::BadTailBound(c));
    }
    let classes: BTreeSet<_> = [path.left_tail, path.right_tail].into_iter().map(|t| t.class() as u8).collect();
    let modulus = |p: &crate::network::ScatteringParams, class: u8| {
        if class == WeightClass::R as u8 {
            p.r.norm()
        } else {
            p.t.norm()
        }
    };
    let mut worst = 0.0f64;
    let candidates = std::iter::once(("default".to_string(), &field.default))
        .chain(field.values.iter().filter(|(z, _)| !window.contains_kagome(**z)).map(|(z, p)| (z.to_string(), p)));
    for (name, p) in candidates {
        for &class in &classes {
            let m = modulus(p, class);
            if m > c {
                return Err(Error::IndexUndefined { vertex: name, modulus: m, bound: c });
            }
            worst = worst.max(m);
        }
    }
    Ok(worst)
}

pub fn combinatorial_index(
    path: &ValidatedPath,
    partition: &SidePartition,
    field: &ScatteringField,
    window: &Window,
) -> Result<IndexCertificate> {
    let regularity = check_tail_regularity(&path.path, field, window)?;
    let mut per_vertex = BTreeMap::new();
    let mut index = 0i64;
    for z in contributing_set(path) {
        let io = io_pairs(z)?;
        let mut out = 0;
        let mut inc = 0;
        for y in io.outgoing {
            out += partition.is_plus(y)? as usize;
        }
        for x in io.incoming {
            inc += partition.is_plus(x)? as usize;
        }
        index += out as i64 - inc as i64;
        per_vertex.insert(z, (out, inc));
    }
    Ok(IndexCertificate { index, per_vertex, regularity, tail_bound: path.path.tail_bound })
}

// ---------------------------------------------------------------------------
// generators

const fn lc(a: i64, b: i64) -> LatticeCoord {
    LatticeCoord::new(a, b)
}

/// Short-side zigzag along the row `b = 0`, from `rect(12 k0, 0)` up to the
/// triangle just before `rect(12 k1, 0)`.
fn zigzag(k0: i64, k1: i64) -> Vec<LatticeCoord> {
    (k0..k1).flat_map(|k| [lc(12 * k, 0), lc(12 * k + 2, 2), lc(12 * k + 6, 0), lc(12 * k + 10, -2)]).collect()
}

/// Long-side line along `b = -6`, from `rect(12 k0, -6)` up to `hex(12 k1 - 6, -6)`.
fn t_line(k0: i64, k1: i64) -> Vec<LatticeCoord> {
    (k0..k1).flat_map(|k| [lc(12 * k, -6), lc(12 * k + 6, -6)]).collect()
}

/// Shapes of the canonical generator paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathShape {
    /// Pure short-side path.
    RPath,
    /// Pure long-side path.
    TPath,
    /// Short-side tail on the left, long-side tail on the right, one switch at the origin.
    SingleSwitch,
    /// Same tails as `SingleSwitch` with a detour adding two more switches.
    TripleSwitch,
}

fn unclipped(shape: PathShape, m: i64) -> (Vec<LatticeCoord>, LatticeCoord) {
    let origin = lc(0, 0);
    let mut v = Vec::new();
    match shape {
        PathShape::RPath => {
            v.extend(zigzag(-m, m));
            v.push(lc(12 * m, 0));
        }
        PathShape::TPath => {
            v.extend(t_line(-m, m));
            return (v, lc(0, -6));
        }
        PathShape::SingleSwitch => {
            v.extend(zigzag(-m, 0));
            v.extend([lc(0, 0), lc(6, -6)]);
            v.extend(t_line(1, m));
        }
        PathShape::TripleSwitch => {
            v.extend(zigzag(-m, -2));
            v.extend([lc(-24, 0), lc(-18, -6), lc(-12, -6), lc(-14, -2)]);
            v.extend(zigzag(-1, 0));
            v.extend([lc(0, 0), lc(6, -6)]);
            v.extend(t_line(1, m));
        }
    }
    (v, origin)
}

/// Clips an infinite path (given as a long finite stretch) to the window: the
/// contiguous run of in-window rectangles around `anchor` plus the two
/// bounding faces. Tail tags come from the first and last link classes.
pub fn clip_to_window(
    stretch: &[LatticeCoord],
    anchor: LatticeCoord,
    window: &Window,
    tail_bound: f64,
) -> Result<AdmissiblePath> {
    let pos = stretch
        .iter()
        .position(|&c| c == anchor)
        .ok_or_else(|| Error::WindowTooSmall(format!("anchor {anchor} not on the path")))?;
    if !window.contains_kagome(anchor) {
        return Err(Error::WindowTooSmall(format!("anchor {anchor} outside the window")));
    }
    let inside = |c: LatticeCoord| face_kind(c) != Some(FaceKind::Rectangle) || window.contains_kagome(c);
    let mut lo = pos;
    while lo > 0 && inside(stretch[lo - 1]) {
        lo -= 1;
    }
    let mut hi = pos;
    while hi + 1 < stretch.len() && inside(stretch[hi + 1]) {
        hi += 1;
    }
    if lo == 0 || hi + 1 == stretch.len() {
        return Err(Error::WindowTooSmall("generator stretch does not leave the window".into()));
    }
    // the run ends on bounding non-rectangle faces
    let centers = stretch[lo..=hi].to_vec();
    let first = link_between(centers[0], centers[1]).ok_or(Error::PathNotAdjacent { index: 0, next: 1 })?;
    let k = centers.len();
    let last =
        link_between(centers[k - 2], centers[k - 1]).ok_or(Error::PathNotAdjacent { index: k - 2, next: k - 1 })?;
    Ok(AdmissiblePath {
        centers,
        left_tail: TailTag::from_class(first.weight_class),
        right_tail: TailTag::from_class(last.weight_class),
        tail_bound,
    })
}

/// Canonical path of the given shape, translated by `shift` and clipped to the window.
pub fn canonical_path(
    shape: PathShape,
    window: &Window,
    shift: LatticeCoord,
    tail_bound: f64,
) -> Result<AdmissiblePath> {
    let m = window.radius + 3 + (shift.a.abs() + shift.b.abs()) / 12;
    let (stretch, anchor) = unclipped(shape, m);
    let stretch: Vec<_> = stretch.into_iter().map(|c| c + shift).collect();
    clip_to_window(&stretch, anchor + shift, window, tail_bound)
}

pub fn single_switch_path(window: &Window, tail_bound: f64) -> Result<AdmissiblePath> {
    canonical_path(PathShape::SingleSwitch, window, lc(0, 0), tail_bound)
}

/// Self-avoiding random walk on the dual graph between two open faces,
/// through in-window rectangles and closed triangle/hexagon faces only.
/// Dead ends restart the walk; `None` after `attempts` failures.
pub fn random_path<R: Rng + ?Sized>(
    window: &Window,
    rng: &mut R,
    min_len: usize,
    attempts: usize,
    tail_bound: f64,
) -> Option<AdmissiblePath> {
    let mut open: Vec<LatticeCoord> =
        BTreeSet::<LatticeCoord>::from_iter(window.kagome_vertices.iter().flat_map(|&z| {
            dual_neighbors(z).unwrap_or_default().into_iter().map(|(f, _)| f).filter(|f| window.is_open_face(*f))
        }))
        .into_iter()
        .collect();
    open.sort();
    for _ in 0..attempts {
        let start = *open.choose(rng)?;
        let mut centers = vec![start];
        let mut visited = BTreeSet::from([start]);
        loop {
            let cur = *centers.last().unwrap();
            let mut options: Vec<LatticeCoord> = dual_neighbors(cur)
                .unwrap_or_default()
                .into_iter()
                .map(|(f, _)| f)
                .filter(|f| !visited.contains(f))
                .filter(|&f| match face_kind(f) {
                    Some(FaceKind::Rectangle) => window.contains_kagome(f),
                    _ => true,
                })
                .collect();
            if centers.len() < min_len {
                // avoid finishing early while other options exist
                let non_open: Vec<_> = options.iter().copied().filter(|f| !window.is_open_face(*f)).collect();
                if !non_open.is_empty() {
                    options = non_open;
                }
            }
            let Some(&next) = options.choose(rng) else { break };
            centers.push(next);
            visited.insert(next);
            if window.is_open_face(next) {
                if centers.len() < 3 {
                    break;
                }
                let first = link_between(centers[0], centers[1])?;
                let k = centers.len();
                let last = link_between(centers[k - 2], centers[k - 1])?;
                return Some(AdmissiblePath {
                    centers,
                    left_tail: TailTag::from_class(first.weight_class),
                    right_tail: TailTag::from_class(last.weight_class),
                    tail_bound,
                });
            }
        }
    }
    None
}

//! The two-coin split-step walk `U = T_y C2 T_x C1` on spinor states of the
//! square lattice, its explicit one-step kernel, the half-line lead projection
//! and the decoupling coins.
//!
//! Spin index 0 is `+` (moves by `+e_j` under `T_j`), index 1 is `-`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};
use crate::network::ScatteringParams;

pub type Site = (i64, i64);

/// Coin data at one site; same parametrization as the network scattering matrices.
pub type CoinParams = ScatteringParams;

/// Phase of `z`, with the convention `arg 0 = 0`.
pub fn phase(z: C64) -> f64 {
    if z == ZERO {
        0.0
    } else {
        z.arg()
    }
}

/// Applies the whole row `y` from `x_from` on (all `x` when `None`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowRule {
    pub y: i64,
    pub x_from: Option<i64>,
    pub params: CoinParams,
}

impl RowRule {
    fn matches(&self, (x, y): Site) -> bool {
        y == self.y && self.x_from.is_none_or(|x0| x >= x0)
    }
}

/// Coin field: explicit sites, then the first matching row rule, then the default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinField {
    #[serde(with = "site_map")]
    pub sites: BTreeMap<Site, CoinParams>,
    #[serde(default)]
    pub rows: Vec<RowRule>,
    pub default: CoinParams,
}

impl CoinField {
    pub fn constant(p: CoinParams) -> Self {
        CoinField { sites: BTreeMap::new(), rows: Vec::new(), default: p }
    }

    pub fn get(&self, s: Site) -> &CoinParams {
        if let Some(p) = self.sites.get(&s) {
            return p;
        }
        self.rows.iter().find(|r| r.matches(s)).map_or(&self.default, |r| &r.params)
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        self.sites.values().try_for_each(CoinParams::validate)?;
        self.rows.iter().try_for_each(|r| r.params.validate())
    }

    /// Independent generic coins on the box `x in xs`, `y in ys`, with a generic default.
    pub fn random_box<R: Rng + ?Sized>(
        rng: &mut R,
        xs: std::ops::RangeInclusive<i64>,
        ys: std::ops::RangeInclusive<i64>,
    ) -> Self {
        let default = CoinParams::random(rng);
        let mut sites = BTreeMap::new();
        for y in ys {
            for x in xs.clone() {
                sites.insert((x, y), CoinParams::random(rng));
            }
        }
        CoinField { sites, rows: Vec::new(), default }
    }

    /// Replaces the coin on row `y` for `x >= x_from` by `f(coin)`, leaving all
    /// other sites unchanged.
    fn map_row(&self, y: i64, x_from: Option<i64>, f: impl Fn(&CoinParams) -> CoinParams) -> CoinField {
        let in_region = |s: Site| s.1 == y && x_from.is_none_or(|x0| s.0 >= x0);
        let sites = self.sites.iter().map(|(&s, p)| (s, if in_region(s) { f(p) } else { *p })).collect();
        let mut rows = Vec::new();
        for r in self.rows.iter().filter(|r| r.y == y) {
            let from = match (r.x_from, x_from) {
                (None, b) => b,
                (a, None) => a,
                (Some(a), Some(b)) => Some(a.max(b)),
            };
            rows.push(RowRule { y, x_from: from, params: f(&r.params) });
        }
        rows.extend(self.rows.iter().copied());
        rows.push(RowRule { y, x_from, params: f(&self.default) });
        CoinField { sites, rows, default: self.default }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinPair {
    pub c1: CoinField,
    pub c2: CoinField,
}

impl CoinPair {
    pub fn constant(c1: CoinParams, c2: CoinParams) -> Self {
        CoinPair { c1: CoinField::constant(c1), c2: CoinField::constant(c2) }
    }

    pub fn validate(&self) -> Result<()> {
        self.c1.validate()?;
        self.c2.validate()
    }

    pub fn random_box<R: Rng + ?Sized>(
        rng: &mut R,
        xs: std::ops::RangeInclusive<i64>,
        ys: std::ops::RangeInclusive<i64>,
    ) -> Self {
        let c1 = CoinField::random_box(rng, xs.clone(), ys.clone());
        let c2 = CoinField::random_box(rng, xs, ys);
        CoinPair { c1, c2 }
    }
}

/// `z / |z|`, or 1 for `z = 0`; unit-modulus input is returned unchanged.
fn unit_phase(z: C64) -> C64 {
    let m = z.norm();
    if m == 0.0 {
        ONE
    } else if (m - 1.0).abs() <= 4.0 * f64::EPSILON {
        z
    } else {
        z / m
    }
}

/// `q (0, -e^{i tau}; e^{-i tau}, 0)`: the off-diagonal part of a coin kept at unit modulus.
pub fn flip_part(p: &CoinParams) -> CoinParams {
    CoinParams { q: p.q, r: ZERO, t: unit_phase(p.t) }
}

/// `q diag(e^{i rho}, e^{-i rho})`: the diagonal part of a coin kept at unit modulus.
pub fn diagonal_part(p: &CoinParams) -> CoinParams {
    CoinParams { q: p.q, r: unit_phase(p.r), t: ZERO }
}

/// Decouples row 0 from `row0_from` on and row -1 from `row_m1_from` on
/// (`None` = the whole row): on row 0, `C2 -> flip_part`, `C1 -> diagonal_part`;
/// on row -1, `C2 -> diagonal_part`, `C1 -> flip_part`.
pub fn decouple_rows(coins: &CoinPair, row0_from: Option<i64>, row_m1_from: Option<i64>) -> CoinPair {
    let c1 = coins.c1.map_row(0, row0_from, diagonal_part).map_row(-1, row_m1_from, flip_part);
    let c2 = coins.c2.map_row(0, row0_from, flip_part).map_row(-1, row_m1_from, diagonal_part);
    CoinPair { c1, c2 }
}

/// Decoupling coins on the lead region `x >= 0`.
pub fn decoupled_coins(coins: &CoinPair) -> CoinPair {
    decouple_rows(coins, Some(0), Some(0))
}

/// Decoupling coins on the whole of rows 0 and -1.
pub fn fully_decoupled(coins: &CoinPair) -> CoinPair {
    decouple_rows(coins, None, None)
}

/// Coins decoupled on row 0 for `x >= 3` and on row -1 for `x >= -1`,
/// generic elsewhere.
pub fn remark_perturbation<R: Rng + ?Sized>(rng: &mut R) -> CoinPair {
    let generic = CoinPair::random_box(rng, -8..=8, -4..=4);
    decouple_rows(&generic, Some(3), Some(-1))
}

/// `2x2` matrix in row-major order.
pub type Spin2 = [[C64; 2]; 2];

fn spin_mul_vec(m: &Spin2, v: [C64; 2]) -> [C64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn spin_adj_mul_vec(m: &Spin2, v: [C64; 2]) -> [C64; 2] {
    [m[0][0].conj() * v[0] + m[1][0].conj() * v[1], m[0][1].conj() * v[0] + m[1][1].conj() * v[1]]
}

/// The four kernel entries of source site `w`: `(target offset, K(w + offset, w))`.
pub fn kernel_entries(coins: &CoinPair, w: Site) -> [(Site, Spin2); 4] {
    let (x, y) = w;
    let c1 = coins.c1.get(w);
    let (q1, r1, t1) = (c1.q, c1.r, c1.t);
    let cr = coins.c2.get((x + 1, y));
    let cl = coins.c2.get((x - 1, y));
    let pp = cr.q * cr.r * q1;
    let mm = cl.q * cl.r.conj() * q1;
    let mp = -cl.q * cl.t * q1;
    let pm = cr.q * cr.t.conj() * q1;
    [
        ((1, 1), [[pp * r1, -pp * t1], [ZERO, ZERO]]),
        ((-1, -1), [[ZERO, ZERO], [mm * t1.conj(), mm * r1.conj()]]),
        ((-1, 1), [[mp * t1.conj(), mp * r1.conj()], [ZERO, ZERO]]),
        ((1, -1), [[ZERO, ZERO], [pm * r1, -pm * t1]]),
    ]
}

/// The explicit kernel for every source site of a window.
#[derive(Clone, Debug)]
pub struct WalkKernel {
    pub entries: BTreeMap<Site, [(Site, Spin2); 4]>,
}

pub fn build_kernel(coins: &CoinPair, window: &WalkWindow) -> WalkKernel {
    WalkKernel { entries: window.sites().map(|w| (w, kernel_entries(coins, w))).collect() }
}

/// Rectangular window `x_min..=x_max`, `y_min..=y_max` with dense indexing
/// `((y - y_min) * width + (x - x_min)) * 2 + spin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkWindow {
    pub x_min: i64,
    pub x_max: i64,
    pub y_min: i64,
    pub y_max: i64,
}

impl WalkWindow {
    pub fn new(x_min: i64, x_max: i64, y_min: i64, y_max: i64) -> Result<Self> {
        if x_max - x_min < 2 || y_max - y_min < 2 {
            return Err(Error::WindowTooSmall(format!("[{x_min}, {x_max}] x [{y_min}, {y_max}]")));
        }
        Ok(WalkWindow { x_min, x_max, y_min, y_max })
    }

    /// Square window `|x|, |y| <= half`.
    pub fn square(half: i64) -> Result<Self> {
        Self::new(-half, half, -half, half)
    }

    pub fn width(&self) -> usize {
        (self.x_max - self.x_min + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.y_max - self.y_min + 1) as usize
    }

    pub fn num_sites(&self) -> usize {
        self.width() * self.height()
    }

    pub fn dim(&self) -> usize {
        2 * self.num_sites()
    }

    pub fn contains(&self, (x, y): Site) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn on_outer_ring(&self, (x, y): Site) -> bool {
        self.contains((x, y)) && (x == self.x_min || x == self.x_max || y == self.y_min || y == self.y_max)
    }

    pub fn site_index(&self, s: Site) -> Option<usize> {
        self.contains(s).then(|| ((s.1 - self.y_min) as usize) * self.width() + (s.0 - self.x_min) as usize)
    }

    pub fn index(&self, s: Site, spin: usize) -> Option<usize> {
        self.site_index(s).map(|i| 2 * i + spin)
    }

    pub fn site_of(&self, i: usize) -> (Site, usize) {
        let site = i / 2;
        let w = self.width();
        ((self.x_min + (site % w) as i64, self.y_min + (site / w) as i64), i % 2)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (self.y_min..=self.y_max).flat_map(move |y| (self.x_min..=self.x_max).map(move |x| (x, y)))
    }

    pub fn basis(&self, s: Site, spin: usize) -> Result<Vec<C64>> {
        let i = self.index(s, spin).ok_or_else(|| Error::WindowTooSmall(format!("site {s:?} outside")))?;
        let mut v = vec![ZERO; self.dim()];
        v[i] = ONE;
        Ok(v)
    }

    /// Smallest site-bounding box of the support of `v`, if any.
    pub fn support_box(&self, v: &[C64], cutoff: f64) -> Option<(i64, i64, i64, i64)> {
        let mut b: Option<(i64, i64, i64, i64)> = None;
        for (i, a) in v.iter().enumerate() {
            if a.norm() > cutoff {
                let ((x, y), _) = self.site_of(i);
                b = Some(match b {
                    None => (x, x, y, y),
                    Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
                });
            }
        }
        b
    }
}

fn check_interior(window: &WalkWindow, v: &[C64]) -> Result<()> {
    if v.len() != window.dim() {
        return Err(Error::LengthMismatch { expected: window.dim(), found: v.len() });
    }
    for (i, a) in v.iter().enumerate() {
        if *a != ZERO {
            let (s, _) = window.site_of(i);
            if window.on_outer_ring(s) {
                return Err(Error::SupportAtBoundary { site: format!("{s:?}") });
            }
        }
    }
    Ok(())
}

/// One kernel application of `U` (or `U*` when `adjoint`); the state must
/// vanish on the window's outer ring.
pub fn apply_kernel(coins: &CoinPair, window: &WalkWindow, v: &[C64], adjoint: bool) -> Result<Vec<C64>> {
    check_interior(window, v)?;
    let mut out = vec![ZERO; v.len()];
    for w in window.sites() {
        if window.on_outer_ring(w) {
            continue;
        }
        let wi = window.site_index(w).unwrap();
        let entries = kernel_entries(coins, w);
        if adjoint {
            let mut acc = [ZERO; 2];
            for ((dx, dy), m) in entries.iter() {
                let ci = window.site_index((w.0 + dx, w.1 + dy)).unwrap();
                let add = spin_adj_mul_vec(m, [v[2 * ci], v[2 * ci + 1]]);
                acc[0] += add[0];
                acc[1] += add[1];
            }
            out[2 * wi] = acc[0];
            out[2 * wi + 1] = acc[1];
        } else {
            let src = [v[2 * wi], v[2 * wi + 1]];
            if src == [ZERO, ZERO] {
                continue;
            }
            for ((dx, dy), m) in entries.iter() {
                let ci = window.site_index((w.0 + dx, w.1 + dy)).unwrap();
                let add = spin_mul_vec(m, src);
                out[2 * ci] += add[0];
                out[2 * ci + 1] += add[1];
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    C1,
    Tx,
    C2,
    Ty,
}

fn apply_coin(field: &CoinField, window: &WalkWindow, v: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; v.len()];
    for s in window.sites() {
        let i = window.site_index(s).unwrap();
        let src = [v[2 * i], v[2 * i + 1]];
        if src == [ZERO, ZERO] {
            continue;
        }
        let b = field.get(s).block();
        let m = [[b[(0, 0)], b[(0, 1)]], [b[(1, 0)], b[(1, 1)]]];
        let r = spin_mul_vec(&m, src);
        out[2 * i] = r[0];
        out[2 * i + 1] = r[1];
    }
    out
}

fn apply_shift(window: &WalkWindow, v: &[C64], (dx, dy): Site) -> Result<Vec<C64>> {
    let mut out = vec![ZERO; v.len()];
    for (i, a) in v.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let ((x, y), spin) = window.site_of(i);
        let sign = if spin == 0 { 1 } else { -1 };
        let target = (x + sign * dx, y + sign * dy);
        let j = window.index(target, spin).ok_or_else(|| Error::SupportAtBoundary { site: format!("{:?}", (x, y)) })?;
        out[j] = *a;
    }
    Ok(out)
}

/// Applies the selected factors in the fixed order `C1, Tx, C2, Ty`.
pub fn apply_factors(v: &[C64], coins: &CoinPair, window: &WalkWindow, which: &[Factor]) -> Result<Vec<C64>> {
    if v.len() != window.dim() {
        return Err(Error::LengthMismatch { expected: window.dim(), found: v.len() });
    }
    let mut cur = v.to_vec();
    for f in [Factor::C1, Factor::Tx, Factor::C2, Factor::Ty] {
        if !which.contains(&f) {
            continue;
        }
        cur = match f {
            Factor::C1 => apply_coin(&coins.c1, window, &cur),
            Factor::Tx => apply_shift(window, &cur, (1, 0))?,
            Factor::C2 => apply_coin(&coins.c2, window, &cur),
            Factor::Ty => apply_shift(window, &cur, (0, 1))?,
        };
    }
    Ok(cur)
}

/// The two-channel half-line lead: spin `+` on row 0 and spin `-` on row -1, for `x >= x_start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LeadProjection {
    pub x_start: i64,
}

impl LeadProjection {
    /// Diagonal of the symbol at `s`: `(P on spin +, P on spin -)`.
    pub fn symbol(&self, (x, y): Site) -> [bool; 2] {
        if x < self.x_start {
            return [false, false];
        }
        [y == 0, y == -1]
    }

    pub fn contains(&self, s: Site, spin: usize) -> bool {
        self.symbol(s)[spin]
    }

    pub fn apply(&self, window: &WalkWindow, v: &[C64]) -> Vec<C64> {
        v.iter()
            .enumerate()
            .map(|(i, a)| {
                let (s, spin) = window.site_of(i);
                if self.contains(s, spin) {
                    *a
                } else {
                    ZERO
                }
            })
            .collect()
    }

    pub fn expectation(&self, window: &WalkWindow, v: &[C64]) -> f64 {
        v.iter()
            .enumerate()
            .filter(|(i, _)| {
                let (s, spin) = window.site_of(*i);
                self.contains(s, spin)
            })
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

/// The ordered pair `|-1,0;+>`, `|-1,-1;->`.
pub fn l0_basis(window: &WalkWindow) -> Result<[Vec<C64>; 2]> {
    Ok([window.basis((-1, 0), 0)?, window.basis((-1, -1), 1)?])
}

/// Per-site decoupling weights over `x_lo..=x_hi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsSite {
    pub x: i64,
    /// `|r2(x,0)| + |t1(x,0)| + |t2(x,-1)| + |r1(x,-1)|`
    pub weight: f64,
    /// `||(C2 - C2^0)(x,0)||_HS^2` and its bound `4 |r2(x,0)|^2`, likewise for the other three coins.
    pub hs_checks: [(f64, f64); 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsReport {
    pub sites: Vec<HsSite>,
    pub partial_sums: Vec<f64>,
    pub all_bounds_hold: bool,
}

fn hs_dist2(a: &CoinParams, b: &CoinParams) -> f64 {
    let (ma, mb) = (a.block(), b.block());
    (&ma - &mb).frobenius_norm().powi(2)
}

pub fn hs_bound_report(coins: &CoinPair, x_lo: i64, x_hi: i64) -> HsReport {
    let mut sites = Vec::new();
    let mut partial_sums = Vec::new();
    let mut sum = 0.0;
    let mut ok = true;
    for x in x_lo..=x_hi {
        let (c1a, c2a) = (coins.c1.get((x, 0)), coins.c2.get((x, 0)));
        let (c1b, c2b) = (coins.c1.get((x, -1)), coins.c2.get((x, -1)));
        let checks = [
            (hs_dist2(c2a, &flip_part(c2a)), 4.0 * c2a.r.norm_sqr()),
            (hs_dist2(c1a, &diagonal_part(c1a)), 4.0 * c1a.t.norm_sqr()),
            (hs_dist2(c2b, &diagonal_part(c2b)), 4.0 * c2b.t.norm_sqr()),
            (hs_dist2(c1b, &flip_part(c1b)), 4.0 * c1b.r.norm_sqr()),
        ];
        ok &= checks.iter().all(|(d, b)| *d <= *b + 1e-12);
        let weight = c2a.r.norm() + c1a.t.norm() + c2b.t.norm() + c1b.r.norm();
        sum += weight;
        partial_sums.push(sum);
        sites.push(HsSite { x, weight, hs_checks: checks });
    }
    HsReport { sites, partial_sums, all_bounds_hold: ok }
}

pub(crate) mod site_map {
    //! Serializes site-keyed maps as lists of `[[x, y], value]` pairs.
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Site;

    pub fn serialize<V: Serialize, S: Serializer>(m: &BTreeMap<Site, V>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<([i64; 2], &V)> = m.iter().map(|(c, v)| ([c.0, c.1], v)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Site, V>, D::Error> {
        let v: Vec<([i64; 2], V)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|([x, y], v)| ((x, y), v)).collect())
    }
}

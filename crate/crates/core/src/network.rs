//! The network unitary on the Ruby graph: per-vertex scattering parameters and
//! the one-step gather/scatter update.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{head_of, io_pairs, LatticeCoord, Window};
use crate::linalg::{ComplexMatrix, C64, ONE, ZERO};

const PARAM_TOL: f64 = 1e-12;

/// Scattering data at one vertex: `S = q (r, -t; conj t, conj r)` in the
/// ordered bases `(x1, x2) -> (y1, y2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringParams {
    pub q: C64,
    pub r: C64,
    pub t: C64,
}

impl ScatteringParams {
    pub fn new(q: C64, r: C64, t: C64) -> Result<Self> {
        let p = ScatteringParams { q, r, t };
        let defect = p.defect();
        if !(defect <= PARAM_TOL) {
            return Err(Error::InvalidParams { defect });
        }
        Ok(p)
    }

    /// Largest violation of `|q| = 1` and `|r|^2 + |t|^2 = 1`.
    pub fn defect(&self) -> f64 {
        let dq = (self.q.norm() - 1.0).abs();
        let drt = (self.r.norm_sqr() + self.t.norm_sqr() - 1.0).abs();
        if dq.is_finite() && drt.is_finite() {
            dq.max(drt)
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.q, self.r, self.t).map(|_| ())
    }

    pub const IDENTITY: ScatteringParams = ScatteringParams { q: ONE, r: ONE, t: ZERO };

    /// `q = 1` with real `r = cos(theta)` and `t = sin(theta)`.
    pub fn real_angle(theta: f64) -> Self {
        ScatteringParams { q: ONE, r: C64::new(theta.cos(), 0.0), t: C64::new(theta.sin(), 0.0) }
    }

    /// `q = 1`, `r = |r|`, `t = sqrt(1 - |r|^2)`.
    pub fn with_modulus(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidParams { defect: (r.abs() - 1.0).max(0.0) });
        }
        Ok(ScatteringParams { q: ONE, r: C64::new(r, 0.0), t: C64::new((1.0 - r * r).sqrt(), 0.0) })
    }

    /// Draws `q = e^{i alpha}`, `r = cos(theta) e^{i rho}`, `t = sin(theta) e^{i tau}`
    /// with `|r|^2` uniform in `[lo^2, hi^2]` and uniform phases.
    pub fn random_with_modulus_range<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> Self {
        let tau = std::f64::consts::TAU;
        let r2: f64 = rng.gen_range(lo * lo..=hi * hi);
        let (rm, tm) = (r2.sqrt(), (1.0 - r2).sqrt());
        let q = C64::from_polar(1.0, rng.gen_range(0.0..tau));
        let r = C64::from_polar(rm, rng.gen_range(0.0..tau));
        let t = C64::from_polar(tm, rng.gen_range(0.0..tau));
        ScatteringParams { q, r, t }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::random_with_modulus_range(rng, 0.0, 1.0)
    }

    /// Straight-line homotopy in the coordinates `(theta, arg q, arg r, arg t)`
    /// with `|r| = cos(theta)`; phases move along the shorter arc.
    pub fn interpolate(&self, other: &ScatteringParams, s: f64) -> ScatteringParams {
        let theta = |p: &ScatteringParams| p.t.norm().atan2(p.r.norm());
        let arg = |z: C64| if z.norm() == 0.0 { 0.0 } else { z.arg() };
        let lerp_arg = |a: C64, b: C64| {
            let (x, y) = (arg(a), arg(b));
            let d = (y - x + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            x + s * d
        };
        let th = (1.0 - s) * theta(self) + s * theta(other);
        ScatteringParams {
            q: C64::from_polar(1.0, lerp_arg(self.q, other.q)),
            r: C64::from_polar(th.cos(), lerp_arg(self.r, other.r)),
            t: C64::from_polar(th.sin(), lerp_arg(self.t, other.t)),
        }
    }

    pub fn block(&self) -> ComplexMatrix {
        let q = self.q;
        ComplexMatrix::from_row_major(2, 2, vec![q * self.r, -q * self.t, q * self.t.conj(), q * self.r.conj()])
            .expect("2x2")
    }
}

pub fn block_matrix(p: &ScatteringParams) -> Result<ComplexMatrix> {
    p.validate()?;
    Ok(p.block())
}

/// Total assignment of scattering parameters: explicit values plus a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringField {
    #[serde(with = "coord_map")]
    pub values: BTreeMap<LatticeCoord, ScatteringParams>,
    pub default: ScatteringParams,
}

impl ScatteringField {
    pub fn constant(p: ScatteringParams) -> Self {
        ScatteringField { values: BTreeMap::new(), default: p }
    }

    pub fn get(&self, z: LatticeCoord) -> &ScatteringParams {
        self.values.get(&z).unwrap_or(&self.default)
    }

    pub fn set(&mut self, z: LatticeCoord, p: ScatteringParams) {
        self.values.insert(z, p);
    }

    pub fn validate(&self) -> Result<()> {
        self.default.validate()?;
        self.values.values().try_for_each(ScatteringParams::validate)
    }

    /// Independent generic parameters on every Kagome vertex of the window.
    pub fn random<R: Rng + ?Sized>(window: &Window, rng: &mut R, lo: f64, hi: f64, default: ScatteringParams) -> Self {
        let values = window
            .kagome_vertices
            .iter()
            .map(|&z| (z, ScatteringParams::random_with_modulus_range(rng, lo, hi)))
            .collect();
        ScatteringField { values, default }
    }
}

/// The reference field with `|r| = |t| = 1/sqrt 2` everywhere. The window
/// argument is accepted for interface symmetry; the field is constant.
pub fn hadamard_field(_window: &Window) -> ScatteringField {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ScatteringField::constant(ScatteringParams { q: ONE, r: C64::new(h, 0.0), t: C64::new(h, 0.0) })
}

/// Dense state over the window's Ruby vertices, indexed by `Window::ruby_index`.
pub type RubyState = Vec<C64>;

pub fn state_from_map(window: &Window, state: &BTreeMap<LatticeCoord, C64>) -> Result<RubyState> {
    let mut v = vec![ZERO; window.num_ruby()];
    for (&x, &amp) in state {
        let i = window.ruby_index(x).ok_or_else(|| Error::SupportAtBoundary { site: x.to_string() })?;
        v[i] = amp;
    }
    Ok(v)
}

pub fn state_to_map(window: &Window, v: &[C64]) -> BTreeMap<LatticeCoord, C64> {
    window.ruby_vertices.iter().zip(v).filter(|(_, a)| **a != ZERO).map(|(&x, &a)| (x, a)).collect()
}

/// One application of `U` (or `U*` when `adjoint`) to a dense window state.
///
/// For `U` every nonzero amplitude must sit on a Ruby vertex whose head lies
/// in the window; for `U*` the same holds for tails.
pub fn apply_step_dense(field: &ScatteringField, window: &Window, v: &[C64], adjoint: bool) -> Result<RubyState> {
    if v.len() != window.num_ruby() {
        return Err(Error::LengthMismatch { expected: window.num_ruby(), found: v.len() });
    }
    for (i, amp) in v.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        let x = window.ruby_vertices[i];
        let anchor = if adjoint { crate::lattice::tail_of(x)? } else { head_of(x)? };
        if !window.contains_kagome(anchor) {
            return Err(Error::SupportAtBoundary { site: x.to_string() });
        }
    }
    let mut out = vec![ZERO; v.len()];
    for &z in &window.kagome_vertices {
        let io = io_pairs(z)?;
        let (src, dst) = if adjoint { (io.outgoing, io.incoming) } else { (io.incoming, io.outgoing) };
        let si = [window.ruby_index(src[0]).unwrap(), window.ruby_index(src[1]).unwrap()];
        let (a0, a1) = (v[si[0]], v[si[1]]);
        if a0 == ZERO && a1 == ZERO {
            continue;
        }
        let b = field.get(z).block();
        let b = if adjoint { b.adjoint() } else { b };
        for (k, y) in dst.iter().enumerate() {
            out[window.ruby_index(*y).unwrap()] += b[(k, 0)] * a0 + b[(k, 1)] * a1;
        }
    }
    Ok(out)
}

pub fn apply_step(
    field: &ScatteringField,
    state: &BTreeMap<LatticeCoord, C64>,
    window: &Window,
) -> Result<BTreeMap<LatticeCoord, C64>> {
    let v = state_from_map(window, state)?;
    Ok(state_to_map(window, &apply_step_dense(field, window, &v, false)?))
}

pub(crate) mod coord_map {
    //! Serializes coordinate-keyed maps as lists of `[[a, b], value]` pairs.
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::lattice::LatticeCoord;

    pub fn serialize<V: Serialize, S: Serializer>(m: &BTreeMap<LatticeCoord, V>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<([i64; 2], &V)> = m.iter().map(|(c, v)| ([c.a, c.b], v)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<LatticeCoord, V>, D::Error> {
        let v: Vec<([i64; 2], V)> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|([a, b], v)| (LatticeCoord::new(a, b), v)).collect())
    }
}

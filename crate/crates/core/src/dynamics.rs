//! Time evolution with `<P>` and flux expectations, position marginals and
//! the telescoping identity `<P>_T - <P>_0 = sum_t <psi_t, Phi psi_t>`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{FluxBlocks, WindowedFlux};
use crate::lattice::{head_of, io_pairs, LatticeCoord, Window};
use crate::linalg::{hermitian_eig, inner, norm, orthonormal_span, ComplexMatrix, C64, ZERO};
use crate::network::{apply_step_dense, ScatteringField};
use crate::path::SidePartition;
use crate::walk::{apply_kernel, CoinPair, LeadProjection, WalkWindow};

/// A unitary step together with a projection and an independently supplied flux operator.
pub trait EvolutionModel {
    fn dim(&self) -> usize;
    /// Rejects initial states whose support could reach the window edge within `steps`.
    fn check_padding(&self, psi0: &[C64], steps: usize) -> Result<()>;
    fn step(&self, v: &[C64]) -> Result<Vec<C64>>;
    fn p_expect(&self, v: &[C64]) -> f64;
    fn flux_apply(&self, v: &[C64]) -> Result<Vec<C64>>;
    /// Horizontal coordinate of basis state `i`.
    fn x_of(&self, i: usize) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub p_expect: f64,
    pub flux_expect: f64,
    pub norm: f64,
    pub mean_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub rows: Vec<TraceRow>,
    /// Position marginal per step, keyed by the horizontal coordinate in bits (`f64::to_bits`) order.
    pub marginals: Vec<Vec<(f64, f64)>>,
    /// `max_T |<P>_T - <P>_0 - sum_{t<T} <psi_t, Phi psi_t>|`.
    pub telescoping_residual: f64,
    /// `max_t |norm_t - norm_0|`.
    pub norm_drift: f64,
}

impl EvolutionTrace {
    pub const CSV_HEADER: &'static str = "t,p_expect,flux_expect,norm,mean_x";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.t, r.p_expect, r.flux_expect, r.norm, r.mean_x
            ));
        }
        s
    }
}

fn marginal(model: &impl EvolutionModel, v: &[C64]) -> (Vec<(f64, f64)>, f64) {
    let mut m: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    let mut mean = 0.0;
    for (i, a) in v.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let x = model.x_of(i);
        mean += x * p;
        // order-preserving key for finite floats
        let bits = x.to_bits();
        let key = if x.is_sign_negative() { !bits } else { bits | (1 << 63) };
        m.entry(key).or_insert((x, 0.0)).1 += p;
    }
    (m.into_values().collect(), mean)
}

pub fn evolve(model: &impl EvolutionModel, psi0: &[C64], steps: usize) -> Result<EvolutionTrace> {
    if psi0.len() != model.dim() {
        return Err(Error::LengthMismatch { expected: model.dim(), found: psi0.len() });
    }
    model.check_padding(psi0, steps)?;
    let n0 = norm(psi0);
    let mut psi = psi0.to_vec();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut marginals = Vec::with_capacity(steps + 1);
    let p0 = model.p_expect(&psi);
    let mut flux_sum = 0.0;
    let mut tele = 0.0f64;
    let mut drift = 0.0f64;
    for t in 0..=steps {
        let p = model.p_expect(&psi);
        let flux = inner(&psi, &model.flux_apply(&psi)?).re;
        let nt = norm(&psi);
        let (marg, mean) = marginal(model, &psi);
        tele = tele.max((p - p0 - flux_sum).abs());
        drift = drift.max((nt - n0).abs());
        rows.push(TraceRow { t, p_expect: p, flux_expect: flux, norm: nt, mean_x: mean });
        marginals.push(marg);
        flux_sum += flux;
        if t < steps {
            psi = model.step(&psi)?;
        }
    }
    Ok(EvolutionTrace { rows, marginals, telescoping_residual: tele, norm_drift: drift })
}

/// Least-squares slope of `mean_x` over rows `t >= t_from`.
pub fn fit_velocity(trace: &EvolutionTrace, t_from: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = trace.rows.iter().filter(|r| r.t >= t_from).map(|r| (r.t as f64, r.mean_x)).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    Some(num / den)
}

// ---------------------------------------------------------------------------
// walk

/// Largest boundary residual still treated as exact truncation (rounding of unitarity cancellations).
pub const EXACT_RESIDUAL: f64 = 1e-14;

/// Flux applier for the walk.
#[derive(Clone, Debug)]
pub enum WalkFlux {
    /// A precomputed finite-rank flux matrix on a sub-window; exact when its boundary residual vanishes.
    Windowed(WindowedFlux),
    /// `U* P U - P` assembled from kernel applications.
    Kernel,
}

#[derive(Clone, Debug)]
pub struct WalkModel {
    pub coins: CoinPair,
    pub lead: LeadProjection,
    pub window: WalkWindow,
    pub flux: WalkFlux,
}

/// Copies the amplitudes of `v` on `from` into a zero state on `to`.
pub fn embed(v: &[C64], from: &WalkWindow, to: &WalkWindow) -> Result<Vec<C64>> {
    let mut out = vec![ZERO; to.dim()];
    for (i, a) in v.iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let (s, spin) = from.site_of(i);
        let j = to.index(s, spin).ok_or_else(|| Error::WindowTooSmall(format!("site {s:?} not in target window")))?;
        out[j] = *a;
    }
    Ok(out)
}

impl EvolutionModel for WalkModel {
    fn dim(&self) -> usize {
        self.window.dim()
    }

    fn check_padding(&self, psi0: &[C64], steps: usize) -> Result<()> {
        let Some((x0, x1, y0, y1)) = self.window.support_box(psi0, 0.0) else { return Ok(()) };
        let s = steps as i64 + 1;
        let w = &self.window;
        if x0 - s < w.x_min || x1 + s > w.x_max || y0 - s < w.y_min || y1 + s > w.y_max {
            return Err(Error::InsufficientPadding(format!(
                "support box [{x0}, {x1}] x [{y0}, {y1}] needs {s} sites of padding inside [{}, {}] x [{}, {}]",
                w.x_min, w.x_max, w.y_min, w.y_max
            )));
        }
        Ok(())
    }

    fn step(&self, v: &[C64]) -> Result<Vec<C64>> {
        apply_kernel(&self.coins, &self.window, v, false)
    }

    fn p_expect(&self, v: &[C64]) -> f64 {
        self.lead.expectation(&self.window, v)
    }

    fn flux_apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        match &self.flux {
            WalkFlux::Windowed(f) => {
                if f.boundary_residual > EXACT_RESIDUAL {
                    return Err(Error::BoundaryResidual { residual: f.boundary_residual, tolerance: EXACT_RESIDUAL });
                }
                let mut restricted = vec![ZERO; f.window.dim()];
                for (i, slot) in restricted.iter_mut().enumerate() {
                    let (s, spin) = f.window.site_of(i);
                    if let Some(j) = self.window.index(s, spin) {
                        *slot = v[j];
                    }
                }
                embed(&f.apply(&restricted), &f.window, &self.window)
            }
            WalkFlux::Kernel => {
                let u = self.step(v)?;
                let pu = self.lead.apply(&self.window, &u);
                let back = apply_kernel(&self.coins, &self.window, &pu, true)?;
                let pv = self.lead.apply(&self.window, v);
                Ok(back.iter().zip(&pv).map(|(a, b)| a - b).collect())
            }
        }
    }

    fn x_of(&self, i: usize) -> f64 {
        self.window.site_of(i).0 .0 as f64
    }
}

/// Incoming subspace of the walk on `region`: states `v` with `U^n v in Ran P`
/// for `1 <= n <= n_steps`, orthogonal to those already in `Ran P` at `n = 0`.
///
/// Returned vectors live on `region`.
pub fn incoming_subspace(
    coins: &CoinPair,
    lead: &LeadProjection,
    region: &WalkWindow,
    n_steps: usize,
    cutoff: f64,
) -> Result<Vec<Vec<C64>>> {
    let pad = n_steps as i64 + 2;
    let big = WalkWindow::new(region.x_min - pad, region.x_max + pad, region.y_min - pad, region.y_max + pad)?;
    let d = region.dim();
    // Gram matrices of the orbit leaks P_perp U^n e_j, summed over n >= 1 and over n >= 0
    let mut gram_late = ComplexMatrix::zeros(d, d);
    let mut gram_now = ComplexMatrix::zeros(d, d);
    let mut states: Vec<Vec<C64>> = (0..d)
        .map(|j| {
            let (s, spin) = region.site_of(j);
            big.basis(s, spin)
        })
        .collect::<Result<_>>()?;
    for n in 0..=n_steps {
        if n > 0 {
            for v in states.iter_mut() {
                *v = apply_kernel(coins, &big, v, false)?;
            }
        }
        let mut by_index: BTreeMap<usize, Vec<(usize, C64)>> = BTreeMap::new();
        for (j, v) in states.iter().enumerate() {
            for (i, a) in v.iter().enumerate() {
                let (s, spin) = big.site_of(i);
                if *a != ZERO && !lead.contains(s, spin) {
                    by_index.entry(i).or_default().push((j, *a));
                }
            }
        }
        let target = if n == 0 { &mut gram_now } else { &mut gram_late };
        for entries in by_index.values() {
            for &(j, a) in entries {
                for &(k, b) in entries {
                    target[(j, k)] += a.conj() * b;
                }
            }
        }
    }
    let gram_all = &gram_now + &gram_late;
    let kernel = |g: &ComplexMatrix| -> Result<Vec<Vec<C64>>> {
        let e = hermitian_eig(g)?;
        Ok((0..d).filter(|&k| e.eigenvalues[k] <= cutoff).map(|k| e.eigenvector(k)).collect())
    };
    let eventually = kernel(&gram_late)?;
    let forever = kernel(&gram_all)?;
    // orthogonal complement of `forever` inside `eventually`
    let mut projected = Vec::new();
    for v in &eventually {
        let mut w = v.clone();
        for f in &forever {
            let c = inner(f, &w);
            for (a, b) in w.iter_mut().zip(f) {
                *a -= c * b;
            }
        }
        if norm(&w) > 1e-6 {
            projected.push(w);
        }
    }
    if projected.is_empty() {
        return Ok(projected);
    }
    orthonormal_span(&projected, 1e-6)
}

/// Evolution of each incoming vector under the given coins, with the entry
/// time and fitted lead velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurrentRun {
    pub trace: EvolutionTrace,
    /// First step from which the whole state sits in the decoupled part of the lead.
    pub entry_step: Option<usize>,
    pub velocity: Option<f64>,
    /// `max_{t >= 1} |<P>_t - 1|`.
    pub p_deviation_after_entry: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurrentDemo {
    pub dim_incoming: usize,
    pub runs: Vec<EdgeCurrentRun>,
}

/// Evolves every incoming vector of the walk for `steps` steps. `decoupled_from`
/// is the first `x` from which both lead rows are decoupled.
pub fn edge_current_demo(
    coins: &CoinPair,
    lead: &LeadProjection,
    steps: usize,
    decoupled_from: i64,
    flux: &WindowedFlux,
) -> Result<EdgeCurrentDemo> {
    let region = WalkWindow::new(-6, 6, -3, 3)?;
    let incoming = incoming_subspace(coins, lead, &region, 12, 1e-9)?;
    let pad = steps as i64 + 2;
    let window = WalkWindow::new(region.x_min - pad, region.x_max + pad, region.y_min - pad, region.y_max + pad)?;
    let model = WalkModel { coins: coins.clone(), lead: *lead, window, flux: WalkFlux::Windowed(flux.clone()) };
    let mut runs = Vec::new();
    for v in &incoming {
        let psi0 = embed(v, &region, &window)?;
        let mut psi = psi0.clone();
        let mut entry = None;
        for t in 0..=steps {
            let in_lead = psi.iter().enumerate().all(|(i, a)| {
                let ((x, _), spin) = window.site_of(i);
                a.norm() <= 1e-13 || (lead.contains(window.site_of(i).0, spin) && x >= decoupled_from)
            });
            if in_lead {
                entry = Some(t);
                break;
            }
            if t < steps {
                psi = model.step(&psi)?;
            }
        }
        let trace = evolve(&model, &psi0, steps)?;
        let velocity = entry.and_then(|t0| fit_velocity(&trace, t0));
        let dev = trace.rows.iter().filter(|r| r.t >= 1).map(|r| (r.p_expect - 1.0).abs()).fold(0.0, f64::max);
        runs.push(EdgeCurrentRun { trace, entry_step: entry, velocity, p_deviation_after_entry: dev });
    }
    Ok(EdgeCurrentDemo { dim_incoming: incoming.len(), runs })
}

// ---------------------------------------------------------------------------
// network

#[derive(Clone, Debug)]
pub struct NetworkModel {
    pub field: ScatteringField,
    pub window: Window,
    pub plus: Vec<bool>,
    pub blocks: FluxBlocks,
}

impl NetworkModel {
    pub fn new(field: ScatteringField, window: Window, partition: &SidePartition, blocks: FluxBlocks) -> Result<Self> {
        let plus = window.ruby_vertices.iter().map(|&x| partition.is_plus(x)).collect::<Result<Vec<_>>>()?;
        Ok(NetworkModel { field, window, plus, blocks })
    }

    pub fn basis(&self, x: LatticeCoord) -> Result<Vec<C64>> {
        let i = self.window.ruby_index(x).ok_or(Error::NotRuby { a: x.a, b: x.b })?;
        let mut v = vec![ZERO; self.window.num_ruby()];
        v[i] = C64::new(1.0, 0.0);
        Ok(v)
    }
}

impl EvolutionModel for NetworkModel {
    fn dim(&self) -> usize {
        self.window.num_ruby()
    }

    /// Propagates the support set `steps` times along nonzero scattering
    /// amplitudes, requiring every reached vertex to have its head in the window.
    fn check_padding(&self, psi0: &[C64], steps: usize) -> Result<()> {
        let mut support: BTreeSet<LatticeCoord> =
            psi0.iter().enumerate().filter(|(_, a)| **a != ZERO).map(|(i, _)| self.window.ruby_vertices[i]).collect();
        for t in 0..=steps {
            let mut next = BTreeSet::new();
            for &x in &support {
                let z = head_of(x)?;
                if !self.window.contains_kagome(z) {
                    return Err(Error::InsufficientPadding(format!("support reaches {x} after {t} steps")));
                }
                let io = io_pairs(z)?;
                let col = usize::from(io.incoming[1] == x);
                let s = self.field.get(z).block();
                next.extend((0..2).filter(|&row| s[(row, col)] != ZERO).map(|row| io.outgoing[row]));
            }
            support = next;
        }
        Ok(())
    }

    fn step(&self, v: &[C64]) -> Result<Vec<C64>> {
        apply_step_dense(&self.field, &self.window, v, false)
    }

    fn p_expect(&self, v: &[C64]) -> f64 {
        v.iter().zip(&self.plus).filter(|(_, p)| **p).map(|(a, _)| a.norm_sqr()).sum()
    }

    fn flux_apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.blocks.apply(&self.window, v)
    }

    fn x_of(&self, i: usize) -> f64 {
        let x = self.window.ruby_vertices[i];
        (x.a - x.b) as f64 / 24.0
    }
}

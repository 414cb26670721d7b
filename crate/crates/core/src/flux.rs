//! The flux operator `Phi = U* P U - P`: exact 2x2 blocks for the network
//! model, a windowed Hermitian matrix for the walk, and the spectral data
//! built on them.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{io_pairs, LatticeCoord, Window};
use crate::linalg::{hermitian_eig, inner, matrix_norms, norm, orthonormal_span, svd, ComplexMatrix, C64, ZERO};
use crate::network::ScatteringField;
use crate::path::SidePartition;
use crate::walk::{kernel_entries, CoinPair, LeadProjection, Site, WalkWindow};

/// `Phi Q_z` in the ordered incoming basis of every window vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxBlocks {
    pub blocks: BTreeMap<LatticeCoord, ComplexMatrix>,
    /// Supremum of the tail block norms outside the window, when declared.
    pub tail_modulus: Option<f64>,
}

fn diag01(a: bool, b: bool) -> ComplexMatrix {
    let f = |x: bool| C64::new(x as u8 as f64, 0.0);
    ComplexMatrix::diagonal(&[f(a), f(b)])
}

pub fn cc_flux_block(s: &ComplexMatrix, p_in: [bool; 2], p_out: [bool; 2]) -> ComplexMatrix {
    let dh = diag01(p_out[0], p_out[1]);
    let d = diag01(p_in[0], p_in[1]);
    let b = &(&s.adjoint() * &dh) * s;
    let mut b = &b - &d;
    // exact Hermitian symmetrization of rounding
    let off = (b[(0, 1)] + b[(1, 0)].conj()) * 0.5;
    b[(0, 1)] = off;
    b[(1, 0)] = off.conj();
    b[(0, 0)] = C64::new(b[(0, 0)].re, 0.0);
    b[(1, 1)] = C64::new(b[(1, 1)].re, 0.0);
    b
}

pub fn cc_flux_blocks(field: &ScatteringField, partition: &SidePartition, window: &Window) -> Result<FluxBlocks> {
    let mut blocks = BTreeMap::new();
    for &z in &window.kagome_vertices {
        let io = io_pairs(z)?;
        let p_in = [partition.is_plus(io.incoming[0])?, partition.is_plus(io.incoming[1])?];
        let p_out = [partition.is_plus(io.outgoing[0])?, partition.is_plus(io.outgoing[1])?];
        let s = field.get(z);
        s.validate()?;
        blocks.insert(z, cc_flux_block(&s.block(), p_in, p_out));
    }
    Ok(FluxBlocks { blocks, tail_modulus: None })
}

impl FluxBlocks {
    pub fn with_tail(mut self, modulus: f64) -> Self {
        self.tail_modulus = Some(modulus);
        self
    }

    pub fn eigenvalues_of(&self, z: LatticeCoord) -> Result<Vec<f64>> {
        let b = self.blocks.get(&z).ok_or(Error::NotKagome { a: z.a, b: z.b })?;
        Ok(hermitian_eig(b)?.eigenvalues)
    }

    /// `Phi v` for a dense window state; amplitudes on Ruby vertices whose
    /// head is outside the window must vanish.
    pub fn apply(&self, window: &Window, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![ZERO; v.len()];
        let mut covered = vec![false; v.len()];
        for (&z, b) in &self.blocks {
            let io = io_pairs(z)?;
            let i = [window.ruby_index(io.incoming[0]), window.ruby_index(io.incoming[1])];
            let [Some(i0), Some(i1)] = i else { continue };
            covered[i0] = true;
            covered[i1] = true;
            out[i0] = b[(0, 0)] * v[i0] + b[(0, 1)] * v[i1];
            out[i1] = b[(1, 0)] * v[i0] + b[(1, 1)] * v[i1];
        }
        if let Some(k) = (0..v.len()).find(|&k| !covered[k] && v[k] != ZERO) {
            return Err(Error::SupportAtBoundary { site: window.ruby_vertices[k].to_string() });
        }
        Ok(out)
    }
}

/// Windowed flux matrix of the walk.
#[derive(Clone, Debug)]
pub struct WindowedFlux {
    pub window: WalkWindow,
    pub matrix: ComplexMatrix,
    /// Largest entry coupling the outer ring of the window or reaching outside it.
    pub boundary_residual: f64,
}

impl WindowedFlux {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(v)
    }

    /// Eigenvectors with eigenvalue within `tol` of `sign` (+1 or -1).
    pub fn unit_eigenvectors(&self, sign: f64, tol: f64) -> Result<Vec<Vec<C64>>> {
        let e = hermitian_eig(&self.matrix)?;
        Ok((0..e.eigenvalues.len())
            .filter(|&k| (e.eigenvalues[k] - sign).abs() <= tol)
            .map(|k| e.eigenvector(k))
            .collect())
    }

    /// `||Phi^2 P - P Phi^2||_F`.
    pub fn commutator_defect(&self, lead: &LeadProjection) -> f64 {
        let p: Vec<bool> = (0..self.window.dim())
            .map(|i| {
                let (s, spin) = self.window.site_of(i);
                lead.contains(s, spin)
            })
            .collect();
        let sq = &self.matrix * &self.matrix;
        let n = sq.rows();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if p[i] != p[j] {
                    acc += sq[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

const OFFSETS: [Site; 4] = [(1, 1), (-1, -1), (-1, 1), (1, -1)];

/// `Phi(a, b) = sum_c K(c,a)* P(c) K(c,b) - P(a) delta_ab` on the window.
pub fn qw_flux_matrix(coins: &CoinPair, lead: &LeadProjection, window: &WalkWindow) -> Result<WindowedFlux> {
    coins.validate()?;
    let n = window.dim();
    let mut m = ComplexMatrix::zeros(n, n);
    let mut outside: HashMap<(usize, Site, usize), C64> = HashMap::new();
    for y in window.y_min - 1..=window.y_max + 1 {
        for x in window.x_min - 1..=window.x_max + 1 {
            let c = (x, y);
            let sym = lead.symbol(c);
            if !sym[0] && !sym[1] {
                continue;
            }
            // rows of K(c, w) for the sources w = c - offset
            let sources: Vec<(Site, [[C64; 2]; 2])> = OFFSETS
                .iter()
                .enumerate()
                .map(|(k, &(dx, dy))| {
                    let w = (x - dx, y - dy);
                    (w, kernel_entries(coins, w)[k].1)
                })
                .collect();
            for (wa, ka) in &sources {
                for (wb, kb) in &sources {
                    let (ia, ib) = (window.site_index(*wa), window.site_index(*wb));
                    if ia.is_none() && ib.is_none() {
                        continue;
                    }
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut v = ZERO;
                            for s in 0..2 {
                                if sym[s] {
                                    v += ka[s][i].conj() * kb[s][j];
                                }
                            }
                            if v == ZERO {
                                continue;
                            }
                            match (ia, ib) {
                                (Some(a), Some(b)) => m[(2 * a + i, 2 * b + j)] += v,
                                (Some(a), None) => *outside.entry((2 * a + i, *wb, j)).or_insert(ZERO) += v,
                                (None, Some(b)) => *outside.entry((2 * b + j, *wa, i)).or_insert(ZERO) += v.conj(),
                                (None, None) => unreachable!(),
                            }
                        }
                    }
                }
            }
        }
    }
    for i in 0..n {
        let (s, spin) = window.site_of(i);
        if lead.contains(s, spin) {
            m[(i, i)] -= C64::new(1.0, 0.0);
        }
    }
    // drop rounding asymmetry
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    let mut residual = outside.values().map(|v| v.norm()).fold(0.0, f64::max);
    for i in 0..n {
        let (si, _) = window.site_of(i);
        for j in 0..n {
            let (sj, _) = window.site_of(j);
            if window.on_outer_ring(si) || window.on_outer_ring(sj) {
                residual = residual.max(m[(i, j)].norm());
            }
        }
    }
    Ok(WindowedFlux { window: *window, matrix: m, boundary_residual: residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub plus_count: usize,
    pub minus_count: usize,
    pub index: i64,
    /// `1 - max(|lambda|)` over eigenvalues not counted, and over the tail bound.
    pub gap: f64,
    pub tolerance: f64,
    /// The counted eigenvalues.
    pub unit_eigenvalues: Vec<f64>,
}

/// Spectral data a flux representation exposes to the index count.
pub trait FluxSpectrum {
    /// All eigenvalues of the represented part of `Phi`.
    fn spectrum(&self) -> Result<Vec<f64>>;
    /// Bound on `|lambda|` for the part outside the representation; errors
    /// when the representation is not trustworthy at `tol`.
    fn exterior_bound(&self, tol: f64) -> Result<f64>;
}

impl FluxSpectrum for FluxBlocks {
    fn spectrum(&self) -> Result<Vec<f64>> {
        let mut all = Vec::with_capacity(2 * self.blocks.len());
        for b in self.blocks.values() {
            all.extend(hermitian_eig(b)?.eigenvalues);
        }
        Ok(all)
    }

    fn exterior_bound(&self, _tol: f64) -> Result<f64> {
        match self.tail_modulus {
            Some(c) if c < 1.0 => Ok(c),
            Some(c) => Err(Error::IndexUndefined { vertex: "tail".into(), modulus: c, bound: 1.0 }),
            None => Ok(0.0),
        }
    }
}

impl FluxSpectrum for WindowedFlux {
    fn spectrum(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eig(&self.matrix)?.eigenvalues)
    }

    fn exterior_bound(&self, tol: f64) -> Result<f64> {
        if self.boundary_residual > tol {
            return Err(Error::BoundaryResidual { residual: self.boundary_residual, tolerance: tol });
        }
        Ok(0.0)
    }
}

pub fn spectral_index(flux: &impl FluxSpectrum, tol: f64) -> Result<IndexResult> {
    let exterior = flux.exterior_bound(tol)?;
    let spectrum = flux.spectrum()?;
    count_unit_eigenvalues(&spectrum, exterior, tol)
}

pub fn count_unit_eigenvalues(spectrum: &[f64], exterior: f64, tol: f64) -> Result<IndexResult> {
    let (mut plus, mut minus) = (0, 0);
    let mut rest = exterior;
    let mut units = Vec::new();
    for &l in spectrum {
        if (l - 1.0).abs() <= tol {
            plus += 1;
            units.push(l);
        } else if (l + 1.0).abs() <= tol {
            minus += 1;
            units.push(l);
        } else {
            let a = l.abs();
            if a > 1.0 - 10.0 * tol && a < 1.0 - tol {
                return Err(Error::GapAmbiguity { eigenvalue: l });
            }
            rest = rest.max(a);
        }
    }
    Ok(IndexResult {
        plus_count: plus,
        minus_count: minus,
        index: plus as i64 - minus as i64,
        gap: 1.0 - rest,
        tolerance: tol,
        unit_eigenvalues: units,
    })
}

/// `(operator norm, trace norm)` of the block-diagonal flux.
pub fn flux_norms(flux: &FluxBlocks) -> Result<(f64, f64)> {
    if flux.tail_modulus.is_some_and(|c| c > 0.0) {
        return Err(Error::UnboundedSum);
    }
    let mut op = 0.0f64;
    let mut tr = 0.0;
    for b in flux.blocks.values() {
        let (o, t) = matrix_norms(b)?;
        op = op.max(o);
        tr += t;
    }
    Ok((op, tr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WanderingSubspace {
    pub vectors: Vec<Vec<C64>>,
    /// `max |<U^m v, U^n w>|` over `0 <= m < n <= n_steps`.
    pub orthogonality_residual: f64,
    /// `max ||(1 - P) U^n v||` over `1 <= n <= n_steps`.
    pub membership_residual: f64,
    pub n_steps: usize,
}

/// Orthonormalizes `vectors` and measures how far their forward orbit is
/// wandering and stays in `Ran P`.
pub fn wandering_extract(
    vectors: &[Vec<C64>],
    mut step: impl FnMut(&[C64]) -> Result<Vec<C64>>,
    project: impl Fn(&[C64]) -> Vec<C64>,
    n_steps: usize,
) -> Result<WanderingSubspace> {
    let vectors = if vectors.is_empty() { Vec::new() } else { orthonormal_span(vectors, 1e-10)? };
    let mut orbits: Vec<Vec<Vec<C64>>> = Vec::with_capacity(vectors.len());
    let mut membership = 0.0f64;
    for v in &vectors {
        let mut orbit = vec![v.clone()];
        for _ in 0..n_steps {
            let next = step(orbit.last().unwrap()).map_err(|e| match e {
                Error::SupportAtBoundary { site } => {
                    Error::InsufficientPadding(format!("orbit reaches {site} within {n_steps} steps"))
                }
                e => e,
            })?;
            let p = project(&next);
            let leak: Vec<C64> = next.iter().zip(&p).map(|(a, b)| a - b).collect();
            membership = membership.max(norm(&leak));
            orbit.push(next);
        }
        orbits.push(orbit);
    }
    let mut orth = 0.0f64;
    for a in &orbits {
        for b in &orbits {
            for m in 0..=n_steps {
                for n in m + 1..=n_steps {
                    orth = orth.max(inner(&a[m], &b[n]).norm());
                }
            }
        }
    }
    Ok(WanderingSubspace { vectors, orthogonality_residual: orth, membership_residual: membership, n_steps })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameters: Vec<f64>,
    pub results: Vec<IndexResult>,
    pub index: i64,
    pub min_gap: f64,
}

/// Evaluates the index along a parameter family; any failing sample becomes a
/// gap failure at that parameter, any change of index an index jump.
pub fn homotopy_sweep(parameters: &[f64], mut eval: impl FnMut(f64) -> Result<IndexResult>) -> Result<SweepResult> {
    if parameters.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut results: Vec<IndexResult> = Vec::with_capacity(parameters.len());
    for &s in parameters {
        let r = eval(s).map_err(|e| Error::HomotopyGapFailure { parameter: s, reason: e.to_string() })?;
        if r.gap <= 0.0 {
            return Err(Error::HomotopyGapFailure { parameter: s, reason: format!("gap {:.3e}", r.gap) });
        }
        if let Some(first) = results.first() {
            if first.index != r.index {
                return Err(Error::HomotopyIndexJump { first: first.index, found: r.index, parameter: s });
            }
        }
        results.push(r);
    }
    let min_gap = results.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    Ok(SweepResult { parameters: parameters.to_vec(), index: results[0].index, results, min_gap })
}

/// Kernel vectors of `P U P` (forward) and `P U* P` (backward) on the lead
/// truncated to `x_start..=x_max`, with localization tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FredholmCounts {
    pub forward_weights: Vec<f64>,
    pub backward_weights: Vec<f64>,
    pub forward_localized: Vec<bool>,
    pub backward_localized: Vec<bool>,
    /// Kernel vectors with inner-half weight in `[0.4, 0.6]`, excluded from the counts.
    pub ambiguous: usize,
    pub dim_ker_forward: usize,
    pub dim_ker_backward: usize,
}

impl FredholmCounts {
    pub fn localized_forward(&self) -> usize {
        self.forward_localized.iter().filter(|b| **b).count()
    }

    pub fn localized_backward(&self) -> usize {
        self.backward_localized.iter().filter(|b| **b).count()
    }

    pub fn index(&self) -> i64 {
        self.localized_backward() as i64 - self.localized_forward() as i64
    }
}

/// Inner-half weights of an orthonormal basis change that diagonalizes the
/// inner-half projector compressed to the span of `kernel`.
fn localization_weights(kernel: &[Vec<C64>], inner_mask: &[bool]) -> Result<Vec<f64>> {
    if kernel.is_empty() {
        return Ok(Vec::new());
    }
    let k = kernel.len();
    let h = ComplexMatrix::from_fn(k, k, |i, j| {
        kernel[i].iter().zip(&kernel[j]).zip(inner_mask).filter(|(_, m)| **m).map(|((a, b), _)| a.conj() * b).sum()
    });
    Ok(hermitian_eig(&h)?.eigenvalues)
}

pub fn fredholm_counts(coins: &CoinPair, lead: &LeadProjection, x_max: i64, tol: f64) -> Result<FredholmCounts> {
    let x0 = lead.x_start;
    if x_max < x0 + 3 {
        return Err(Error::WindowTooSmall(format!("lead window [{x0}, {x_max}]")));
    }
    let states: Vec<(Site, usize)> = (x0..=x_max).flat_map(|x| [((x, 0), 0), ((x, -1), 1)]).collect();
    let index: HashMap<(Site, usize), usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let n = states.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (j, &(w, spin)) in states.iter().enumerate() {
        for ((dx, dy), k) in kernel_entries(coins, w) {
            let c = (w.0 + dx, w.1 + dy);
            for s in 0..2 {
                if let Some(&i) = index.get(&(c, s)) {
                    m[(i, j)] += k[s][spin];
                }
            }
        }
    }
    let d = svd(&m);
    let mid = x0 + (x_max - x0) / 2;
    let mask: Vec<bool> = states.iter().map(|((x, _), _)| *x <= mid).collect();
    let small: Vec<usize> = (0..n).filter(|&k| d.singular_values[k] < tol).collect();
    let fwd: Vec<Vec<C64>> = small.iter().map(|&k| d.v.column(k)).collect();
    let bwd: Vec<Vec<C64>> = small.iter().map(|&k| d.u.column(k)).collect();
    let fw = localization_weights(&fwd, &mask)?;
    let bw = localization_weights(&bwd, &mask)?;
    let tag = |w: &[f64]| -> (Vec<bool>, usize) {
        let amb = w.iter().filter(|x| (0.4..=0.6).contains(*x)).count();
        (w.iter().map(|x| *x > 0.6).collect(), amb)
    };
    let (forward_localized, fa) = tag(&fw);
    let (backward_localized, ba) = tag(&bw);
    Ok(FredholmCounts {
        dim_ker_forward: fw.len(),
        dim_ker_backward: bw.len(),
        forward_weights: fw,
        backward_weights: bw,
        forward_localized,
        backward_localized,
        ambiguous: fa + ba,
    })
}

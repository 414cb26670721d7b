//! Config-driven front end: JSON experiment configs in, JSON result records
//! and CSV traces out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    edge_current_demo, embed, evolve, fit_velocity, EvolutionTrace, NetworkModel, WalkFlux, WalkModel,
};
use crate::error::{Error, Result};
use crate::flux::{
    cc_flux_blocks, flux_norms, fredholm_counts, homotopy_sweep, qw_flux_matrix, spectral_index, wandering_extract,
    FluxBlocks, WindowedFlux,
};
use crate::lattice::{build_window, io_pairs, is_kagome, LatticeCoord, WeightClass, Window};
use crate::linalg::{inner, C64};
use crate::network::{hadamard_field, ScatteringField, ScatteringParams};
use crate::path::{
    canonical_path, check_tail_regularity, combinatorial_index, side_partition, validate, AdmissiblePath, PathShape,
    SidePartition, TailTag, ValidatedPath,
};
use crate::walk::{
    apply_kernel, fully_decoupled, remark_perturbation, CoinField, CoinPair, CoinParams, LeadProjection, WalkWindow,
};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
const DEFAULT_EXTENT: [i64; 4] = [-9, 9, -6, 5];
const DEFAULT_TAIL_BOUND: f64 = 0.9;
/// Components below this modulus are omitted from printed vectors.
const PRINT_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cc,
    Qwalk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Hadamard,
    Decoupled,
    RemarkPerturbation,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// Network window radius in unit cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<i64>,
    /// Walk window `[x_min, x_max, y_min, y_max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<[i64; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Preset {
        name: Preset,
    },
    Constant {
        params: ScatteringParams,
    },
    PerSite(ScatteringField),
    /// Generic parameters with `lo <= |r| <= hi` on every window vertex; needs a seed.
    Random {
        lo: f64,
        hi: f64,
        default: ScatteringParams,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoinSpec {
    Preset {
        name: Preset,
    },
    Constant {
        c1: CoinParams,
        c2: CoinParams,
    },
    PerSite(CoinPair),
    /// Generic coins on a box (inclusive ranges) with generic defaults; needs a seed.
    Random {
        x_range: [i64; 2],
        y_range: [i64; 2],
    },
}

fn default_tail_bound() -> f64 {
    DEFAULT_TAIL_BOUND
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathSpec {
    Canonical {
        shape: PathShape,
        #[serde(default)]
        shift: [i64; 2],
        #[serde(default = "default_tail_bound")]
        tail_bound: f64,
    },
    Centers {
        centers: Vec<[i64; 2]>,
        left_tail: TailTag,
        right_tail: TailTag,
        #[serde(default = "default_tail_bound")]
        tail_bound: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinTag {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl SpinTag {
    fn index(self) -> usize {
        match self {
            SpinTag::Plus => 0,
            SpinTag::Minus => 1,
        }
    }

    fn from_index(i: usize) -> Self {
        if i == 0 {
            SpinTag::Plus
        } else {
            SpinTag::Minus
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    Walk {
        site: [i64; 2],
        spin: SpinTag,
    },
    Ruby {
        vertex: [i64; 2],
    },
    /// Every vector of the walk's incoming subspace, one trace each.
    Incoming,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Evolution steps (default 50) or orbit length for wandering checks (default 20).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Homotopy samples (default 11).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Lead length used for the Fredholm kernel counts (default 16).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead_length: Option<i64>,
    /// First `x` from which both lead rows are decoupled (default 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_x: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coins: Option<CoinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead: Option<LeadProjection>,
    #[serde(default)]
    pub params: CommandParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn tolerance(&self) -> f64 {
        self.params.tolerance.unwrap_or(DEFAULT_TOLERANCE)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CcIndex,
    CcNorms,
    QwIndex,
    QwWandering,
    QwEvolve,
    CcEvolve,
    Sweep,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CcIndex => "cc-index",
            Command::CcNorms => "cc-norms",
            Command::QwIndex => "qw-index",
            Command::QwWandering => "qw-wandering",
            Command::QwEvolve => "qw-evolve",
            Command::CcEvolve => "cc-evolve",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandEcho {
    pub name: String,
    /// Effective config, with command-line overrides applied.
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: CommandEcho,
    pub config_hash: String,
    pub results: Value,
    pub residuals: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

/// A record plus the auxiliary files (name, contents) it refers to.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub files: Vec<(String, String)>,
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(&self.record)?;
        text.push('\n');
        std::fs::write(dir.join("result.json"), text)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::BadRadius(_)
        | Error::BadTailBound(_)
        | Error::InvalidParams { .. }
        | Error::NotALatticePoint { .. }
        | Error::NotKagome { .. }
        | Error::NotRuby { .. }
        | Error::WindowTooSmall(_)
        | Error::PathNotAdjacent { .. }
        | Error::PathSelfIntersecting { .. }
        | Error::PathEndpoint(_)
        | Error::PathLeavesWindow { .. }
        | Error::PathTooShort(_)
        | Error::TailMismatch { .. } => 2,
        Error::GapAmbiguity { .. } => 4,
        Error::SeparationFailure(_) => 5,
        Error::Io(_) => 1,
        _ => 3,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "netflux",
    version,
    about = "Flux indices and edge currents for the network model and the split-step walk"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for result.json and CSV traces; results go to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Unit-eigenvalue tolerance [default: 1e-8, or the config's value].
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Seed for generic coins and fields, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs the parsed command line and returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    let result = ExperimentConfig::load(&cli.config).and_then(|mut cfg| {
        if let Some(t) = cli.tolerance {
            cfg.params.tolerance = Some(t);
        }
        if let Some(s) = cli.seed {
            cfg.seed = Some(s);
        }
        let out = run(cli.command, &cfg)?;
        if let Some(dir) = &cli.out {
            out.write(dir)?;
        }
        println!("{}", serde_json::to_string_pretty(&out.record)?);
        Ok(())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Payload {
    results: Value,
    residuals: BTreeMap<String, f64>,
    files: Vec<(String, String)>,
}

pub fn run(command: Command, config: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let mut config = config.clone();
    config.params.tolerance = Some(config.tolerance());
    let tol = config.tolerance();
    if !(tol > 0.0 && tol < 0.1) {
        return Err(Error::Config(format!("tolerance must lie in (0, 0.1), got {tol}")));
    }
    let payload = match (command, config.model) {
        (Command::Validate, ModelKind::Cc) => cc_validate(&config)?,
        (Command::Validate, ModelKind::Qwalk) => qw_validate(&config)?,
        (Command::CcIndex, ModelKind::Cc) => cc_index(&config)?,
        (Command::CcNorms, ModelKind::Cc) => cc_norms(&config)?,
        (Command::CcEvolve, ModelKind::Cc) => cc_evolve(&config)?,
        (Command::Sweep, ModelKind::Cc) => cc_sweep(&config)?,
        (Command::QwIndex, ModelKind::Qwalk) => qw_index(&config)?,
        (Command::QwWandering, ModelKind::Qwalk) => qw_wandering(&config)?,
        (Command::QwEvolve, ModelKind::Qwalk) => qw_evolve(&config)?,
        (Command::Sweep, ModelKind::Qwalk) => qw_sweep(&config)?,
        (c, m) => return Err(Error::Config(format!("command {} does not apply to model {m:?}", c.name()))),
    };
    let record = ResultRecord {
        command: CommandEcho { name: command.name().to_string(), config: config.clone() },
        config_hash: config.hash(),
        results: payload.results,
        residuals: payload.residuals,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput { record, files: payload.files })
}

fn lc([a, b]: [i64; 2]) -> LatticeCoord {
    LatticeCoord::new(a, b)
}

fn seeded(config: &ExperimentConfig, what: &str) -> Result<ChaCha8Rng> {
    let seed = config.seed.ok_or_else(|| Error::Config(format!("{what} needs a seed")))?;
    Ok(ChaCha8Rng::seed_from_u64(seed))
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    Ok(serde_json::to_value(x)?)
}

// ---------------------------------------------------------------------------
// network

struct CcSetup {
    window: Window,
    field: ScatteringField,
}

struct CcPath {
    path: ValidatedPath,
    partition: SidePartition,
}

fn cc_setup(config: &ExperimentConfig) -> Result<CcSetup> {
    let radius =
        config.window.as_ref().and_then(|w| w.radius).ok_or_else(|| Error::Config("window.radius missing".into()))?;
    let window = build_window(radius)?;
    let spec = config.field.clone().unwrap_or(FieldSpec::Preset { name: Preset::Hadamard });
    let field = build_field(&spec, &window, config)?;
    Ok(CcSetup { window, field })
}

fn build_field(spec: &FieldSpec, window: &Window, config: &ExperimentConfig) -> Result<ScatteringField> {
    let field = match spec {
        FieldSpec::Preset { name: Preset::Hadamard } => hadamard_field(window),
        FieldSpec::Preset { name: Preset::Decoupled } => ScatteringField::constant(ScatteringParams::IDENTITY),
        FieldSpec::Preset { name: Preset::RemarkPerturbation } => {
            return Err(Error::Config("preset remark-perturbation is a walk preset".into()))
        }
        FieldSpec::Constant { params } => ScatteringField::constant(*params),
        FieldSpec::PerSite(f) => {
            for &z in f.values.keys() {
                if !is_kagome(z) {
                    return Err(Error::NotKagome { a: z.a, b: z.b });
                }
                if !window.contains_kagome(z) {
                    return Err(Error::Config(format!("field entry {z} lies outside the window")));
                }
            }
            f.clone()
        }
        FieldSpec::Random { lo, hi, default } => {
            if !(0.0 <= *lo && lo <= hi && *hi <= 1.0) {
                return Err(Error::Config(format!("random field needs 0 <= lo <= hi <= 1, got [{lo}, {hi}]")));
            }
            ScatteringField::random(window, &mut seeded(config, "a random field")?, *lo, *hi, *default)
        }
    };
    field.validate()?;
    Ok(field)
}

fn cc_path(config: &ExperimentConfig, window: &Window) -> Result<CcPath> {
    let spec = config.path.as_ref().ok_or_else(|| Error::Config("path missing".into()))?;
    let raw = match spec {
        PathSpec::Canonical { shape, shift, tail_bound } => canonical_path(*shape, window, lc(*shift), *tail_bound)?,
        PathSpec::Centers { centers, left_tail, right_tail, tail_bound } => AdmissiblePath {
            centers: centers.iter().copied().map(lc).collect(),
            left_tail: *left_tail,
            right_tail: *right_tail,
            tail_bound: *tail_bound,
        },
    };
    let path = validate(&raw, window)?;
    let partition = side_partition(&path, window)?;
    Ok(CcPath { path, partition })
}

fn cc_blocks(field: &ScatteringField, path: &CcPath, window: &Window) -> Result<FluxBlocks> {
    let tail = check_tail_regularity(&path.path.path, field, window)?;
    Ok(cc_flux_blocks(field, &path.partition, window)?.with_tail(tail))
}

fn path_summary(path: &CcPath) -> Value {
    json!({
        "centers": path.path.path.centers.iter().map(|c| [c.a, c.b]).collect::<Vec<_>>(),
        "left_tail": path.path.path.left_tail,
        "right_tail": path.path.path.right_tail,
        "tail_bound": path.path.path.tail_bound,
        "segments": path.path.segments,
        "bisected_edges": path.path.bisected.len(),
        "plus_vertices": path.partition.plus_set().len(),
    })
}

fn cc_validate(config: &ExperimentConfig) -> Result<Payload> {
    let s = cc_setup(config)?;
    let mut results = json!({
        "model": "cc",
        "kagome_vertices": s.window.kagome_vertices.len(),
        "ruby_vertices": s.window.num_ruby(),
    });
    if config.path.is_some() {
        let p = cc_path(config, &s.window)?;
        results["path"] = path_summary(&p);
    }
    Ok(Payload { results, residuals: BTreeMap::new(), files: Vec::new() })
}

fn cc_index(config: &ExperimentConfig) -> Result<Payload> {
    let tol = config.tolerance();
    let s = cc_setup(config)?;
    let p = cc_path(config, &s.window)?;
    let cert = combinatorial_index(&p.path, &p.partition, &s.field, &s.window)?;
    let blocks = cc_blocks(&s.field, &p, &s.window)?;
    let spec = spectral_index(&blocks, tol)?;
    let contributions: Vec<Value> = cert
        .per_vertex
        .iter()
        .map(|(z, &(out, inc))| json!({ "vertex": [z.a, z.b], "plus_out": out, "plus_in": inc, "contribution": out as i64 - inc as i64 }))
        .collect();
    let deviation = spec.unit_eigenvalues.iter().map(|l| (l.abs() - 1.0).abs()).fold(0.0, f64::max);
    let results = json!({
        "index": cert.index,
        "spectral_index": spec.index,
        "agree": cert.index == spec.index,
        "gap": spec.gap,
        "plus_count": spec.plus_count,
        "minus_count": spec.minus_count,
        "unit_eigenvalues": spec.unit_eigenvalues,
        "tail_regularity": cert.regularity,
        "contributions": contributions,
        "path": path_summary(&p),
    });
    let residuals = BTreeMap::from([("unit_eigenvalue_deviation".to_string(), deviation)]);
    Ok(Payload { results, residuals, files: Vec::new() })
}

fn cc_norms(config: &ExperimentConfig) -> Result<Payload> {
    let s = cc_setup(config)?;
    let p = cc_path(config, &s.window)?;
    let blocks = cc_blocks(&s.field, &p, &s.window)?;
    let (op, trace) = flux_norms(&blocks)?;
    let mut results = json!({ "operator_norm": op, "trace_norm": trace, "path": path_summary(&p) });
    let mut residuals = BTreeMap::new();
    if p.path.segments.iter().all(|seg| seg.class == WeightClass::R) {
        // on an R-path every contributing block squares to |r_z|^2
        let moduli: Vec<f64> = p
            .path
            .bisected
            .iter()
            .map(|b| b.link.bisects.via)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|z| s.field.get(z).r.norm())
            .collect();
        let max_r = moduli.iter().copied().fold(0.0, f64::max);
        let two_sum = 2.0 * moduli.iter().sum::<f64>();
        results["r_path"] = json!({ "max_r": max_r, "two_sum_r": two_sum });
        residuals.insert("operator_norm_vs_max_r".into(), (op - max_r).abs());
        residuals.insert("trace_norm_vs_two_sum_r".into(), (trace - two_sum).abs());
    }
    Ok(Payload { results, residuals, files: Vec::new() })
}

fn cc_evolve(config: &ExperimentConfig) -> Result<Payload> {
    let s = cc_setup(config)?;
    let p = cc_path(config, &s.window)?;
    let blocks = cc_flux_blocks(&s.field, &p.partition, &s.window)?;
    let steps = config.params.steps.unwrap_or(50);
    let start = match &config.params.initial {
        None => io_pairs(LatticeCoord::new(0, 0))?.incoming[0],
        Some(InitialState::Ruby { vertex }) => lc(*vertex),
        Some(other) => return Err(Error::Config(format!("initial state {other:?} does not apply to the network"))),
    };
    let model = NetworkModel::new(s.field, s.window, &p.partition, blocks)?;
    let psi0 = model.basis(start)?;
    let trace = evolve(&model, &psi0, steps)?;
    let results = json!({
        "initial": [start.a, start.b],
        "steps": steps,
        "final": trace.rows.last(),
        "velocity": fit_velocity(&trace, steps / 2),
    });
    let residuals = BTreeMap::from([
        ("telescoping".to_string(), trace.telescoping_residual),
        ("norm_drift".to_string(), trace.norm_drift),
    ]);
    Ok(Payload { results, residuals, files: vec![("trace.csv".into(), trace.to_csv())] })
}

fn sweep_samples(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let n = config.params.samples.unwrap_or(11);
    if n < 2 {
        return Err(Error::Config(format!("sweep needs at least 2 samples, got {n}")));
    }
    Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect())
}

/// Homotopy from the configured field (s = 0) to the Hadamard field (s = 1).
fn cc_sweep(config: &ExperimentConfig) -> Result<Payload> {
    let tol = config.tolerance();
    let s = cc_setup(config)?;
    let p = cc_path(config, &s.window)?;
    let target = hadamard_field(&s.window);
    let cert = combinatorial_index(&p.path, &p.partition, &s.field, &s.window)?;
    let params = sweep_samples(config)?;
    let sweep = homotopy_sweep(&params, |t| {
        let mut field = ScatteringField::constant(s.field.default.interpolate(&target.default, t));
        for &z in &s.window.kagome_vertices {
            field.set(z, s.field.get(z).interpolate(target.get(z), t));
        }
        spectral_index(&cc_blocks(&field, &p, &s.window)?, tol)
    })?;
    let results = json!({ "index": sweep.index, "combinatorial_index": cert.index, "min_gap": sweep.min_gap, "sweep": to_value(&sweep)? });
    Ok(Payload { results, residuals: BTreeMap::new(), files: Vec::new() })
}

// ---------------------------------------------------------------------------
// walk

struct QwSetup {
    coins: CoinPair,
    lead: LeadProjection,
    window: WalkWindow,
}

fn qw_setup(config: &ExperimentConfig) -> Result<QwSetup> {
    let [x0, x1, y0, y1] = config.window.as_ref().and_then(|w| w.extent).unwrap_or(DEFAULT_EXTENT);
    let window = WalkWindow::new(x0, x1, y0, y1)?;
    let spec = config.coins.as_ref().ok_or_else(|| Error::Config("coins missing".into()))?;
    let coins = build_coins(spec, &window, config)?;
    Ok(QwSetup { coins, lead: config.lead.unwrap_or_default(), window })
}

fn hadamard_coin() -> CoinParams {
    CoinParams::real_angle(std::f64::consts::FRAC_PI_4)
}

fn build_coins(spec: &CoinSpec, window: &WalkWindow, config: &ExperimentConfig) -> Result<CoinPair> {
    let coins = match spec {
        CoinSpec::Preset { name: Preset::Hadamard } => CoinPair::constant(hadamard_coin(), hadamard_coin()),
        CoinSpec::Preset { name: Preset::Decoupled } => {
            let base = match config.seed {
                Some(seed) => CoinPair::random_box(&mut ChaCha8Rng::seed_from_u64(seed), -8..=8, -4..=4),
                None => CoinPair::constant(hadamard_coin(), hadamard_coin()),
            };
            fully_decoupled(&base)
        }
        CoinSpec::Preset { name: Preset::RemarkPerturbation } => {
            remark_perturbation(&mut seeded(config, "preset remark-perturbation")?)
        }
        CoinSpec::Constant { c1, c2 } => CoinPair::constant(*c1, *c2),
        CoinSpec::PerSite(pair) => {
            for f in [&pair.c1, &pair.c2] {
                if let Some(s) = f.sites.keys().find(|s| !window.contains(**s)) {
                    return Err(Error::Config(format!("coin entry {s:?} lies outside the window")));
                }
            }
            pair.clone()
        }
        CoinSpec::Random { x_range, y_range } => {
            let mut rng = seeded(config, "random coins")?;
            CoinPair::random_box(&mut rng, x_range[0]..=x_range[1], y_range[0]..=y_range[1])
        }
    };
    coins.validate()?;
    Ok(coins)
}

fn qw_validate(config: &ExperimentConfig) -> Result<Payload> {
    let s = qw_setup(config)?;
    let results = json!({
        "model": "qwalk",
        "extent": [s.window.x_min, s.window.x_max, s.window.y_min, s.window.y_max],
        "dim": s.window.dim(),
        "lead_x_start": s.lead.x_start,
        "explicit_coin_sites": [s.coins.c1.sites.len(), s.coins.c2.sites.len()],
    });
    Ok(Payload { results, residuals: BTreeMap::new(), files: Vec::new() })
}

fn qw_flux(s: &QwSetup) -> Result<WindowedFlux> {
    qw_flux_matrix(&s.coins, &s.lead, &s.window)
}

fn qw_index(config: &ExperimentConfig) -> Result<Payload> {
    let tol = config.tolerance();
    let s = qw_setup(config)?;
    let flux = qw_flux(&s)?;
    let spec = spectral_index(&flux, tol)?;
    let x_max = s.lead.x_start + config.params.lead_length.unwrap_or(16);
    let fred = fredholm_counts(&s.coins, &s.lead, x_max, tol)?;
    let sign = match (spec.plus_count, spec.minus_count) {
        (0, 0) => Value::Null,
        (_, 0) => json!(1),
        (0, _) => json!(-1),
        _ => json!("mixed"),
    };
    let results = json!({
        "index": spec.index,
        "gap": spec.gap,
        "plus_count": spec.plus_count,
        "minus_count": spec.minus_count,
        "unit_eigenvalues": spec.unit_eigenvalues,
        "unit_eigenvalue_sign": sign,
        "fredholm": {
            "dim_ker_forward": fred.dim_ker_forward,
            "dim_ker_backward": fred.dim_ker_backward,
            "localized_forward": fred.localized_forward(),
            "localized_backward": fred.localized_backward(),
            "ambiguous": fred.ambiguous,
            "index": fred.index(),
        },
    });
    let residuals = BTreeMap::from([
        ("boundary".to_string(), flux.boundary_residual),
        ("phi_squared_commutator".to_string(), flux.commutator_defect(&s.lead)),
    ]);
    Ok(Payload { results, residuals, files: Vec::new() })
}

fn sparse(window: &WalkWindow, v: &[C64]) -> Vec<Value> {
    v.iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > PRINT_CUTOFF)
        .map(|(i, a)| {
            let ((x, y), spin) = window.site_of(i);
            json!({ "site": [x, y], "spin": SpinTag::from_index(spin), "re": a.re, "im": a.im })
        })
        .collect()
}

fn padded(w: &WalkWindow, pad: i64) -> Result<WalkWindow> {
    WalkWindow::new(w.x_min - pad, w.x_max + pad, w.y_min - pad, w.y_max + pad)
}

/// The `+1` eigenvectors of the flux (or `-1` for negative index), their
/// wandering residuals, and the incoming subspace with its residuals.
fn qw_wandering(config: &ExperimentConfig) -> Result<Payload> {
    let tol = config.tolerance();
    let s = qw_setup(config)?;
    let flux = qw_flux(&s)?;
    let spec = spectral_index(&flux, tol)?;
    let sign = if spec.index < 0 { -1.0 } else { 1.0 };
    let n_steps = config.params.steps.unwrap_or(20);
    let big = padded(&s.window, n_steps as i64 + 2)?;
    let step = |v: &[C64]| apply_kernel(&s.coins, &big, v, false);
    let project = |v: &[C64]| s.lead.apply(&big, v);

    let eig: Vec<Vec<C64>> =
        flux.unit_eigenvectors(sign, tol)?.iter().map(|v| embed(v, &s.window, &big)).collect::<Result<_>>()?;
    let eigen = wandering_extract(&eig, step, project, n_steps)?;
    let probe = big.basis((-1, -1), 1)?;
    let overlap: f64 = eigen.vectors.iter().map(|v| inner(v, &probe).norm_sqr()).sum();

    let region = WalkWindow::new(-6, 6, -3, 3)?;
    let incoming: Vec<Vec<C64>> = crate::dynamics::incoming_subspace(&s.coins, &s.lead, &region, 12, 1e-9)?
        .iter()
        .map(|v| embed(v, &region, &big))
        .collect::<Result<_>>()?;
    let inc = wandering_extract(&incoming, step, project, n_steps)?;

    let results = json!({
        "index": spec.index,
        "eigenspace": {
            "sign": sign,
            "dim": eigen.vectors.len(),
            "overlap_with_minus_one_minus_one_down": overlap,
            "vectors": eigen.vectors.iter().map(|v| sparse(&big, v)).collect::<Vec<_>>(),
        },
        "incoming": {
            "dim": inc.vectors.len(),
            "vectors": inc.vectors.iter().map(|v| sparse(&big, v)).collect::<Vec<_>>(),
        },
    });
    let residuals = BTreeMap::from([
        ("boundary".to_string(), flux.boundary_residual),
        ("eigenspace_orthogonality".to_string(), eigen.orthogonality_residual),
        ("eigenspace_membership".to_string(), eigen.membership_residual),
        ("incoming_orthogonality".to_string(), inc.orthogonality_residual),
        ("incoming_membership".to_string(), inc.membership_residual),
    ]);
    Ok(Payload { results, residuals, files: Vec::new() })
}

fn trace_summary(trace: &EvolutionTrace) -> Value {
    json!({
        "final": trace.rows.last(),
        "telescoping_residual": trace.telescoping_residual,
        "norm_drift": trace.norm_drift,
    })
}

fn qw_evolve(config: &ExperimentConfig) -> Result<Payload> {
    let s = qw_setup(config)?;
    let flux = qw_flux(&s)?;
    let steps = config.params.steps.unwrap_or(50);
    let initial = config.params.initial.clone().unwrap_or(InitialState::Walk { site: [-1, 0], spin: SpinTag::Plus });
    match initial {
        InitialState::Incoming => {
            let entry_x = config.params.entry_x.unwrap_or(3);
            let demo = edge_current_demo(&s.coins, &s.lead, steps, entry_x, &flux)?;
            let mut files = Vec::new();
            let mut runs = Vec::new();
            let mut residuals = BTreeMap::new();
            for (k, run) in demo.runs.iter().enumerate() {
                files.push((format!("trace_{k}.csv"), run.trace.to_csv()));
                runs.push(json!({
                    "entry_step": run.entry_step,
                    "velocity": run.velocity,
                    "p_deviation_after_entry": run.p_deviation_after_entry,
                    "summary": trace_summary(&run.trace),
                }));
                residuals.insert(format!("telescoping_{k}"), run.trace.telescoping_residual);
                residuals.insert(format!("p_deviation_{k}"), run.p_deviation_after_entry);
            }
            let results = json!({ "dim_incoming": demo.dim_incoming, "steps": steps, "runs": runs });
            Ok(Payload { results, residuals, files })
        }
        InitialState::Walk { site, spin } => {
            let window = padded(&s.window, steps as i64 + 2)?;
            let model = WalkModel { coins: s.coins.clone(), lead: s.lead, window, flux: WalkFlux::Windowed(flux) };
            let psi0 = window.basis((site[0], site[1]), spin.index())?;
            let trace = evolve(&model, &psi0, steps)?;
            let results = json!({
                "initial": { "site": site, "spin": spin },
                "steps": steps,
                "velocity": fit_velocity(&trace, steps / 2),
                "summary": trace_summary(&trace),
            });
            let residuals = BTreeMap::from([
                ("telescoping".to_string(), trace.telescoping_residual),
                ("norm_drift".to_string(), trace.norm_drift),
            ]);
            Ok(Payload { results, residuals, files: vec![("trace.csv".into(), trace.to_csv())] })
        }
        InitialState::Ruby { .. } => Err(Error::Config("a Ruby initial state does not apply to the walk".into())),
    }
}

/// Homotopy moving every explicitly listed coin with `r, t != 0` toward the
/// Hadamard coin; decoupled coins, defaults and row rules stay fixed, so each
/// sample is a compact perturbation.
fn qw_sweep(config: &ExperimentConfig) -> Result<Payload> {
    let tol = config.tolerance();
    let s = qw_setup(config)?;
    let params = sweep_samples(config)?;
    let h = hadamard_coin();
    let morph = |f: &CoinField, t: f64| CoinField {
        sites: f
            .sites
            .iter()
            .map(|(&k, p)| (k, if p.r.norm() > 0.0 && p.t.norm() > 0.0 { p.interpolate(&h, t) } else { *p }))
            .collect(),
        rows: f.rows.clone(),
        default: f.default,
    };
    let sweep = homotopy_sweep(&params, |t| {
        let coins = CoinPair { c1: morph(&s.coins.c1, t), c2: morph(&s.coins.c2, t) };
        spectral_index(&qw_flux_matrix(&coins, &s.lead, &s.window)?, tol)
    })?;
    let results = json!({ "index": sweep.index, "min_gap": sweep.min_gap, "sweep": to_value(&sweep)? });
    Ok(Payload { results, residuals: BTreeMap::new(), files: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(s: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(s).unwrap()
    }

    #[test]
    fn config_echo_round_trips() {
        let c = cfg(r#"{"model":"cc","window":{"radius":4},"field":{"kind":"preset","name":"hadamard"},
            "path":{"kind":"canonical","shape":"single-switch"},"params":{"steps":5}}"#);
        let out = run(Command::Validate, &c).unwrap();
        let echo = serde_json::to_string(&out.record.command.config).unwrap();
        let back = ExperimentConfig::from_json(&echo).unwrap();
        assert_eq!(back, out.record.command.config);
        assert_eq!(back.hash(), out.record.config_hash);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = ExperimentConfig::from_json(r#"{"model":"cc","windw":{}}"#).unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn hadamard_single_switch_index() {
        let c = cfg(r#"{"model":"cc","window":{"radius":6},"field":{"kind":"preset","name":"hadamard"},
            "path":{"kind":"canonical","shape":"single-switch"}}"#);
        let r = run(Command::CcIndex, &c).unwrap().record.results;
        assert_eq!(r["index"].as_i64().unwrap().abs(), 1);
        assert_eq!(r["agree"], json!(true));
        assert!(r["gap"].as_f64().unwrap() >= 0.29);
    }

    #[test]
    fn seedless_generic_coins_are_rejected() {
        let c = cfg(r#"{"model":"qwalk","coins":{"kind":"preset","name":"remark-perturbation"}}"#);
        assert_eq!(exit_code(&run(Command::QwIndex, &c).unwrap_err()), 2);
    }

    #[test]
    fn model_mismatch_is_config_error() {
        let c = cfg(r#"{"model":"qwalk","coins":{"kind":"preset","name":"hadamard"}}"#);
        assert_eq!(exit_code(&run(Command::CcIndex, &c).unwrap_err()), 2);
    }
}

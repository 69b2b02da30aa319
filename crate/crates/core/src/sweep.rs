//! Phase-diagram sweeps over J2, transition detection and the gradient
//! variance study.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::objective::{ModelParams, Objective, OrderParameters, QhmftOptimum};
use crate::optimizer::{self, OptimizerConfig, Status};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Up => "up",
            Self::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    Up,
    Down,
    Both,
}

impl Directions {
    pub fn list(&self) -> Vec<Direction> {
        match self {
            Self::Up => vec![Direction::Up],
            Self::Down => vec![Direction::Down],
            Self::Both => vec![Direction::Up, Direction::Down],
        }
    }
}

impl std::str::FromStr for Directions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Self::Up),
            "down" => Ok(Self::Down),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Converged,
    /// Stopped early with vanishing magnetization; the energy is the best
    /// seen on a flat manifold of nearly degenerate states.
    ParamagnetNonconverged,
    MaxIterations,
    LineSearchFailure,
    Failed,
}

impl PointStatus {
    pub fn is_acceptable(&self) -> bool {
        matches!(self, Self::Converged | Self::ParamagnetNonconverged)
    }
}

/// One phase-diagram point. The oracle writes the same schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub j2: f64,
    pub energy: f64,
    /// Hellmann-Feynman derivative.
    pub de_dj2: f64,
    /// Finite difference along the chain.
    pub de_dj2_grid: Option<f64>,
    pub m_neel: f64,
    pub m_caf_x: f64,
    pub m_caf_y: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub iterations: usize,
    pub status: PointStatus,
    pub direction: Direction,
    pub seed: Option<u64>,
}

impl SweepRecord {
    pub fn failed(j2: f64, direction: Direction) -> Self {
        Self {
            j2,
            energy: f64::NAN,
            de_dj2: f64::NAN,
            de_dj2_grid: None,
            m_neel: f64::NAN,
            m_caf_x: f64::NAN,
            m_caf_y: f64::NAN,
            d_x: f64::NAN,
            d_y: f64::NAN,
            iterations: 0,
            status: PointStatus::Failed,
            direction,
            seed: None,
        }
    }

    pub fn order(&self) -> OrderParameters {
        OrderParameters { m_neel: self.m_neel, m_caf_x: self.m_caf_x, m_caf_y: self.m_caf_y, d_x: self.d_x, d_y: self.d_y }
    }

    pub fn m_caf(&self) -> f64 {
        self.m_caf_x.max(self.m_caf_y)
    }

    fn from_optimum(j2: f64, opt: &QhmftOptimum, direction: Direction, seed: Option<u64>, vanish: f64) -> Self {
        let status = match opt.minimum.status() {
            Status::Converged => PointStatus::Converged,
            _ if opt.order.max_magnetization() < vanish => PointStatus::ParamagnetNonconverged,
            Status::MaxIterations => PointStatus::MaxIterations,
            Status::LineSearchFailure => PointStatus::LineSearchFailure,
        };
        Self {
            j2,
            energy: opt.report.e_total,
            de_dj2: opt.de_dj2,
            de_dj2_grid: None,
            m_neel: opt.order.m_neel,
            m_caf_x: opt.order.m_caf_x,
            m_caf_y: opt.order.m_caf_y,
            d_x: opt.order.d_x,
            d_y: opt.order.d_y,
            iterations: opt.minimum.iterations,
            status,
            direction,
            seed,
        }
    }
}

/// Fills `de_dj2_grid` by central differences (one-sided at the ends) on a
/// chain sorted by `j2`.
pub fn fill_grid_derivative(chain: &mut [SweepRecord]) {
    let n = chain.len();
    if n < 2 {
        return;
    }
    for k in 0..n {
        let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
        let d = (chain[b].energy - chain[a].energy) / (chain[b].j2 - chain[a].j2);
        chain[k].de_dj2_grid = d.is_finite().then_some(d);
    }
}

pub fn write_records_csv<W: Write>(records: &[SweepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Thresholds of transition detection and phase classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Order-parameter jump between adjacent points.
    pub order_jump: f64,
    /// Jump of the Hellmann-Feynman dE/dJ2 between adjacent points.
    pub derivative_jump: f64,
    /// Magnetizations below this count as vanished.
    pub vanishing: f64,
    /// Magnetization needed to call an ordered phase.
    pub ordered: f64,
    /// Minimum dimer magnitude of a plaquette solid.
    pub dimer_min: f64,
    /// Maximum relative difference of `d_x`, `d_y` in a plaquette solid.
    pub dimer_anisotropy: f64,
    /// Candidates closer than this many grid steps are merged.
    pub merge_steps: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            order_jump: 0.05,
            derivative_jump: 0.1,
            vanishing: 1e-3,
            ordered: 0.05,
            dimer_min: 0.01,
            dimer_anisotropy: 0.2,
            merge_steps: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Neel,
    Caf,
    PlaquetteVbs,
    Undetermined,
}

pub fn classify_phase(r: &SweepRecord, th: &Thresholds) -> Phase {
    let caf = r.m_caf();
    if r.m_neel > th.ordered && r.m_neel > caf {
        return Phase::Neel;
    }
    if caf > th.ordered && caf > r.m_neel {
        return Phase::Caf;
    }
    let scale = r.d_x.abs().max(r.d_y.abs());
    if r.m_neel < th.vanishing
        && caf < th.vanishing
        && r.d_x.abs() > th.dimer_min
        && r.d_y.abs() > th.dimer_min
        && (r.d_x - r.d_y).abs() / scale < th.dimer_anisotropy
    {
        return Phase::PlaquetteVbs;
    }
    Phase::Undetermined
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    FirstOrder,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Signal {
    OrderJump { parameter: String, size: f64 },
    DerivativeJump { size: f64 },
    Vanishing { parameter: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub location: f64,
    pub kind: TransitionKind,
    pub signal: Signal,
    /// Locations seen by the up and down chains, when both saw it.
    pub hysteresis: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub transitions: Vec<Transition>,
    pub step: f64,
    pub thresholds: Thresholds,
}

impl TransitionReport {
    pub fn of_kind(&self, kind: TransitionKind) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(move |t| t.kind == kind)
    }
}

type OrderFn = fn(&SweepRecord) -> f64;
const ORDER_PARAMETERS: [(&str, OrderFn); 2] = [("m_neel", |r| r.m_neel), ("m_caf", |r| r.m_caf())];

/// Value at `j` predicted by extending `v²` linearly through `(j0, v0)` and
/// `(j1, v1)`, clipped at zero as for a mean-field square-root onset.
fn squared_extrapolation(j0: f64, v0: f64, j1: f64, v1: f64, j: f64) -> f64 {
    let (a, b) = (v0 * v0, v1 * v1);
    (a + (a - b) / (j0 - j1) * (j - j0)).max(0.0).sqrt()
}

/// Where the same line reaches zero, if it is decreasing towards `j0`.
fn squared_zero(j0: f64, v0: f64, j1: f64, v1: f64) -> Option<f64> {
    let (a, b) = (v0 * v0, v1 * v1);
    (b > a).then(|| j0 - a * (j0 - j1) / (a - b))
}

/// Where the linear interpolants of two competing branches cross between the
/// adjacent points `a` and `b`, when `a` and `b` come from different chains
/// and each chain also has a record at the other point.
fn branch_crossing(all: &[SweepRecord], a: &SweepRecord, b: &SweepRecord) -> Option<f64> {
    if a.direction == b.direction {
        return None;
    }
    let at = |dir: Direction, j2: f64| all.iter().find(|r| r.direction == dir && (r.j2 - j2).abs() < 1e-9).map(|r| r.energy);
    let da = a.energy - at(b.direction, a.j2)?;
    let db = at(a.direction, b.j2)? - b.energy;
    (da <= 0.0 && db >= 0.0 && db - da > 0.0).then(|| a.j2 + (b.j2 - a.j2) * (-da) / (db - da))
}

/// Candidate transitions between adjacent points of `curve`. With `branches`
/// (all records of the sweep), first-order jumps between two chains are placed
/// at the energy crossing of the chains instead of the interval midpoint.
fn candidates(curve: &[&SweepRecord], branches: Option<&[SweepRecord]>, th: &Thresholds) -> Vec<Transition> {
    let mut out = Vec::new();
    let mid = |k: usize| 0.5 * (curve[k].j2 + curve[k + 1].j2);
    let first_order_at = |k: usize| branches.and_then(|all| branch_crossing(all, curve[k], curve[k + 1])).unwrap_or(mid(k));
    for k in 0..curve.len().saturating_sub(1) {
        let (a, b) = (curve[k], curve[k + 1]);
        if !(a.energy.is_finite() && b.energy.is_finite()) {
            continue;
        }
        let dd = (b.de_dj2 - a.de_dj2).abs();
        if dd > th.derivative_jump {
            out.push(Transition {
                location: first_order_at(k),
                kind: TransitionKind::FirstOrder,
                signal: Signal::DerivativeJump { size: dd },
                hysteresis: None,
            });
        }
        for (name, f) in ORDER_PARAMETERS {
            let (va, vb) = (f(a), f(b));
            // larger side next to the step, the point behind it, and the other side
            let (p0, p1, other) =
                if va > vb { (k, k.checked_sub(1), k + 1) } else { (k + 1, Some(k + 2).filter(|&q| q < curve.len()), k) };
            let line = p1.map(|p1| (curve[p0].j2, f(curve[p0]), curve[p1].j2, f(curve[p1])));
            let jump = (vb - va).abs();
            if jump > th.order_jump {
                let predicted = line.map(|(j0, v0, j1, v1)| squared_extrapolation(j0, v0, j1, v1, curve[other].j2));
                let follows_onset = predicted.is_some_and(|p| (p - f(curve[other])).abs() <= th.order_jump);
                if !follows_onset {
                    out.push(Transition {
                        location: first_order_at(k),
                        kind: TransitionKind::FirstOrder,
                        signal: Signal::OrderJump { parameter: name.into(), size: jump },
                        hysteresis: None,
                    });
                    continue;
                }
            }
            // the nonzero side must grow into an ordered phase, not hover at the threshold
            let ordered_run = || {
                let run: Box<dyn Iterator<Item = usize>> =
                    if va > vb { Box::new((0..=k).rev()) } else { Box::new(k + 1..curve.len()) };
                run.map(|q| f(curve[q])).take_while(|&v| v >= th.vanishing).any(|v| v > th.ordered)
            };
            if (va >= th.vanishing) != (vb >= th.vanishing) && ordered_run() {
                let zero = line.and_then(|(j0, v0, j1, v1)| squared_zero(j0, v0, j1, v1));
                out.push(Transition {
                    location: zero.unwrap_or(mid(k)).clamp(a.j2, b.j2),
                    kind: TransitionKind::Continuous,
                    signal: Signal::Vanishing { parameter: name.into() },
                    hysteresis: None,
                });
            }
        }
    }
    out
}

fn merge(mut found: Vec<Transition>, radius: f64) -> Vec<Transition> {
    found.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut groups: Vec<Vec<Transition>> = Vec::new();
    for t in found {
        match groups.last_mut() {
            Some(g) if t.location - g.last().unwrap().location <= radius + 1e-12 => g.push(t),
            _ => groups.push(vec![t]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let strength = |t: &Transition| match &t.signal {
                Signal::OrderJump { size, .. } | Signal::DerivativeJump { size } => *size,
                Signal::Vanishing { .. } => 0.0,
            };
            g.iter()
                .filter(|t| t.kind == TransitionKind::FirstOrder)
                .max_by(|a, b| strength(a).total_cmp(&strength(b)))
                .unwrap_or(&g[0])
                .clone()
        })
        .collect()
}

fn grid_step(js: &[f64]) -> f64 {
    js.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 1e-12).fold(f64::INFINITY, f64::min)
}

/// Lowest-energy record at every `j2`, sorted.
pub fn min_energy_curve(records: &[SweepRecord]) -> Vec<&SweepRecord> {
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.j2.total_cmp(&b.j2));
    let mut out: Vec<&SweepRecord> = Vec::new();
    for r in sorted {
        match out.last_mut() {
            Some(last) if (last.j2 - r.j2).abs() < 1e-9 => {
                if r.energy < last.energy || !last.energy.is_finite() {
                    *last = r;
                }
            }
            _ => out.push(r),
        }
    }
    out
}

/// Locates and classifies transitions on the lowest-energy curve; per-direction
/// chains supply hysteresis windows.
pub fn detect_transitions(records: &[SweepRecord], th: &Thresholds) -> Result<TransitionReport> {
    let curve = min_energy_curve(records);
    if curve.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: curve.len() });
    }
    let js: Vec<f64> = curve.iter().map(|r| r.j2).collect();
    let step = grid_step(&js);
    let radius = th.merge_steps * step;
    let mut transitions = merge(candidates(&curve, Some(records), th), radius);

    let chain_hits = |dir: Direction| -> Vec<f64> {
        let mut chain: Vec<&SweepRecord> = records.iter().filter(|r| r.direction == dir).collect();
        chain.sort_by(|a, b| a.j2.total_cmp(&b.j2));
        merge(candidates(&chain, None, th), radius).into_iter().map(|t| t.location).collect()
    };
    let (up, down) = (chain_hits(Direction::Up), chain_hits(Direction::Down));
    // each chain jump belongs to the closest reported transition, within a cap
    let window = (10.0 * step).max(0.2);
    let locations: Vec<f64> = transitions.iter().map(|t| t.location).collect();
    let owner = |h: f64| (0..locations.len()).min_by(|&a, &b| (locations[a] - h).abs().total_cmp(&(locations[b] - h).abs()));
    let nearest = |hits: &[f64], i: usize| {
        let x = locations[i];
        hits.iter()
            .copied()
            .filter(|&h| (h - x).abs() <= window && owner(h) == Some(i))
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
    };
    for (i, t) in transitions.iter_mut().enumerate() {
        if let (Some(u), Some(d)) = (nearest(&up, i), nearest(&down, i)) {
            t.hysteresis = Some((u.min(d), u.max(d)));
        }
    }
    Ok(TransitionReport { transitions, step, thresholds: *th })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub l: usize,
    pub m: usize,
    pub tied: bool,
    pub j1: f64,
    pub j2_min: f64,
    pub j2_max: f64,
    pub step: f64,
    pub directions: Directions,
    /// Random restarts at the starting extreme of each chain.
    pub extreme_restarts: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub thresholds: Thresholds,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            l: 2,
            m: 2,
            tied: false,
            j1: 1.0,
            j2_min: 0.0,
            j2_max: 1.0,
            step: 0.01,
            directions: Directions::Both,
            extreme_restarts: 10,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        if !(self.j2_min <= self.j2_max) {
            return Err(Error::Config(format!("empty J2 range [{}, {}]", self.j2_min, self.j2_max)));
        }
        if self.extreme_restarts == 0 {
            return Err(Error::Config("extreme_restarts must be at least 1".into()));
        }
        ModelParams::new(self.j1, self.j2_min)?;
        self.optimizer.validate()
    }

    /// Grid points from `j2_min` to `j2_max` inclusive, rounded to 1e-10.
    pub fn grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(make_grid(self.j2_min, self.j2_max, self.step))
    }
}

pub fn make_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| ((lo + k as f64 * step) * 1e10).round() / 1e10).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    config: SweepConfig,
    direction: Direction,
    index: usize,
    params: Vec<f64>,
    record: SweepRecord,
}

fn checkpoint_path(dir: &Path, direction: Direction, index: usize) -> PathBuf {
    dir.join(format!("{}_{index:04}.json", direction.label()))
}

fn load_checkpoint(dir: &Path, config: &SweepConfig, direction: Direction, index: usize) -> Result<Option<Checkpoint>> {
    let path = checkpoint_path(dir, direction, index);
    if !path.exists() {
        return Ok(None);
    }
    let cp: Checkpoint = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(&path)?))?;
    if cp.config != *config {
        return Err(Error::Config(format!("checkpoint {} was written by a different configuration", path.display())));
    }
    Ok(Some(cp))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub version: String,
    pub config: SweepConfig,
    pub grid_points: usize,
    pub resumed_points: usize,
    pub failures: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Up chain then down chain, each in grid order.
    pub records: Vec<SweepRecord>,
    /// Optimal parameters, parallel to `records`.
    pub params: Vec<Vec<f64>>,
    pub metadata: SweepMetadata,
}

struct ChainOutput {
    records: Vec<SweepRecord>,
    params: Vec<Vec<f64>>,
    failures: Vec<String>,
    resumed: usize,
}

fn run_chain(
    config: &SweepConfig,
    base: &Objective,
    grid: &[f64],
    dir: Direction,
    checkpoints: Option<&Path>,
) -> Result<ChainOutput> {
    let order: Vec<usize> = match dir {
        Direction::Up => (0..grid.len()).collect(),
        Direction::Down => (0..grid.len()).rev().collect(),
    };
    let vanish = config.thresholds.vanishing;
    let mut out = ChainOutput { records: Vec::new(), params: Vec::new(), failures: Vec::new(), resumed: 0 };
    let mut warm: Option<Vec<f64>> = None;
    let mut chain_seed = None;
    for &idx in &order {
        let j2 = grid[idx];
        if let Some(dir_path) = checkpoints {
            if let Some(cp) = load_checkpoint(dir_path, config, dir, idx)? {
                if cp.record.status != PointStatus::Failed {
                    warm = Some(cp.params.clone());
                }
                chain_seed = chain_seed.or(cp.record.seed);
                out.records.push(cp.record);
                out.params.push(cp.params);
                out.resumed += 1;
                continue;
            }
        }
        let objective = base.with_model(ModelParams::new(config.j1, j2)?);
        let (record, params) = match &warm {
            None => {
                let seed = rng::derive(config.seed, "extreme", dir as u64);
                let factory = || crate::objective::EnergyProblem::new(&objective, &config.optimizer);
                let ms = optimizer::multi_start(factory, config.extreme_restarts, seed, &config.optimizer)?;
                let best = ms.best().clone();
                chain_seed = best.trace.seed;
                let opt = objective.finish(best)?;
                (SweepRecord::from_optimum(j2, &opt, dir, chain_seed, vanish), opt.params)
            }
            Some(x0) => match objective.optimize(x0, &config.optimizer) {
                Ok(opt) => (SweepRecord::from_optimum(j2, &opt, dir, chain_seed, vanish), opt.params),
                Err(e) => {
                    out.failures.push(format!("{} J2={j2}: {e}", dir.label()));
                    let mut rec = SweepRecord::failed(j2, dir);
                    if let Ok(r) = objective.energy(x0) {
                        rec.energy = r.e_total;
                    }
                    rec.seed = chain_seed;
                    (rec, x0.clone())
                }
            },
        };
        if record.status != PointStatus::Failed {
            warm = Some(params.clone());
        }
        if let Some(dir_path) = checkpoints {
            let cp =
                Checkpoint { config: config.clone(), direction: dir, index: idx, params: params.clone(), record: record.clone() };
            let tmp = checkpoint_path(dir_path, dir, idx).with_extension("json.tmp");
            serde_json::to_writer(std::io::BufWriter::new(std::fs::File::create(&tmp)?), &cp)?;
            std::fs::rename(&tmp, checkpoint_path(dir_path, dir, idx))?;
        }
        out.records.push(record);
        out.params.push(params);
    }
    if dir == Direction::Down {
        out.records.reverse();
        out.params.reverse();
    }
    fill_grid_derivative(&mut out.records);
    Ok(out)
}

/// Runs the configured chains. With `checkpoints`, each finished point is
/// saved there and existing checkpoints are reused instead of recomputed.
pub fn run_sweep(config: &SweepConfig, checkpoints: Option<&Path>) -> Result<SweepOutcome> {
    let grid = config.grid()?;
    if let Some(dir) = checkpoints {
        std::fs::create_dir_all(dir)?;
    }
    #[cfg(not(target_arch = "wasm32"))]
    let start = std::time::Instant::now();
    let base = Objective::build(config.l, config.m, config.tied, config.j2_min)?;
    let base = base.with_model(ModelParams::new(config.j1, config.j2_min)?);
    let chains = crate::par_map(config.directions.list(), |dir| run_chain(config, &base, &grid, dir, checkpoints));
    let mut records = Vec::new();
    let mut params = Vec::new();
    let mut failures = Vec::new();
    let mut resumed = 0;
    for c in chains {
        let c = c?;
        records.extend(c.records);
        params.extend(c.params);
        failures.extend(c.failures);
        resumed += c.resumed;
    }
    #[cfg(not(target_arch = "wasm32"))]
    let wall_time_s = start.elapsed().as_secs_f64();
    #[cfg(target_arch = "wasm32")]
    let wall_time_s = 0.0;
    let metadata = SweepMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        grid_points: grid.len(),
        resumed_points: resumed,
        failures,
        wall_time_s,
    };
    Ok(SweepOutcome { records, params, metadata })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyScale {
    /// Energy per spin.
    PerSpin,
    /// Total energy of one cluster, `N` times the energy per spin.
    PerCluster,
}

impl std::str::FromStr for EnergyScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_spin" | "per-spin" => Ok(Self::PerSpin),
            "per_cluster" | "per-cluster" => Ok(Self::PerCluster),
            other => Err(Error::Config(format!("unknown energy scale '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceConfig {
    pub l: usize,
    pub m: usize,
    pub tied: bool,
    pub j2_values: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    /// Angles uniform on `(-init_width, init_width]`.
    pub init_width: f64,
    pub scale: EnergyScale,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self {
            l: 2,
            m: 2,
            tied: false,
            j2_values: vec![0.0, 0.5, 1.0],
            n_samples: 100,
            seed: 0,
            init_width: std::f64::consts::PI,
            scale: EnergyScale::PerSpin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub l: usize,
    pub tied: bool,
    pub n_sites: usize,
    pub j2: f64,
    pub n_params: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Sample variance of `∂E/∂θ_1` (first parameter of the first macro-layer)
/// over random initializations. Sample `i` uses the same angles at every J2.
pub fn variance_study(config: &VarianceConfig) -> Result<Vec<VariancePoint>> {
    if config.n_samples < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {}", config.n_samples)));
    }
    if !(config.init_width >= 0.0 && config.init_width.is_finite()) {
        return Err(Error::Config(format!("init_width must be finite and non-negative, got {}", config.init_width)));
    }
    let base = Objective::build(config.l, config.m, config.tied, 0.0)?;
    let n = base.geometry().n_sites();
    let factor = match config.scale {
        EnergyScale::PerSpin => 1.0,
        EnergyScale::PerCluster => n as f64,
    };
    let samples: Vec<Vec<f64>> = (0..config.n_samples)
        .map(|i| {
            optimizer::random_angles(&mut rng::stream(config.seed, "variance", i as u64), base.n_params(), config.init_width)
        })
        .collect();
    let mut out = Vec::new();
    for &j2 in &config.j2_values {
        let obj = base.with_model(ModelParams::j2(j2)?);
        let grads = crate::par_map(samples.clone(), |p| obj.gradient_adjoint(&p).map(|(_, g)| factor * g[0]));
        let grads = grads.into_iter().collect::<Result<Vec<f64>>>()?;
        let k = grads.len() as f64;
        let mean = grads.iter().sum::<f64>() / k;
        let variance = grads.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0);
        out.push(VariancePoint {
            l: config.l,
            tied: config.tied,
            n_sites: n,
            j2,
            n_params: base.n_params(),
            n_samples: config.n_samples,
            mean,
            variance,
        });
    }
    Ok(out)
}

pub fn write_variance_csv<W: Write>(points: &[VariancePoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in points {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(j2: f64, energy: f64, de: f64, m_neel: f64, m_caf: f64, dir: Direction) -> SweepRecord {
        SweepRecord {
            j2,
            energy,
            de_dj2: de,
            de_dj2_grid: None,
            m_neel,
            m_caf_x: m_caf,
            m_caf_y: 0.0,
            d_x: 0.2,
            d_y: 0.2,
            iterations: 1,
            status: PointStatus::Converged,
            direction: dir,
            seed: None,
        }
    }

    #[test]
    fn grid_is_inclusive_and_rounded() {
        let g = make_grid(0.0, 1.0, 0.05);
        assert_eq!(g.len(), 21);
        assert_eq!(g[6], 0.3);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(make_grid(0.5, 0.5, 0.01), vec![0.5]);
        let bad = SweepConfig { j2_min: 0.6, j2_max: 0.5, ..Default::default() };
        assert!(bad.grid().is_err());
        assert!(SweepConfig { step: 0.0, ..Default::default() }.grid().is_err());
    }

    #[test]
    fn constant_records_have_no_transitions() {
        let recs: Vec<_> = (0..10).map(|k| record(k as f64 * 0.1, -0.5, 0.2, 0.3, 0.0, Direction::Up)).collect();
        let rep = detect_transitions(&recs, &Thresholds::default()).unwrap();
        assert!(rep.transitions.is_empty());
    }

    #[test]
    fn too_few_points() {
        let recs: Vec<_> = (0..2).map(|k| record(k as f64, 0.0, 0.0, 0.0, 0.0, Direction::Up)).collect();
        assert!(matches!(detect_transitions(&recs, &Thresholds::default()), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn square_root_onset_is_continuous() {
        let recs: Vec<_> = (0..20)
            .map(|k| {
                let j = k as f64 * 0.01;
                let m = if j < 0.123 { (0.123 - j).sqrt() } else { 0.0 };
                record(j, -0.5, 0.1, m, 0.0, Direction::Up)
            })
            .collect();
        let rep = detect_transitions(&recs, &Thresholds::default()).unwrap();
        assert_eq!(rep.transitions.len(), 1);
        let t = &rep.transitions[0];
        assert_eq!(t.kind, TransitionKind::Continuous);
        assert!((t.location - 0.123).abs() < 0.01, "{t:?}");
    }

    #[test]
    fn step_onset_is_first_order_with_hysteresis() {
        let mut recs = Vec::new();
        for (dir, at) in [(Direction::Up, 0.7), (Direction::Down, 0.66)] {
            for k in 0..=100 {
                let j = k as f64 * 0.01;
                let caf = if j >= at { 0.4 } else { 0.0 };
                let e = if j >= at { -1.0 + 0.5 * j } else { -0.3 * j };
                let de = if j >= at { 0.5 } else { -0.3 };
                recs.push(record(j, e + if dir == Direction::Up { 0.0 } else { 1e-9 }, de, 0.0, caf, dir));
            }
        }
        let rep = detect_transitions(&recs, &Thresholds::default()).unwrap();
        let first: Vec<_> = rep.of_kind(TransitionKind::FirstOrder).collect();
        assert_eq!(first.len(), 1, "{rep:?}");
        let (lo, hi) = first[0].hysteresis.unwrap();
        assert!((lo - 0.655).abs() < 1e-9 && (hi - 0.695).abs() < 1e-9, "{lo} {hi}");
    }

    #[test]
    fn first_order_between_chains_sits_at_energy_crossing() {
        // ordered branch E = -0.8 J2 - 0.083, disordered branch E = -J2, crossing at 0.415
        let ordered = |j: f64| (-0.8 * j - 0.083, -0.8, 0.3);
        let disordered = |j: f64| (-j, -1.0, 0.0);
        let mut recs = Vec::new();
        for (dir, switch) in [(Direction::Up, 0.5), (Direction::Down, 0.3)] {
            for k in 0..=50 {
                let j = k as f64 * 0.02;
                let (e, de, m) = if j < switch { ordered(j) } else { disordered(j) };
                recs.push(record(j, e, de, m, 0.0, dir));
            }
        }
        let rep = detect_transitions(&recs, &Thresholds::default()).unwrap();
        assert_eq!(rep.transitions.len(), 1, "{rep:?}");
        let t = &rep.transitions[0];
        assert_eq!(t.kind, TransitionKind::FirstOrder);
        assert!((t.location - 0.415).abs() < 1e-9, "{t:?}");
        let (lo, hi) = t.hysteresis.unwrap();
        assert!((lo - 0.29).abs() < 1e-9 && (hi - 0.49).abs() < 1e-9, "{lo} {hi}");
    }

    #[test]
    fn magnetization_hovering_at_threshold_is_not_a_transition() {
        let recs: Vec<_> = (0..20)
            .map(|k| record(k as f64 * 0.02, -0.5, 0.1, 0.3, if k % 3 == 0 { 1.2e-3 } else { 0.8e-3 }, Direction::Up))
            .collect();
        let rep = detect_transitions(&recs, &Thresholds::default()).unwrap();
        assert!(rep.transitions.is_empty(), "{rep:?}");
    }

    #[test]
    fn phase_labels() {
        let th = Thresholds::default();
        assert_eq!(classify_phase(&record(0.0, 0.0, 0.0, 0.3, 0.0, Direction::Up), &th), Phase::Neel);
        assert_eq!(classify_phase(&record(0.0, 0.0, 0.0, 0.0, 0.3, Direction::Up), &th), Phase::Caf);
        assert_eq!(classify_phase(&record(0.0, 0.0, 0.0, 0.0, 0.0, Direction::Up), &th), Phase::PlaquetteVbs);
        let mut r = record(0.0, 0.0, 0.0, 0.01, 0.0, Direction::Up);
        assert_eq!(classify_phase(&r, &th), Phase::Undetermined);
        r.m_neel = 0.0;
        r.d_y = 0.1;
        assert_eq!(classify_phase(&r, &th), Phase::Undetermined);
    }

    #[test]
    fn csv_round_trip() {
        let mut recs = vec![record(0.1, -0.4, 0.3, 0.2, 0.0, Direction::Down)];
        recs[0].de_dj2_grid = Some(0.25);
        recs[0].seed = Some(42);
        recs.push(SweepRecord { energy: -0.3, de_dj2_grid: None, seed: None, ..recs[0].clone() });
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("j2,energy,de_dj2,de_dj2_grid,m_neel,m_caf_x,m_caf_y,d_x,d_y,iterations,status,direction,seed\n")
        );
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn zero_width_gives_zero_variance() {
        let cfg = VarianceConfig { init_width: 0.0, n_samples: 5, j2_values: vec![0.3], ..Default::default() };
        let v = variance_study(&cfg).unwrap();
        assert_eq!(v[0].variance, 0.0);
        assert!(variance_study(&VarianceConfig { n_samples: 1, ..Default::default() }).is_err());
    }
}

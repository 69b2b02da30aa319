//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! Circuit angles are periodic, so the minimizer runs unconstrained. Every
//! accepted step satisfies the sufficient-decrease condition, which makes the
//! sequence of accepted energies non-increasing.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::objective::OrderParameters;
use crate::rng;

/// A smooth function with gradient.
pub trait Problem {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the value.
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Observables recorded in the trace at each accepted iterate.
    fn observe(&mut self, _x: &[f64]) -> Option<OrderParameters> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Adjoint,
    FdForward,
    FdCentral,
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjoint" => Ok(Self::Adjoint),
            "fd_forward" | "fd-forward" => Ok(Self::FdForward),
            "fd_central" | "fd-central" => Ok(Self::FdCentral),
            other => Err(Error::Config(format!("unknown gradient mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_evaluations: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self { c1: 1e-4, c2: 0.9, max_evaluations: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Infinity-norm of the gradient.
    pub gradient_tolerance: f64,
    /// Relative decrease `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)`.
    pub energy_tolerance: f64,
    pub history_size: usize,
    pub line_search: LineSearchParams,
    pub gradient_mode: GradientMode,
    pub fd_delta: f64,
    /// Record order parameters at every iterate (costs one extra state
    /// evaluation per iteration).
    pub trace_observables: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-7,
            energy_tolerance: 1e-12,
            history_size: 10,
            line_search: LineSearchParams::default(),
            gradient_mode: GradientMode::Adjoint,
            fd_delta: 1e-10,
            trace_observables: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, v: f64| Err(Error::Config(format!("{k} must be positive, got {v}")));
        if !(self.gradient_tolerance > 0.0) {
            return bad("gradient_tolerance", self.gradient_tolerance);
        }
        if !(self.energy_tolerance > 0.0) {
            return bad("energy_tolerance", self.energy_tolerance);
        }
        if !(self.fd_delta > 0.0) {
            return bad("fd_delta", self.fd_delta);
        }
        if self.history_size == 0 || self.max_iterations == 0 {
            return Err(Error::Config("history_size and max_iterations must be at least 1".into()));
        }
        let ls = &self.line_search;
        if !(0.0 < ls.c1 && ls.c1 < ls.c2 && ls.c2 < 1.0) {
            return Err(Error::Config(format!("line search needs 0 < c1 < c2 < 1, got c1={} c2={}", ls.c1, ls.c2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub order: Option<OrderParameters>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
    pub status: Status,
    pub seed: Option<u64>,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

impl OptimizationTrace {
    /// CSV with columns `iteration,energy,grad_norm,m_neel,m_caf,d_x,d_y`;
    /// observables are empty when not recorded.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iteration", "energy", "grad_norm", "m_neel", "m_caf", "d_x", "d_y"])?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), format!("{:.15e}", r.energy), format!("{:.6e}", r.grad_norm)];
            match r.order {
                Some(o) => row.extend([o.m_neel, o.m_caf(), o.d_x, o.d_y].iter().map(|v| format!("{v:.12e}"))),
                None => row.extend(std::iter::repeat(String::new()).take(4)),
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub trace: OptimizationTrace,
}

impl Minimum {
    pub fn status(&self) -> Status {
        self.trace.status
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Counts evaluations and rejects non-finite values.
struct Counted<'a, P: Problem> {
    problem: &'a mut P,
    evaluations: usize,
    iteration: usize,
}

impl<P: Problem> Counted<'_, P> {
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
        self.evaluations += 1;
        let f = self.problem.evaluate(x, g)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { value: f, iteration: self.iteration });
        }
        Ok(f)
    }
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

/// Strong Wolfe line search (bracketing followed by zoom with safeguarded
/// cubic interpolation). Returns `None` if no acceptable step was found.
fn line_search<P: Problem>(
    p: &mut Counted<'_, P>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    dir: &[f64],
    alpha0: f64,
    params: &LineSearchParams,
) -> Result<Option<Point>> {
    let n = x.len();
    let mut trial = vec![0.0; n];
    let mut budget = params.max_evaluations;
    let mut evaluate = |p: &mut Counted<'_, P>, alpha: f64| -> Result<Point> {
        for k in 0..n {
            trial[k] = x[k] + alpha * dir[k];
        }
        let mut g = vec![0.0; n];
        let f = p.eval(&trial, &mut g)?;
        let slope = dot(&g, dir);
        Ok(Point { alpha, f, g, slope })
    };
    let armijo = |pt: &Point| pt.f <= f0 + params.c1 * pt.alpha * slope0;
    let curvature = |pt: &Point| pt.slope.abs() <= -params.c2 * slope0;

    let mut prev = Point { alpha: 0.0, f: f0, g: Vec::new(), slope: slope0 };
    let mut alpha = alpha0;
    let mut first = true;
    let (mut lo, mut hi) = loop {
        if budget == 0 {
            return Ok(None);
        }
        budget -= 1;
        let cur = evaluate(p, alpha)?;
        if !armijo(&cur) || (!first && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(&cur) {
            return Ok(Some(cur));
        }
        if cur.slope >= 0.0 {
            break (cur, prev);
        }
        first = false;
        alpha = 2.0 * cur.alpha;
        prev = cur;
    };

    while budget > 0 {
        budget -= 1;
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        if width <= 1e-16 * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let mut t = cubic_minimizer(&lo, &hi).unwrap_or(0.5 * (a + b));
        let (left, right) = (a.min(b), a.max(b));
        let margin = 0.1 * width;
        if !(t > left + margin && t < right - margin) {
            t = 0.5 * (a + b);
        }
        let cur = evaluate(p, t)?;
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // budget exhausted: fall back to the best sufficient-decrease point
    Ok((lo.alpha > 0.0 && lo.f < f0).then_some(lo))
}

fn cubic_minimizer(p: &Point, q: &Point) -> Option<f64> {
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let t = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / (q.slope - p.slope + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Minimizes `problem` from `x0`.
pub fn minimize<P: Problem>(problem: &mut P, x0: &[f64], config: &OptimizerConfig) -> Result<Minimum> {
    config.validate()?;
    if x0.len() != problem.dim() {
        return Err(Error::ParameterLength { expected: problem.dim(), got: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("initial point has non-finite entries".into()));
    }
    let clock = Clock::start();
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut p = Counted { problem, evaluations: 0, iteration: 0 };
    let mut f = p.eval(&x, &mut g)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.history_size);
    let mut records = Vec::new();
    let mut observe = |p: &mut Counted<'_, P>, it: usize, x: &[f64], f: f64, g: &[f64]| {
        let order = if config.trace_observables { p.problem.observe(x) } else { None };
        records.push(TraceRecord { iteration: it, energy: f, grad_norm: inf_norm(g), order });
    };
    observe(&mut p, 0, &x, f, &g);

    let mut status = Status::MaxIterations;
    let mut iterations = 0;
    let mut dir = vec![0.0; n];
    for it in 1..=config.max_iterations {
        if inf_norm(&g) <= config.gradient_tolerance {
            status = Status::Converged;
            break;
        }
        p.iteration = it;
        two_loop(&memory, &g, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            memory.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }

        let mut accepted = None;
        for attempt in 0..2 {
            let alpha0 = if memory.is_empty() { (1.0 / inf_norm(&dir)).min(1.0) } else { 1.0 };
            accepted = line_search(&mut p, &x, f, slope, &dir, alpha0, &config.line_search)?;
            if accepted.is_some() || attempt == 1 {
                break;
            }
            // restart once along steepest descent
            memory.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }
        let Some(step) = accepted else {
            status = Status::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = dir.iter().map(|d| step.alpha * d).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == config.history_size {
                memory.pop_front();
            }
            memory.push_back((s.clone(), y, 1.0 / sy));
        }
        let decrease = (f - step.f) / f.abs().max(step.f.abs()).max(1.0);
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        f = step.f;
        g = step.g;
        iterations = it;
        observe(&mut p, it, &x, f, &g);
        if inf_norm(&g) <= config.gradient_tolerance || decrease <= config.energy_tolerance {
            status = Status::Converged;
            break;
        }
    }

    let evaluations = p.evaluations;
    Ok(Minimum {
        grad_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        trace: OptimizationTrace { records, status, seed: None, evaluations, wall_time_s: clock.seconds() },
    })
}

/// `dir = -H g` from the stored curvature pairs.
fn two_loop(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64], dir: &mut [f64]) {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    dir.iter_mut().zip(&q).for_each(|(d, v)| *d = -v);
}

/// Uniform angles on `(-width, width]`.
pub fn random_angles<R: Rng>(rng: &mut R, n: usize, width: f64) -> Vec<f64> {
    (0..n).map(|_| width - 2.0 * width * rng.gen::<f64>()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiStart {
    pub best: usize,
    /// One entry per start, in start order; failed starts keep their error text.
    pub results: Vec<std::result::Result<Minimum, String>>,
}

impl MultiStart {
    pub fn best(&self) -> &Minimum {
        self.results[self.best].as_ref().expect("best start succeeded")
    }
}

/// Start point for a per-start seed: angles uniform on `(-π, π]`.
pub fn random_start(start_seed: u64, n: usize) -> Vec<f64> {
    random_angles(&mut rng::stream(start_seed, "init", 0), n, PI)
}

/// Runs `n_starts` minimizations, start `i` from
/// `random_start(rng::derive(seed, "multi_start", i))`. Restarts run in
/// parallel with the `parallel` feature; the outcome does not depend on
/// scheduling.
pub fn multi_start<P, F>(factory: F, n_starts: usize, seed: u64, config: &OptimizerConfig) -> Result<MultiStart>
where
    P: Problem,
    F: Fn() -> P + Sync + Send,
{
    if n_starts == 0 {
        return Err(Error::Config("n_starts must be at least 1".into()));
    }
    let results = crate::par_map((0..n_starts).collect(), |i| {
        let mut problem = factory();
        let start_seed = rng::derive(seed, "multi_start", i as u64);
        let x0 = random_start(start_seed, problem.dim());
        minimize(&mut problem, &x0, config)
            .map(|mut m| {
                m.trace.seed = Some(start_seed);
                m
            })
            .map_err(|e| e.to_string())
    });
    let best = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|m| (i, m.value)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Config(format!("all {n_starts} starts failed: {}", results[0].as_ref().unwrap_err())))?;
    Ok(MultiStart { best, results })
}

#[derive(Debug)]
pub struct ChainPoint {
    pub coupling: f64,
    pub result: Result<Minimum>,
}

/// Minimizes along a monotone coupling grid, seeding each point with the
/// previous optimum. A failing point is reported and the chain continues
/// from the last good optimum.
pub fn warm_start_chain<P, F>(family: F, grid: &[f64], x_init: &[f64], config: &OptimizerConfig) -> Result<Vec<ChainPoint>>
where
    P: Problem,
    F: Fn(f64) -> P,
{
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::Config("warm-start grid must be strictly monotone".into()));
    }
    let mut x = x_init.to_vec();
    let mut out = Vec::with_capacity(grid.len());
    for &c in grid {
        let mut problem = family(c);
        let result = minimize(&mut problem, &x, config);
        if let Ok(m) = &result {
            x.clone_from(&m.x);
        }
        out.push(ChainPoint { coupling: c, result });
    }
    Ok(out)
}

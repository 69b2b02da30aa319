//! `qhmft` command-line driver.
//!
//! Exit codes: 0 success, 1 failed validation checks, 2 configuration error,
//! 3 non-convergence, 4 I/O error.

mod settings;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qhmft::ed_oracle::{self, FieldPattern, ScfConfig};
use qhmft::optimizer::{self, Status};
use qhmft::sweep::{self, PointStatus, SweepConfig, SweepRecord, Thresholds, VarianceConfig};
use qhmft::{ModelParams, Objective};
use serde_json::json;

use settings::Settings;

#[derive(Parser)]
#[command(name = "qhmft", version, about = "Cluster-Gutzwiller variational solver for the J1-J2 Heisenberg model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the circuit at a single J2.
    Optimize(Settings),
    /// Warm-started sweep over a J2 range, both directions by default.
    Sweep(Settings),
    /// Exact-diagonalization mean-field reference over a J2 range.
    Oracle(Settings),
    /// Variance of the first gradient component over random initializations.
    Variance(Settings),
    /// Built-in invariant checks.
    Validate(Settings),
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    NotConverged(String),
    Io(String),
    Checks(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks(_) => 1,
            Failure::Config(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::NotConverged(m) => write!(f, "not converged: {m}"),
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Checks(n) => write!(f, "{n} validation check(s) failed"),
        }
    }
}

impl From<qhmft::Error> for Failure {
    fn from(e: qhmft::Error) -> Self {
        use qhmft::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::Json(_) => Failure::Io(e.to_string()),
            E::NonFinite { .. } | E::EigenNotConverged { .. } => Failure::NotConverged(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qhmft: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    let (settings, f): (Settings, fn(&Settings, &mut Outputs) -> Result<(), Failure>) = match command {
        Command::Optimize(s) => (s, cmd_optimize),
        Command::Sweep(s) => (s, cmd_sweep),
        Command::Oracle(s) => (s, cmd_oracle),
        Command::Variance(s) => (s, cmd_variance),
        Command::Validate(s) => (s, cmd_validate),
    };
    let settings = settings.resolve()?;
    if let Some(n) = settings.threads {
        if n == 0 {
            return Err(Failure::Config("threads: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }
    let mut out = Outputs { dir: settings.out_dir().to_path_buf(), written: Vec::new() };
    let result = f(&settings, &mut out);
    // files are listed even when the run did not converge
    for p in &out.written {
        println!("{}", p.display());
    }
    result
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn path(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        Ok(self.dir.join(name))
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.path(name)?;
        let f = File::create(&path).map_err(|e| io(&path, e))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let w = self.create(name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| Failure::Io(format!("{name}: {e}")))
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn log(s: &Settings, msg: impl AsRef<str>) {
    if s.verbose {
        eprintln!("{}", msg.as_ref());
    }
}

fn cmd_optimize(s: &Settings, out: &mut Outputs) -> Result<(), Failure> {
    let (l, m, tied, j2) = (s.l()?, s.m()?, s.tied(), s.j2()?);
    let model = ModelParams::new(s.j1()?, j2)?;
    let mut config = s.optimizer()?;
    config.trace_observables = true;
    let restarts = s.restarts()?;
    let objective = Objective::build(l, m, tied, j2)?.with_model(model);
    log(s, format!("L={l} m={m} tied={tied} J2={j2}: {} parameters, {restarts} starts", objective.n_params()));

    let factory = || qhmft::objective::EnergyProblem::new(&objective, &config);
    let ms = optimizer::multi_start(factory, restarts, s.seed(), &config)?;
    let starts: Vec<_> = ms
        .results
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(min) => json!({ "start": i, "energy": min.value, "status": min.status(), "iterations": min.iterations }),
            Err(e) => json!({ "start": i, "error": e }),
        })
        .collect();
    let best = objective.finish(ms.best().clone())?;
    let status = best.minimum.status();
    log(s, format!("best start {}: E = {:.12} ({status:?})", ms.best, best.report.e_total));

    best.minimum.trace.write_csv(out.create("trace.csv")?)?;
    let result = json!({
        "l": l,
        "m": m,
        "tied": tied,
        "j1": model.j1,
        "j2": model.j2,
        "seed": s.seed(),
        "best_start": ms.best,
        "start_seed": best.minimum.trace.seed,
        "energy": best.report,
        "order": best.order,
        "de_dj2": best.de_dj2,
        "status": status,
        "iterations": best.minimum.iterations,
        "grad_norm": best.minimum.grad_norm,
        "evaluations": best.minimum.trace.evaluations,
        "params": best.params,
        "optimizer": config,
        "starts": starts,
    });
    out.json("result.json", &result)?;
    println!("energy {:.12}", best.report.e_total);
    match status {
        Status::Converged => Ok(()),
        other => Err(Failure::NotConverged(format!("best start ended with {other:?}"))),
    }
}

fn write_transitions(out: &mut Outputs, records: &[SweepRecord], s: &Settings) -> Result<(), Failure> {
    match sweep::detect_transitions(records, &Thresholds::default()) {
        Ok(report) => {
            for t in &report.transitions {
                log(s, format!("transition at J2 = {:.4}: {:?}", t.location, t.kind));
            }
            out.json("transitions.json", &report)
        }
        Err(qhmft::Error::InsufficientPoints { needed, got }) => {
            eprintln!("qhmft: {got} grid point(s), transitions need at least {needed}; transitions.json not written");
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sweep(s: &Settings, out: &mut Outputs) -> Result<(), Failure> {
    let (lo, hi, step) = s.range()?;
    let config = SweepConfig {
        l: s.l()?,
        m: s.m()?,
        tied: s.tied(),
        j1: s.j1()?,
        j2_min: lo,
        j2_max: hi,
        step,
        directions: s.directions()?,
        extreme_restarts: s.restarts()?,
        seed: s.seed(),
        optimizer: s.optimizer()?,
        thresholds: Thresholds::default(),
    };
    config.validate()?;
    let checkpoints = out.path("checkpoints")?;
    log(s, format!("sweeping {} points, checkpoints in {}", config.grid()?.len(), checkpoints.display()));
    let outcome = sweep::run_sweep(&config, Some(&checkpoints))?;
    if outcome.metadata.resumed_points > 0 {
        log(s, format!("resumed {} point(s) from checkpoints", outcome.metadata.resumed_points));
    }
    sweep::write_records_csv(&outcome.records, out.create("records.csv")?)?;
    write_transitions(out, &outcome.records, s)?;
    out.json("metadata.json", &outcome.metadata)?;
    out.written.push(checkpoints);
    let bad: Vec<_> = outcome.records.iter().filter(|r| !r.status.is_acceptable()).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!("{} sweep point(s) did not converge", bad.len())))
    }
}

fn cmd_oracle(s: &Settings, out: &mut Outputs) -> Result<(), Failure> {
    let (lo, hi, step) = s.range()?;
    let l = s.l()?;
    let grid = sweep::make_grid(lo, hi, step);
    let config = ScfConfig {
        seeds: vec![FieldPattern::Neel, FieldPattern::Caf, FieldPattern::Zero, FieldPattern::Random(s.seed())],
        ..ScfConfig::default()
    };
    log(s, format!("oracle L={l}: {} points", grid.len()));
    let records = ed_oracle::hmft_sweep(l, s.j1()?, &grid, &config, &s.directions()?.list())?;
    sweep::write_records_csv(&records, out.create("oracle.csv")?)?;
    write_transitions(out, &records, s)?;
    let bad = records.iter().filter(|r| r.status != PointStatus::Converged).count();
    if bad == 0 {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!("{bad} oracle point(s) did not reach self-consistency")))
    }
}

fn cmd_variance(s: &Settings, out: &mut Outputs) -> Result<(), Failure> {
    let sizes = s.sizes.clone().unwrap_or_else(|| vec![2, 4]);
    if sizes.is_empty() {
        return Err(Failure::Config("sizes: need at least one cluster size".into()));
    }
    let mut points = Vec::new();
    for &l in &sizes {
        let config = VarianceConfig {
            l,
            m: s.m()?,
            // parameter tying only exists for the 2x2 cluster
            tied: s.tied() && l == 2,
            j2_values: s.j2_values.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0]),
            n_samples: s.samples.unwrap_or(100),
            seed: s.seed(),
            init_width: s.init_width.unwrap_or(std::f64::consts::PI),
            scale: s.scale()?,
        };
        log(s, format!("variance L={l}: {} samples", config.n_samples));
        points.extend(sweep::variance_study(&config)?);
    }
    sweep::write_variance_csv(&points, out.create("variance.csv")?)?;
    Ok(())
}

fn cmd_validate(_s: &Settings, out: &mut Outputs) -> Result<(), Failure> {
    let results = qhmft::validate::run_suite();
    print!("{}", qhmft::validate::format_table(&results));
    out.json("validate.json", &results)?;
    match results.iter().filter(|r| !r.passed).count() {
        0 => Ok(()),
        n => Err(Failure::Checks(n)),
    }
}

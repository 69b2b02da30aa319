use std::path::{Path, PathBuf};

use clap::Args;
use qhmft::optimizer::{GradientMode, OptimizerConfig};
use qhmft::sweep::{Directions, EnergyScale};
use serde::Deserialize;

use crate::Failure;

/// Flags shared by every command. Each one can also be given as a key of the
/// same name (underscores instead of dashes) in the `--config` TOML file;
/// flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// TOML file with default values for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Cluster side length.
    #[arg(long)]
    pub l: Option<usize>,
    /// Number of macro-layers.
    #[arg(long)]
    pub m: Option<usize>,
    /// Share parameters between symmetry-equivalent gates (L=2 only).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub tied: Option<bool>,
    #[arg(long)]
    pub j1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j2: Option<f64>,
    /// Sweep range as `lo,hi` (inclusive).
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub j2_range: Option<(f64, f64)>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Random restarts (per chain extreme for sweeps).
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// adjoint, fd_forward or fd_central.
    #[arg(long)]
    pub grad_mode: Option<String>,
    #[arg(long)]
    pub fd_delta: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// up, down or both.
    #[arg(long)]
    pub directions: Option<String>,
    /// Gradient samples per point (variance).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Cluster sizes for the variance study, e.g. `2,4`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// J2 values for the variance study, e.g. `0,0.5,1`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub j2_values: Option<Vec<f64>>,
    /// Initial angles are drawn from (-w, w].
    #[arg(long)]
    pub init_width: Option<f64>,
    /// per_spin or per_cluster.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Gradient infinity-norm tolerance.
    #[arg(long)]
    pub gtol: Option<f64>,
    #[arg(long, short)]
    #[serde(skip)]
    pub verbose: bool,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once([',', ':']).ok_or_else(|| format!("expected lo,hi, got '{s}'"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("{a}: {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("{b}: {e}"))?;
    Ok((a, b))
}

fn config_error(key: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{key}: {e}"))
}

impl Settings {
    /// Folds in the `--config` file, if any.
    pub fn resolve(self) -> Result<Settings, Failure> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let file: Settings =
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {}", path.display(), e.message())))?;
        Ok(self.over(file))
    }

    fn over(self, f: Settings) -> Settings {
        Settings {
            config: self.config,
            l: self.l.or(f.l),
            m: self.m.or(f.m),
            tied: self.tied.or(f.tied),
            j1: self.j1.or(f.j1),
            j2: self.j2.or(f.j2),
            j2_range: self.j2_range.or(f.j2_range),
            step: self.step.or(f.step),
            restarts: self.restarts.or(f.restarts),
            seed: self.seed.or(f.seed),
            grad_mode: self.grad_mode.or(f.grad_mode),
            fd_delta: self.fd_delta.or(f.fd_delta),
            threads: self.threads.or(f.threads),
            out_dir: self.out_dir.or(f.out_dir),
            directions: self.directions.or(f.directions),
            samples: self.samples.or(f.samples),
            sizes: self.sizes.or(f.sizes),
            j2_values: self.j2_values.or(f.j2_values),
            init_width: self.init_width.or(f.init_width),
            scale: self.scale.or(f.scale),
            max_iter: self.max_iter.or(f.max_iter),
            gtol: self.gtol.or(f.gtol),
            verbose: self.verbose,
        }
    }

    pub fn out_dir(&self) -> &Path {
        self.out_dir.as_deref().unwrap_or(Path::new("qhmft-out"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn l(&self) -> Result<usize, Failure> {
        let l = self.l.unwrap_or(2);
        if l == 0 || l % 2 == 1 {
            return Err(config_error("l", format!("cluster side must be a positive even integer, got {l}")));
        }
        Ok(l)
    }

    pub fn m(&self) -> Result<usize, Failure> {
        match self.m.unwrap_or(2) {
            0 => Err(config_error("m", "need at least one macro-layer")),
            m => Ok(m),
        }
    }

    pub fn tied(&self) -> bool {
        self.tied.unwrap_or(false)
    }

    pub fn j1(&self) -> Result<f64, Failure> {
        let j1 = self.j1.unwrap_or(1.0);
        if !j1.is_finite() {
            return Err(config_error("j1", "must be finite"));
        }
        Ok(j1)
    }

    pub fn j2(&self) -> Result<f64, Failure> {
        match self.j2 {
            Some(v) if v.is_finite() => Ok(v),
            Some(v) => Err(config_error("j2", format!("must be finite, got {v}"))),
            None => Err(Failure::Config("missing required key 'j2'".into())),
        }
    }

    /// `(lo, hi, step)`; a lone `j2` gives a single-point grid.
    pub fn range(&self) -> Result<(f64, f64, f64), Failure> {
        let step = self.step.unwrap_or(0.01);
        if !(step > 0.0 && step.is_finite()) {
            return Err(config_error("step", format!("must be positive, got {step}")));
        }
        let (lo, hi) = match (self.j2_range, self.j2) {
            (Some(r), _) => r,
            (None, Some(j2)) => (j2, j2),
            (None, None) => (0.0, 1.0),
        };
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(config_error("j2_range", "bounds must be finite"));
        }
        if lo > hi {
            return Err(config_error("j2_range", format!("empty grid, lo {lo} > hi {hi}")));
        }
        Ok((lo, hi, step))
    }

    pub fn restarts(&self) -> Result<usize, Failure> {
        match self.restarts.unwrap_or(10) {
            0 => Err(config_error("restarts", "must be at least 1")),
            r => Ok(r),
        }
    }

    pub fn directions(&self) -> Result<Directions, Failure> {
        self.directions.as_deref().unwrap_or("both").parse().map_err(|e| config_error("directions", e))
    }

    pub fn scale(&self) -> Result<EnergyScale, Failure> {
        self.scale.as_deref().unwrap_or("per_cluster").parse().map_err(|e| config_error("scale", e))
    }

    pub fn optimizer(&self) -> Result<OptimizerConfig, Failure> {
        let mut c = OptimizerConfig::default();
        if let Some(mode) = &self.grad_mode {
            c.gradient_mode = mode.parse::<GradientMode>().map_err(|e| config_error("grad_mode", e))?;
        }
        if let Some(d) = self.fd_delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(config_error("fd_delta", format!("must be positive, got {d}")));
            }
            c.fd_delta = d;
        }
        if let Some(n) = self.max_iter {
            if n == 0 {
                return Err(config_error("max_iter", "must be at least 1"));
            }
            c.max_iterations = n;
        }
        if let Some(g) = self.gtol {
            if !(g > 0.0 && g.is_finite()) {
                return Err(config_error("gtol", format!("must be positive, got {g}")));
            }
            c.gradient_tolerance = g;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_with_either_separator() {
        assert_eq!(parse_range("0,1").unwrap(), (0.0, 1.0));
        assert_eq!(parse_range("0.2:0.8").unwrap(), (0.2, 0.8));
        assert!(parse_range("0.5").is_err());
    }

    #[test]
    fn command_line_wins_over_file() {
        let file: Settings = toml::from_str("l = 4\nseed = 9\nj2_range = [0.1, 0.3]\n").unwrap();
        let cli = Settings { seed: Some(3), ..Default::default() };
        let s = cli.over(file);
        assert_eq!(s.l, Some(4));
        assert_eq!(s.seed, Some(3));
        assert_eq!(s.j2_range, Some((0.1, 0.3)));
    }

    #[test]
    fn unknown_file_keys_are_named() {
        let err = toml::from_str::<Settings>("stpe = 0.1\n").unwrap_err();
        assert!(err.message().contains("stpe"), "{}", err.message());
    }
}

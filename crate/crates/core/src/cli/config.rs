//! Serializable run configuration shared by the binary and `--config` files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::io::InputFormat;
use crate::decompose::{FitOptions, Init};
use crate::deflate::Scheme;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Decompose,
    Changepoint,
    Simulate,
    Benchmark,
    RankSelect,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Decompose => "decompose",
            Command::Changepoint => "changepoint",
            Command::Simulate => "simulate",
            Command::Benchmark => "benchmark",
            Command::RankSelect => "rank-select",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitChoice {
    #[default]
    Stable,
    /// Uniform on the sphere, seeded from the run seed.
    Random,
}

/// Simulation presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Per-iteration convergence traces, `p = 200, T = 20, r in {1, 5}`.
    Fig3,
    /// A single mean shift between two rank-2 projector networks.
    Shift,
    /// A rank-`r` spike in GOE noise.
    Spike,
    /// A 5-block stochastic block model series.
    Sbm,
}

/// Benchmark suites.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Error against signal strength on a small spike grid.
    #[default]
    Rates,
    /// SS-TPCA against the matricized and HOSVD baselines on SBM data.
    Methods,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub format: Option<InputFormat>,
    /// Node count for LongCSV input; inferred from the largest index when absent.
    pub nodes: Option<usize>,
    pub ranks: Vec<usize>,
    pub scheme: Scheme,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitChoice,
    pub eigen_scaled: bool,
    /// Results JSON; standard output when absent.
    pub output: Option<PathBuf>,
    /// Optional CSV table (trace, CUSUM loadings, sweep rows).
    pub csv: Option<PathBuf>,
    /// Where `simulate` writes the generated tensor as LongCSV.
    pub data: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub suite: Suite,
    pub reps: usize,
    pub r_max: usize,
    pub k_max: usize,
    /// Entries of reported principal networks below this magnitude are zeroed.
    pub edge_threshold: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Decompose,
            input: None,
            format: None,
            nodes: None,
            ranks: vec![1],
            scheme: Scheme::Hotelling,
            seed: 0,
            tol: 1e-8,
            max_iter: 200,
            init: InitChoice::Stable,
            eigen_scaled: false,
            output: None,
            csv: None,
            data: None,
            preset: None,
            suite: Suite::Rates,
            reps: 20,
            r_max: 3,
            k_max: 3,
            edge_threshold: None,
        }
    }
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The config as echoed into results: output locations are dropped so that
    /// identical runs written to different files produce identical documents.
    pub fn echo(&self) -> RunConfig {
        RunConfig {
            output: None,
            csv: None,
            data: None,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let needs_input = matches!(
            self.command,
            Command::Decompose | Command::Changepoint | Command::RankSelect
        );
        if needs_input && self.input.is_none() {
            return Err(Error::Config(format!("{} needs an input path", self.command.name())));
        }
        if self.command == Command::Simulate && self.preset.is_none() {
            return Err(Error::Config("simulate needs a preset".into()));
        }
        if self.ranks.is_empty() || self.ranks.contains(&0) {
            return Err(Error::Config("ranks must be a nonempty list of positive integers".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 || self.reps == 0 || self.r_max == 0 || self.k_max == 0 {
            return Err(Error::Config("max_iter, reps, r_max and k_max must be >= 1".into()));
        }
        if let Some(th) = self.edge_threshold {
            if !(th >= 0.0 && th.is_finite()) {
                return Err(Error::Config(format!("edge threshold must be >= 0, got {th}")));
            }
        }
        Ok(())
    }

    /// Fit options for rank `rank`.
    pub fn fit_options(&self, rank: usize) -> FitOptions {
        let init = match self.init {
            InitChoice::Stable => Init::Stable,
            InitChoice::Random => Init::Random(self.seed),
        };
        FitOptions::new(rank)
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .with_init(init)
            .eigen_scaled(self.eigen_scaled)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut cfg = RunConfig::new(Command::RankSelect);
        cfg.input = Some("data/x.csv".into());
        cfg.format = Some(InputFormat::LongCsv);
        cfg.ranks = vec![3, 2];
        cfg.scheme = Scheme::Schur;
        cfg.tol = 1e-10;
        cfg.edge_threshold = Some(0.05);
        cfg.preset = Some(Preset::Shift);
        let back: RunConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: RunConfig = serde_json::from_str(r#"{"command": "simulate", "preset": "fig3"}"#).unwrap();
        assert_eq!(cfg.ranks, vec![1]);
        assert_eq!(cfg.max_iter, 200);
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<RunConfig>(r#"{"command": "simulate", "bogus": 1}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::new(Command::Decompose).validate().is_err());
        assert!(RunConfig::new(Command::Simulate).validate().is_err());
        let mut cfg = RunConfig::new(Command::Benchmark);
        cfg.validate().unwrap();
        cfg.ranks = vec![0];
        assert!(cfg.validate().is_err());
        cfg.ranks = vec![1];
        cfg.edge_threshold = Some(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn echo_drops_output_paths() {
        let mut cfg = RunConfig::new(Command::Benchmark);
        cfg.output = Some("a.json".into());
        cfg.csv = Some("a.csv".into());
        let e = cfg.echo();
        assert_eq!(e.output, None);
        assert_eq!(e.csv, None);
        assert_eq!(e.seed, cfg.seed);
    }
}

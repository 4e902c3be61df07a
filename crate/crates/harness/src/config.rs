//! Experiment configuration: a TOML file plus flag overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use subdiff_core::error::{Error, Result};
use subdiff_core::spectral::{LambdaRule, SimGrid, SpectralBasis};
use subdiff_core::subordinator::BetaIndex;

/// The verification experiments the driver knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum Experiment {
    Moments,
    QwienerMoments,
    Isometry,
    ChangeOfVar,
    ItoFormula,
    Duality,
    Mild,
    FpkResidual,
    Subordination,
    CharFunction,
    WalshTriple,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Moments => "moments",
            Experiment::QwienerMoments => "qwiener-moments",
            Experiment::Isometry => "isometry",
            Experiment::ChangeOfVar => "change-of-var",
            Experiment::ItoFormula => "ito-formula",
            Experiment::Duality => "duality",
            Experiment::Mild => "mild",
            Experiment::FpkResidual => "fpk-residual",
            Experiment::Subordination => "subordination",
            Experiment::CharFunction => "char-function",
            Experiment::WalshTriple => "walsh-triple",
        }
    }

    /// Stable stream-context id; part of the reproducibility contract.
    pub fn stream_context(self) -> u64 {
        match self {
            Experiment::Moments => 1,
            Experiment::QwienerMoments => 2,
            Experiment::Isometry => 3,
            Experiment::ChangeOfVar => 4,
            Experiment::ItoFormula => 5,
            Experiment::Duality => 6,
            Experiment::Mild => 7,
            Experiment::FpkResidual => 8,
            Experiment::Subordination => 9,
            Experiment::CharFunction => 10,
            Experiment::WalshTriple => 11,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    #[serde(default = "default_dim")]
    pub dim_j: usize,
    /// Power-law exponent; ignored when `lambda` is given.
    #[serde(default)]
    pub power: Option<f64>,
    /// Explicit eigenvalues, overriding the power rule.
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
}

fn default_dim() -> usize {
    3
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec {
            dim_j: default_dim(),
            power: None,
            lambda: Some(vec![0.5, 0.3, 0.2]),
        }
    }
}

impl BasisSpec {
    pub fn build(&self) -> Result<SpectralBasis> {
        let rule = match (&self.lambda, self.power) {
            (Some(vals), _) => LambdaRule::Explicit(vals.clone()),
            (None, Some(p)) => LambdaRule::Power { p },
            (None, None) => LambdaRule::Explicit(vec![0.5, 0.3, 0.2]),
        };
        SpectralBasis::new(self.dim_j, rule)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_tau_steps")]
    pub tau_steps: usize,
}

fn default_t_max() -> f64 {
    1.0
}
fn default_steps() -> usize {
    64
}
fn default_tau_steps() -> usize {
    256
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t_max: default_t_max(),
            steps: default_steps(),
            tau_steps: default_tau_steps(),
        }
    }
}

impl GridSpec {
    pub fn sim(&self) -> Result<SimGrid> {
        SimGrid::new(self.t_max, self.steps, self.t_max / self.tau_steps as f64)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_mc")]
    pub mc: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// 0 means "all available cores".
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_beta() -> f64 {
    0.5
}
fn default_mc() -> usize {
    10_000
}
fn default_seed() -> u64 {
    42
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            beta: default_beta(),
            basis: BasisSpec::default(),
            grid: GridSpec::default(),
            mc: default_mc(),
            seed: default_seed(),
            workers: 0,
            out: default_out(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parameter(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc == 0 {
            return Err(Error::parameter("mc must be positive"));
        }
        BetaIndex::new(self.beta)?;
        self.basis.build()?;
        self.grid.sim()?;
        Ok(())
    }

    pub fn beta_index(&self) -> BetaIndex {
        BetaIndex::new(self.beta).expect("validated")
    }

    /// Echo of the effective configuration, for the report header.
    pub fn echo(&self) -> String {
        format!(
            "experiment={} beta={} dim_j={} t_max={} steps={} tau_steps={} mc={} seed={} workers={}",
            self.experiment.name(),
            self.beta,
            self.basis.dim_j,
            self.grid.t_max,
            self.grid.steps,
            self.grid.tau_steps,
            self.mc,
            self.seed,
            self.workers
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_toml() {
        let cfg = ExperimentConfig::from_toml("experiment = \"moments\"").unwrap();
        assert_eq!(cfg.experiment, Experiment::Moments);
        assert_eq!(cfg.seed, 42);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_sections() {
        let text = r#"
experiment = "duality"
beta = 0.8
mc = 500
seed = 7

[basis]
dim_j = 4
power = 2.0

[grid]
t_max = 2.0
steps = 128
tau_steps = 512
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment, Experiment::Duality);
        assert_eq!(cfg.basis.dim_j, 4);
        assert_eq!(cfg.grid.tau_steps, 512);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Moments);
        cfg.mc = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(Experiment::Moments);
        cfg.beta = 1.5;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"moments\"\nbogus = 1").is_err());
    }
}

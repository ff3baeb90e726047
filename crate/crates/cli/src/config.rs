//! JSON run configurations, one schema per subcommand.

use std::path::Path;

use adaptive_absorption::cascade::CascadeConfig;
use adaptive_absorption::fock::{coherent_state_with_tail_tol, number_state, DEFAULT_TAIL_TOL};
use adaptive_absorption::{AbsorberParams, Complex64, FockDensityMatrix, PhotonNumberDistribution};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::CliError;

/// Reads and deserializes `path`, reporting the offending field path on
/// schema errors.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.inner()))
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Coherent {
        magnitude: f64,
        #[serde(default)]
        phase: f64,
    },
    Number {
        n: usize,
    },
    /// Explicit photon-number probabilities p_0, p_1, ...
    Pmf {
        probs: Vec<f64>,
    },
    /// p0 |0⟩⟨0| + (1 − p0) |n⟩⟨n|
    TwoPoint {
        p0: f64,
        n: usize,
    },
}

impl StateSpec {
    pub fn build(&self, cutoff: usize, tail_tol: f64) -> Result<FockDensityMatrix, CliError> {
        let state = match self {
            StateSpec::Coherent { magnitude, phase } => coherent_state_with_tail_tol(
                Complex64::from_polar(*magnitude, *phase),
                cutoff,
                tail_tol,
            )?,
            StateSpec::Number { n } => number_state(*n, cutoff)?,
            StateSpec::Pmf { probs } => {
                if probs.len() > cutoff + 1 {
                    return Err(CliError::Config(format!(
                        "state.probs has {} entries, more than cutoff + 1 = {}",
                        probs.len(),
                        cutoff + 1
                    )));
                }
                let mut p = probs.clone();
                p.resize(cutoff + 1, 0.0);
                FockDensityMatrix::diagonal(&PhotonNumberDistribution::from_probs(p)?)
            }
            StateSpec::TwoPoint { p0, n } => {
                let d = adaptive_absorption::analytic::TwoPointInput::new(*p0, *n)?;
                FockDensityMatrix::diagonal(&d.distribution(cutoff)?)
            }
        };
        Ok(state)
    }

    pub fn coherent_amplitude(&self) -> Option<Complex64> {
        match self {
            StateSpec::Coherent { magnitude, phase } => Some(Complex64::from_polar(*magnitude, *phase)),
            _ => None,
        }
    }
}

/// Explicit list of times, or `points` evenly spaced values from `start` to
/// `stop` inclusive.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, points: usize },
}

impl TimeGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Linspace { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        };
        if v.is_empty() {
            return Err(CliError::Config("time grid is empty".into()));
        }
        if let Some(t) = v.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(CliError::Config(format!("time grid value {t} is not a finite time >= 0")));
        }
        Ok(v)
    }
}

fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

fn default_tol() -> f64 {
    1e-12
}

/// Absorber settings shared by evolve and trajectories.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorberSpec {
    pub gamma: f64,
    pub cutoff: usize,
    #[serde(default = "default_tol")]
    pub quad_tol: f64,
    #[serde(default = "default_tol")]
    pub root_tol: f64,
    /// Largest Poisson mass allowed above the cutoff for coherent inputs.
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
}

impl AbsorberSpec {
    pub fn params(&self) -> Result<AbsorberParams, CliError> {
        Ok(AbsorberParams::new(self.gamma, self.cutoff)?
            .with_quad_tol(self.quad_tol)?
            .with_root_tol(self.root_tol)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub absorber: AbsorberSpec,
    pub state: StateSpec,
    pub times: TimeGrid,
}

fn default_bins() -> usize {
    adaptive_absorption::adaptive::DEFAULT_BINS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoriesConfig {
    pub absorber: AbsorberSpec,
    pub state: StateSpec,
    pub t: f64,
    pub n_traj: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_points() -> usize {
    200
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PFunctionConfig {
    pub gamma: f64,
    pub t: f64,
    pub state: StateSpec,
    /// Number of |β| samples of the continuous density.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_n_list() -> Vec<usize> {
    vec![1, 2, 5]
}

fn default_n_max() -> usize {
    60
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    pub times: TimeGrid,
    /// Truncation of the normalization check; the remainder is reported as
    /// the tail.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub gamma: f64,
    pub t: f64,
    pub splitter_counts: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledSpec {
    pub n_traj: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeRunConfig {
    pub cutoff: usize,
    pub state: StateSpec,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    pub cascade: CascadeConfig,
    #[serde(default)]
    pub convergence: Option<ConvergenceSpec>,
    #[serde(default)]
    pub sampled: Option<SampledSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
}

//! A chain of weak beam splitters whose reflected ports are watched by
//! click detectors; the first detected click diverts the beam out of the
//! chain. Multi-photon reflections, detector inefficiency, internal loss and
//! feedback latency are modeled exactly on the truncated Fock space.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    block_ranges, combine_blocks, trajectory_rng, unconditional_adaptive_state, BlockSum,
    EnsembleResult,
};
use crate::dynamics::{check_time, weighted_kraus_sum};
use crate::error::{invalid, Result};
use crate::fock::{trace_distance, AbsorberParams, CMatrix, FockDensityMatrix};
use crate::stats::{chi_square_test, ChiSquareReport, Histogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    /// Reflectivity R of each splitter, in [0, 1).
    pub reflectivity: f64,
    pub n_splitters: usize,
    /// Click probability per reflected photon, in [0, 1].
    pub detector_efficiency: f64,
    /// Unmonitored loss fraction after each splitter, in [0, 1).
    pub internal_loss: f64,
    /// Splitters still traversed between a click and the switch-off.
    pub feedback_latency_steps: usize,
}

impl CascadeConfig {
    /// Lossless chain with perfect detectors and instantaneous feedback.
    pub fn ideal(reflectivity: f64, n_splitters: usize) -> Result<Self> {
        let c = Self {
            reflectivity,
            n_splitters,
            detector_efficiency: 1.0,
            internal_loss: 0.0,
            feedback_latency_steps: 0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.reflectivity) {
            return Err(invalid("reflectivity", format!("must lie in [0, 1), got {}", self.reflectivity)));
        }
        if self.n_splitters == 0 {
            return Err(invalid("n_splitters", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return Err(invalid(
                "detector_efficiency",
                format!("must lie in [0, 1], got {}", self.detector_efficiency),
            ));
        }
        if !(0.0..1.0).contains(&self.internal_loss) {
            return Err(invalid("internal_loss", format!("must lie in [0, 1), got {}", self.internal_loss)));
        }
        let total = (1.0 - self.reflectivity).powi(self.n_splitters as i32);
        if !(total > 0.0) {
            return Err(invalid("n_splitters", "total transmissivity underflows to zero"));
        }
        Ok(())
    }
}

/// Normalized branch state with its probability. The state is the zero
/// matrix when the probability vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub state: FockDensityMatrix,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitterBranches {
    pub no_click: Branch,
    pub click: Branch,
}

/// Unnormalized (no-click, click) parts: Σ_k w_k B_k ρ B_k† with
/// w_k = (R(1−η_d))^k and R^k − (R(1−η_d))^k.
fn split(rho: &CMatrix, r: f64, eta_d: f64) -> (CMatrix, CMatrix) {
    let dim = rho.nrows();
    let miss = r * (1.0 - eta_d);
    let no_click: Vec<f64> = (0..dim).map(|k| miss.powi(k as i32)).collect();
    let click: Vec<f64> = (0..dim)
        .map(|k| r.powi(k as i32) - miss.powi(k as i32))
        .collect();
    (
        weighted_kraus_sum(rho, 1.0 - r, &no_click),
        weighted_kraus_sum(rho, 1.0 - r, &click),
    )
}

/// Unmonitored splitter with reflectivity r.
fn lose(rho: &CMatrix, r: f64) -> CMatrix {
    if r == 0.0 {
        return rho.clone();
    }
    let weights: Vec<f64> = (0..rho.nrows()).map(|k| r.powi(k as i32)).collect();
    weighted_kraus_sum(rho, 1.0 - r, &weights)
}

fn trace(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

fn branch(m: CMatrix, tail: f64) -> Branch {
    let probability = trace(&m);
    let state = if probability > 0.0 {
        FockDensityMatrix::from_parts(m / Complex64::new(probability, 0.0), tail)
    } else {
        FockDensityMatrix::from_parts(m, tail)
    };
    Branch { state, probability }
}

/// One splitter of reflectivity `r` followed by a click/no-click detector of
/// efficiency `eta_d` on the reflected port.
pub fn splitter_step(rho: &FockDensityMatrix, r: f64, eta_d: f64) -> Result<SplitterBranches> {
    if !(0.0..1.0).contains(&r) {
        return Err(invalid("reflectivity", format!("must lie in [0, 1), got {r}")));
    }
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(invalid("detector_efficiency", format!("must lie in [0, 1], got {eta_d}")));
    }
    let (nc, c) = split(rho.elements(), r, eta_d);
    let tail = rho.tail_mass_bound();
    Ok(SplitterBranches {
        no_click: branch(nc, tail),
        click: branch(c, tail),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    /// Splitter whose detector clicked first; `None` if none did.
    pub click_index: Option<usize>,
    pub final_state: FockDensityMatrix,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEnumeration {
    /// Click outcomes in splitter order, then the no-click outcome; outcomes
    /// with zero probability are omitted.
    pub outcomes: Vec<CascadeOutcome>,
    pub average_state: FockDensityMatrix,
}

impl CascadeEnumeration {
    /// Probability of a first click at each splitter, then of no click.
    pub fn click_pmf(&self, n_splitters: usize) -> Vec<f64> {
        let mut pmf = vec![0.0; n_splitters + 1];
        for o in &self.outcomes {
            pmf[o.click_index.unwrap_or(n_splitters)] += o.probability;
        }
        pmf
    }
}

/// Unnormalized outcome branches of the chain, in splitter order, plus the
/// no-click branch. Each click branch already includes the latency splitters.
fn chain_branches(rho: &CMatrix, config: &CascadeConfig) -> (Vec<CMatrix>, CMatrix, Vec<CMatrix>) {
    let r = config.reflectivity;
    let loss = config.internal_loss;
    let m = config.n_splitters;
    let mut survivors = Vec::with_capacity(m);
    let mut clicks = Vec::with_capacity(m);
    let mut state = rho.clone();
    for i in 0..m {
        survivors.push(state.clone());
        let (nc, c) = split(&state, r, config.detector_efficiency);
        let mut c = lose(&c, loss);
        for _ in 0..config.feedback_latency_steps.min(m - i - 1) {
            c = lose(&lose(&c, r), loss);
        }
        clicks.push(c);
        state = lose(&nc, loss);
    }
    (clicks, state, survivors)
}

/// Deterministic enumeration over the first-click position. Probabilities are
/// relative to the trace of `rho0`.
pub fn run_cascade_enumerated(
    rho0: &FockDensityMatrix,
    config: &CascadeConfig,
) -> Result<CascadeEnumeration> {
    config.validate()?;
    let norm = rho0.trace();
    if !(norm > 0.0) {
        return Err(invalid("rho0", "input has zero trace"));
    }
    let tail = rho0.tail_mass_bound();
    let (clicks, no_click, _) = chain_branches(rho0.elements(), config);
    let dim = rho0.dim();
    let mut average = CMatrix::zeros(dim, dim);
    let mut outcomes = Vec::new();
    let indexed = clicks
        .into_iter()
        .enumerate()
        .map(|(i, c)| (Some(i), c))
        .chain(std::iter::once((None, no_click)));
    for (click_index, m) in indexed {
        let p = trace(&m);
        average += &m;
        if p > 0.0 {
            outcomes.push(CascadeOutcome {
                click_index,
                final_state: FockDensityMatrix::from_parts(m / Complex64::new(p, 0.0), tail),
                probability: p / norm,
            });
        }
    }
    Ok(CascadeEnumeration {
        outcomes,
        average_state: FockDensityMatrix::from_parts(average / Complex64::new(norm, 0.0), tail),
    })
}

/// Monte Carlo version of [`run_cascade_enumerated`]: each run walks the chain
/// drawing click/no-click at every splitter with its conditional probability.
/// The histogram records the click index i at i + ½ on [0, n_splitters].
pub fn run_cascade_sampled(
    rho0: &FockDensityMatrix,
    config: &CascadeConfig,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    config.validate()?;
    if n_traj == 0 {
        return Err(invalid("n_traj", "need at least one trajectory"));
    }
    if !(rho0.trace() > 0.0) {
        return Err(invalid("rho0", "input has zero trace"));
    }
    let m = config.n_splitters;
    let (clicks, no_click, survivors) = chain_branches(rho0.elements(), config);
    let normalize = |c: &CMatrix| {
        let p = trace(c);
        if p > 0.0 {
            c / Complex64::new(p, 0.0)
        } else {
            c.clone()
        }
    };
    let conditional: Vec<f64> = clicks
        .iter()
        .zip(&survivors)
        .map(|(c, s)| {
            let ps = trace(s);
            if ps > 0.0 {
                trace(c) / ps
            } else {
                0.0
            }
        })
        .collect();
    let click_states: Vec<CMatrix> = clicks.iter().map(normalize).collect();
    let no_click_state = normalize(&no_click);
    let template = Histogram::uniform(0.0, m as f64, m)?;
    let dim = rho0.dim();

    let blocks: Vec<BlockSum> = block_ranges(n_traj)
        .into_par_iter()
        .map(|range| {
            let mut sum = CMatrix::zeros(dim, dim);
            let mut histogram = template.clone();
            let mut no_jump = 0u64;
            let count = range.len();
            for t in range {
                let mut rng = trajectory_rng(seed, t as u64);
                let hit = (0..m).find(|&i| rng.random::<f64>() < conditional[i]);
                match hit {
                    Some(i) => {
                        histogram.add(i as f64 + 0.5);
                        sum += &click_states[i];
                    }
                    None => {
                        no_jump += 1;
                        sum += &no_click_state;
                    }
                }
            }
            BlockSum {
                state_sum: sum,
                count,
                no_jump,
                histogram,
            }
        })
        .collect();
    combine_blocks(blocks, n_traj, seed, rho0.tail_mass_bound())
}

/// χ² test of a sampled cascade's click-index histogram and no-click count
/// against the enumerated probabilities.
pub fn click_index_chi_square(
    result: &EnsembleResult,
    enumeration: &CascadeEnumeration,
) -> Result<ChiSquareReport> {
    let m = result.jump_time_histogram.bins();
    let n = result.n_traj as f64;
    let expected: Vec<f64> = enumeration.click_pmf(m).iter().map(|p| p * n).collect();
    let mut observed = result.jump_time_histogram.counts.clone();
    observed.push(result.no_jump_count);
    chi_square_test(&observed, &expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub splitters: usize,
    pub reflectivity: f64,
    pub trace_distance: f64,
}

/// Trace distance between the ideal M-splitter cascade with 1 − R = e^{−2Γt/M}
/// and the continuous adaptive map at time t, for each M.
pub fn continuum_convergence(
    rho0: &FockDensityMatrix,
    gamma: f64,
    t: f64,
    splitter_counts: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    check_time("t", t)?;
    let params = AbsorberParams::new(gamma, rho0.cutoff())?;
    let target = unconditional_adaptive_state(rho0, &params, t)?;
    splitter_counts
        .iter()
        .map(|&m| {
            if m == 0 {
                return Err(invalid("splitter_counts", "counts must be >= 1"));
            }
            let reflectivity = -(-2.0 * gamma * t / m as f64).exp_m1();
            let config = CascadeConfig::ideal(reflectivity, m)?;
            let avg = run_cascade_enumerated(rho0, &config)?.average_state;
            Ok(ConvergenceRow {
                splitters: m,
                reflectivity,
                trace_distance: trace_distance(&avg, &target)?,
            })
        })
        .collect()
}

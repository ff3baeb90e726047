//! Adaptive absorption: the absorber is switched off at the first detected
//! photon.
//!
//! A detection at t₁ leaves the (frozen) conditional state
//! 2Γ Ĵ e^{2ΓL̂t₁} ρ(0) / p(t₁). Averaging over detection times up to `t`
//! plus the no-detection branch gives the unconditional state
//!
//! ρ(t) = e^{2ΓL̂t} ρ(0) + ∫₀ᵗ dt₁ 2Γ Ĵ e^{2ΓL̂t₁} ρ(0),
//!
//! which is not the solution of any time-local master equation: its
//! derivative is 2Γ(Ĵ + L̂) applied to the no-detection branch only.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{check_time, generator, jump_elements, no_jump_elements};
use crate::error::{invalid, Error, Result};
use crate::fock::{trace_distance, trace_norm, AbsorberParams, CMatrix, FockDensityMatrix};
use crate::quadrature;
use crate::stats::{chi_square_test, ChiSquareReport, Histogram};

/// Step of the central difference used by [`nonmarkov_derivative_check`].
pub const DERIVATIVE_STEP: f64 = 1e-4;
/// Default number of jump-time histogram bins.
pub const DEFAULT_BINS: usize = 20;
/// Maximum number of jackknife blocks an ensemble is split into.
pub const JACKKNIFE_BLOCKS: usize = 64;

fn check_dims(rho0: &FockDensityMatrix, params: &AbsorberParams) -> Result<()> {
    if rho0.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: params.dim(),
        });
    }
    Ok(())
}

/// 2Γ Ĵ e^{2ΓL̂t₁} ρ(0): the jump-branch integrand.
fn jump_branch(rho0: &CMatrix, gamma: f64, t1: f64) -> CMatrix {
    jump_elements(&no_jump_elements(rho0, gamma, t1)) * Complex64::new(2.0 * gamma, 0.0)
}

/// Normalized state after a detection at `t1`, and the detection density p(t₁).
pub fn conditional_state(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t1: f64,
) -> Result<(FockDensityMatrix, f64)> {
    check_time("t1", t1)?;
    check_dims(rho0, params)?;
    let branch = FockDensityMatrix::from_parts(
        jump_branch(rho0.elements(), params.gamma(), t1),
        rho0.tail_mass_bound(),
    );
    let (state, density) = branch
        .normalized()
        .map_err(|_| Error::ZeroNorm("no photon can be detected from this state"))?;
    Ok((state, density))
}

/// Unconditional state at time `t`: no-detection branch plus the jump branches
/// integrated over t₁ ∈ [0, t] by adaptive Gauss–Kronrod quadrature to
/// `params.quad_tol()`.
pub fn unconditional_adaptive_state(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
) -> Result<FockDensityMatrix> {
    check_time("t", t)?;
    check_dims(rho0, params)?;
    let g = params.gamma();
    let mut total = no_jump_elements(rho0.elements(), g, t);
    if t > 0.0 {
        let integral = quadrature::integrate(
            |t1| jump_branch(rho0.elements(), g, t1),
            0.0,
            t,
            params.quad_tol(),
            rho0.trace().abs(),
        )?;
        total += integral.value;
    }
    Ok(FockDensityMatrix::from_parts(total, rho0.tail_mass_bound()))
}

/// Same state as [`unconditional_adaptive_state`] with the t₁ integral done
/// in closed form: every element of the integrand is a single exponential,
/// ∫₀ᵗ 2Γ e^{−Γkt₁} dt₁ = 2(1 − e^{−Γkt})/k with k = m + m' + 2.
pub fn unconditional_adaptive_state_closed_form(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
) -> Result<FockDensityMatrix> {
    check_time("t", t)?;
    check_dims(rho0, params)?;
    let g = params.gamma();
    let rho = rho0.elements();
    let dim = rho.nrows();
    let mut total = no_jump_elements(rho, g, t);
    for m in 0..dim - 1 {
        for mp in 0..dim - 1 {
            let k = (m + mp + 2) as f64;
            let w = 2.0 * (((m + 1) * (mp + 1)) as f64).sqrt();
            let factor = w * (-(-g * k * t).exp_m1()) / k;
            total[(m, mp)] += rho[(m + 1, mp + 1)] * factor;
        }
    }
    Ok(FockDensityMatrix::from_parts(total, rho0.tail_mass_bound()))
}

/// Trace-norm distance between the finite-difference derivative of the
/// unconditional state at `t` and 2Γ(Ĵ + L̂) applied to the unnormalized
/// no-detection branch e^{2ΓL̂t} ρ(0).
pub fn nonmarkov_derivative_check(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
) -> Result<f64> {
    check_time("t", t)?;
    if t <= 0.0 {
        return Err(invalid("t", "derivative check needs t > 0"));
    }
    let h = DERIVATIVE_STEP;
    let state = |s: f64| unconditional_adaptive_state(rho0, params, s).map(|r| r.into_elements());
    let derivative = if t > h {
        (state(t + h)? - state(t - h)?) / Complex64::new(2.0 * h, 0.0)
    } else {
        // one-sided second-order stencil
        (state(t)? * Complex64::new(-3.0, 0.0) + state(t + h)? * Complex64::new(4.0, 0.0)
            - state(t + 2.0 * h)?)
            / Complex64::new(2.0 * h, 0.0)
    };
    let no_detection = no_jump_elements(rho0.elements(), params.gamma(), t);
    let rhs = generator(&no_detection, params.gamma());
    Ok(trace_norm(&(derivative - rhs)))
}

/// Long-time limit of the unconditional state.
///
/// Diagonal: p_n(∞) = p_{n+1}(0) + p_0(0) δ_{n,0}. Coherences follow from
/// integrating the jump branch to infinity:
/// ρ_{m,m'}(∞) = 2√((m+1)(m'+1)) / (m+m'+2) · ρ_{m+1,m'+1}(0), plus ρ_{0,0}(0)
/// at the origin.
pub fn asymptotic_state(rho0: &FockDensityMatrix) -> FockDensityMatrix {
    let rho = rho0.elements();
    let dim = rho.nrows();
    let out = DMatrix::from_fn(dim, dim, |m, mp| {
        let shifted = if m + 1 < dim && mp + 1 < dim {
            let w = 2.0 * (((m + 1) * (mp + 1)) as f64).sqrt() / (m + mp + 2) as f64;
            rho[(m + 1, mp + 1)] * w
        } else {
            Complex64::new(0.0, 0.0)
        };
        if m == 0 && mp == 0 {
            shifted + rho[(0, 0)]
        } else {
            shifted
        }
    });
    FockDensityMatrix::from_parts(out, rho0.tail_mass_bound())
}

/// No-detection probability S(t) = Σ_n p_n e^{−2Γnt} of a fixed input,
/// normalized so that S(0) = 1.
#[derive(Debug, Clone)]
pub struct SurvivalFunction {
    probs: Vec<f64>,
    gamma: f64,
}

impl SurvivalFunction {
    pub fn new(rho0: &FockDensityMatrix, gamma: f64) -> Result<Self> {
        let pops = rho0.populations();
        let total: f64 = pops.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroNorm("input state has zero trace"));
        }
        Ok(Self {
            probs: pops.iter().map(|p| p / total).collect(),
            gamma,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| p * (-2.0 * self.gamma * n as f64 * t).exp())
            .sum()
    }

    /// −dS/dt, the first-detection density.
    pub fn density(&self, t: f64) -> f64 {
        2.0 * self.gamma
            * self
                .probs
                .iter()
                .enumerate()
                .map(|(n, p)| n as f64 * p * (-2.0 * self.gamma * n as f64 * t).exp())
                .sum::<f64>()
    }

    /// Solves S(t) = u on [0, t_max] for u ∈ [S(t_max), 1] by safeguarded
    /// Newton iteration inside a shrinking bisection bracket.
    pub fn invert(&self, u: f64, t_max: f64, tol: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, t_max);
        // S(lo) >= u >= S(hi)
        assert!(
            self.value(lo) >= u - 1e-15 && self.value(hi) <= u + 1e-15,
            "survival root not bracketed"
        );
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.value(t) - u;
            if f > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= tol {
                break;
            }
            let d = self.density(t);
            let newton = if d > 0.0 { t + f / d } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= tol {
                t = next;
                break;
            }
            t = next;
        }
        t.clamp(0.0, t_max)
    }

    /// Draws u ∈ (0, 1]; no detection by `t_max` if u ≤ S(t_max), otherwise
    /// the detection time with S(t₁) = u.
    pub fn sample<R: Rng + ?Sized>(&self, t_max: f64, tol: f64, rng: &mut R) -> Option<f64> {
        let u = 1.0 - rng.random::<f64>();
        if u <= self.value(t_max) {
            None
        } else {
            Some(self.invert(u, t_max, tol))
        }
    }
}

/// First detection time within [0, t_max] by inversion of the survival
/// function, or `None` if the absorber stays silent.
pub fn sample_first_jump_time<R: Rng + ?Sized>(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t_max: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    check_time("t_max", t_max)?;
    if t_max <= 0.0 {
        return Err(invalid("t_max", "must be > 0"));
    }
    let survival = SurvivalFunction::new(rho0, params.gamma())?;
    Ok(survival.sample(t_max, params.root_tol(), rng))
}

/// One realization of adaptive absorption up to `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub first_jump_time: Option<f64>,
    pub final_state: FockDensityMatrix,
    pub horizon: f64,
}

/// Runs a single trajectory: sample the first detection, then freeze the
/// conditional state, or damp without detection until `horizon`.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    horizon: f64,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    check_dims(rho0, params)?;
    let first_jump_time = sample_first_jump_time(rho0, params, horizon, rng)?;
    let final_state = match first_jump_time {
        Some(t1) => conditional_state(rho0, params, t1)?.0,
        None => no_detection_state(rho0, params, horizon)?,
    };
    Ok(TrajectoryRecord {
        first_jump_time,
        final_state,
        horizon,
    })
}

fn no_detection_state(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
) -> Result<FockDensityMatrix> {
    let branch = FockDensityMatrix::from_parts(
        no_jump_elements(rho0.elements(), params.gamma(), t),
        rho0.tail_mass_bound(),
    );
    Ok(branch.normalized()?.0)
}

/// Aggregate of an ensemble of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub seed: u64,
    pub mean_state: FockDensityMatrix,
    /// Detection times (or, for cascades, click indices) of the trajectories
    /// that detected a photon.
    pub jump_time_histogram: Histogram,
    pub no_jump_count: u64,
    pub no_jump_fraction: f64,
    /// Jackknife standard error of `mean_state` in trace distance, over
    /// contiguous blocks of trajectories; `None` with fewer than two blocks.
    pub jackknife_error: Option<f64>,
}

/// Per-block partial sums; blocks are combined in index order.
pub(crate) struct BlockSum {
    pub(crate) state_sum: CMatrix,
    pub(crate) count: usize,
    pub(crate) no_jump: u64,
    pub(crate) histogram: Histogram,
}

/// Trajectory `index` of the ensemble seeded with `seed` draws from its own
/// ChaCha stream, so results do not depend on how work is scheduled.
pub(crate) fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub(crate) fn block_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    let blocks = n.min(JACKKNIFE_BLOCKS).max(1);
    (0..blocks).map(|b| b * n / blocks..(b + 1) * n / blocks).collect()
}

pub(crate) fn combine_blocks(
    blocks: Vec<BlockSum>,
    n_traj: usize,
    seed: u64,
    tail_mass_bound: f64,
) -> Result<EnsembleResult> {
    let dim = blocks[0].state_sum.nrows();
    let mut total = CMatrix::zeros(dim, dim);
    let mut histogram = blocks[0].histogram.clone();
    histogram.counts.iter_mut().for_each(|c| *c = 0);
    let mut no_jump = 0;
    for b in &blocks {
        total += &b.state_sum;
        histogram.merge(&b.histogram);
        no_jump += b.no_jump;
    }
    let n = n_traj as f64;
    let mean_state = FockDensityMatrix::from_parts(&total / Complex64::new(n, 0.0), tail_mass_bound);

    let jackknife_error = if blocks.len() >= 2 {
        let b = blocks.len() as f64;
        let loo: Vec<FockDensityMatrix> = blocks
            .iter()
            .map(|blk| {
                let rest = (n_traj - blk.count) as f64;
                FockDensityMatrix::from_parts(
                    (&total - &blk.state_sum) / Complex64::new(rest, 0.0),
                    tail_mass_bound,
                )
            })
            .collect();
        let mut centre = CMatrix::zeros(dim, dim);
        for s in &loo {
            centre += s.elements();
        }
        let centre = FockDensityMatrix::from_parts(centre / Complex64::new(b, 0.0), tail_mass_bound);
        let mut sq = 0.0;
        for s in &loo {
            let d = trace_distance(s, &centre)?;
            sq += d * d;
        }
        Some(((b - 1.0) / b * sq).sqrt())
    } else {
        None
    };

    Ok(EnsembleResult {
        n_traj,
        seed,
        mean_state,
        jump_time_histogram: histogram,
        no_jump_count: no_jump,
        no_jump_fraction: no_jump as f64 / n,
        jackknife_error,
    })
}

/// Monte Carlo ensemble of `n_traj` trajectories up to time `t`, with a
/// [`DEFAULT_BINS`]-bin detection-time histogram on [0, t].
pub fn run_trajectories(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    run_trajectories_binned(rho0, params, t, n_traj, seed, DEFAULT_BINS)
}

pub fn run_trajectories_binned(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
    n_traj: usize,
    seed: u64,
    bins: usize,
) -> Result<EnsembleResult> {
    check_time("t", t)?;
    check_dims(rho0, params)?;
    if t <= 0.0 {
        return Err(invalid("t", "horizon must be > 0"));
    }
    if n_traj == 0 {
        return Err(invalid("n_traj", "need at least one trajectory"));
    }
    let g = params.gamma();
    let survival = SurvivalFunction::new(rho0, g)?;
    let template = Histogram::uniform(0.0, t, bins)?;
    let no_detection = match no_detection_state(rho0, params, t) {
        Ok(s) => s.into_elements(),
        // unreachable in practice: S(t) = 0 means no trajectory ends undetected
        Err(_) => CMatrix::zeros(rho0.dim(), rho0.dim()),
    };
    let rho = rho0.elements();

    let blocks: Vec<BlockSum> = block_ranges(n_traj)
        .into_par_iter()
        .map(|range| {
            let mut sum = CMatrix::zeros(rho.nrows(), rho.ncols());
            let mut histogram = template.clone();
            let mut no_jump = 0u64;
            let count = range.len();
            for i in range {
                let mut rng = trajectory_rng(seed, i as u64);
                match survival.sample(t, params.root_tol(), &mut rng) {
                    Some(t1) => {
                        histogram.add(t1);
                        let branch = jump_branch(rho, g, t1);
                        let norm: f64 = (0..branch.nrows()).map(|n| branch[(n, n)].re).sum();
                        sum += branch / Complex64::new(norm, 0.0);
                    }
                    None => {
                        no_jump += 1;
                        sum += &no_detection;
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

/// χ² test of an ensemble's detection-time histogram (plus the no-detection
/// count as one more category) against the exact survival function.
pub fn jump_time_chi_square(
    result: &EnsembleResult,
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
) -> Result<ChiSquareReport> {
    let survival = SurvivalFunction::new(rho0, params.gamma())?;
    let n = result.n_traj as f64;
    let edges = &result.jump_time_histogram.edges;
    let mut expected: Vec<f64> = edges
        .windows(2)
        .map(|w| n * (survival.value(w[0]) - survival.value(w[1])))
        .collect();
    expected.push(n * survival.value(*edges.last().unwrap()));
    let mut observed = result.jump_time_histogram.counts.clone();
    observed.push(result.no_jump_count);
    chi_square_test(&observed, &expected)
}

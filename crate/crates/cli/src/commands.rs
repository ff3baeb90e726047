//! The five subcommands. Each writes its artifacts to the output directory
//! and then applies its numerical self-check.

use std::path::Path;

use adaptive_absorption::adaptive::{
    jump_time_chi_square, run_trajectories_binned, unconditional_adaptive_state,
    unconditional_adaptive_state_closed_form, SurvivalFunction,
};
use adaptive_absorption::analytic::coherent_p_function;
use adaptive_absorption::cascade::{
    click_index_chi_square, continuum_convergence, run_cascade_enumerated, run_cascade_sampled,
    ConvergenceRow,
};
use adaptive_absorption::fock::{moments, trace_distance};
use adaptive_absorption::inference::{posterior_table, map_estimate, posterior_flat_prior};
use adaptive_absorption::stats::ChiSquareReport;
use adaptive_absorption::Moments;
use serde::Serialize;

use crate::config::{
    load, CascadeRunConfig, EvolveConfig, PFunctionConfig, PosteriorConfig, TrajectoriesConfig,
};
use crate::output::{pmf_header, Csv, MatrixDump, OutDir};
use crate::CliError;

/// Largest allowed trace distance between the quadrature and closed-form
/// adaptive states in `evolve`.
pub const EVOLVE_TOL: f64 = 1e-6;
/// Allowed deviation of P-function and posterior normalizations from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Allowed deviation of the cascade outcome probabilities from one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

const TIME_UNIT: &str = "1/gamma units";

pub struct RunArgs<'a> {
    pub config: &'a Path,
    pub seed: Option<u64>,
    pub out: &'a Path,
}

#[derive(Serialize)]
struct EvolveSummary {
    final_time: f64,
    trace: f64,
    moments: Moments,
    max_closed_form_deviation: f64,
    tolerance: f64,
}

pub fn evolve(args: &RunArgs) -> Result<(), CliError> {
    let cfg: EvolveConfig = load(args.config)?;
    let params = cfg.absorber.params()?;
    let rho0 = cfg.state.build(cfg.absorber.cutoff, cfg.absorber.tail_tol)?;
    let times = cfg.times.values()?;
    let out = OutDir::create(args.out)?;

    let mut header = vec![format!("t[{TIME_UNIT}]")];
    header.extend(pmf_header(rho0.dim()));
    let mut csv = Csv::new(&header);
    let mut deviation: f64 = 0.0;
    let mut last = (0.0, rho0.clone());
    for &t in &times {
        let state = unconditional_adaptive_state(&rho0, &params, t)?;
        let closed = unconditional_adaptive_state_closed_form(&rho0, &params, t)?;
        deviation = deviation.max(trace_distance(&state, &closed)?);
        csv.row(std::iter::once(t).chain(state.populations()));
        last = (t, state);
    }
    out.write("pmf.csv", &csv.finish())?;
    out.write_json("final_state.json", &MatrixDump::new(&last.1))?;
    out.write_json(
        "summary.json",
        &EvolveSummary {
            final_time: last.0,
            trace: last.1.trace(),
            moments: moments(&last.1),
            max_closed_form_deviation: deviation,
            tolerance: EVOLVE_TOL,
        },
    )?;
    if deviation > EVOLVE_TOL {
        return Err(CliError::Tolerance(format!(
            "quadrature and closed-form states differ by {deviation:e} (tolerance {EVOLVE_TOL:e})"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectorySummary {
    n_traj: usize,
    seed: u64,
    horizon: f64,
    no_jump_count: u64,
    no_jump_fraction: f64,
    no_jump_probability: f64,
    no_jump_sigma: f64,
    chi_square: Option<ChiSquareReport>,
    jackknife_error: Option<f64>,
    trace_distance_to_quadrature: f64,
    mean_state_pmf: Vec<f64>,
}

pub fn trajectories(args: &RunArgs) -> Result<(), CliError> {
    let cfg: TrajectoriesConfig = load(args.config)?;
    let params = cfg.absorber.params()?;
    let rho0 = cfg.state.build(cfg.absorber.cutoff, cfg.absorber.tail_tol)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let out = OutDir::create(args.out)?;

    let result = run_trajectories_binned(&rho0, &params, cfg.t, cfg.n_traj, seed, cfg.bins)?;
    let survival = SurvivalFunction::new(&rho0, params.gamma())?;
    let n = cfg.n_traj as f64;

    let mut csv = Csv::new(&[
        format!("bin_lo[{TIME_UNIT}]"),
        format!("bin_hi[{TIME_UNIT}]"),
        "count[trajectories]".into(),
        "expected[trajectories]".into(),
    ]);
    let hist = &result.jump_time_histogram;
    for (i, w) in hist.edges.windows(2).enumerate() {
        let expected = n * (survival.value(w[0]) - survival.value(w[1]));
        csv.row([w[0], w[1], hist.counts[i] as f64, expected]);
    }
    out.write("histogram.csv", &csv.finish())?;

    let s = survival.value(cfg.t);
    let target = unconditional_adaptive_state(&rho0, &params, cfg.t)?;
    out.write_json("mean_state.json", &MatrixDump::new(&result.mean_state))?;
    out.write_json(
        "summary.json",
        &TrajectorySummary {
            n_traj: result.n_traj,
            seed,
            horizon: cfg.t,
            no_jump_count: result.no_jump_count,
            no_jump_fraction: result.no_jump_fraction,
            no_jump_probability: s,
            no_jump_sigma: (s * (1.0 - s) / n).sqrt(),
            chi_square: jump_time_chi_square(&result, &rho0, &params).ok(),
            jackknife_error: result.jackknife_error,
            trace_distance_to_quadrature: trace_distance(&result.mean_state, &target)?,
            mean_state_pmf: result.mean_state.populations(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct PFunctionSummary {
    alpha_magnitude: f64,
    phase: f64,
    gamma_t: f64,
    peak_location: f64,
    peak_weight: f64,
    support: (f64, f64),
    continuous_mass: f64,
    continuous_mass_numeric: f64,
    normalization: f64,
}

pub fn pfunction(args: &RunArgs) -> Result<(), CliError> {
    let cfg: PFunctionConfig = load(args.config)?;
    let alpha = cfg
        .state
        .coherent_amplitude()
        .ok_or_else(|| CliError::Config("at `state`: pfunction needs a coherent input".into()))?;
    if cfg.points == 0 {
        return Err(CliError::Config("at `points`: must be >= 1".into()));
    }
    let pf = coherent_p_function(alpha, cfg.gamma, cfg.t)?;
    let out = OutDir::create(args.out)?;

    let mut csv = Csv::new(&[
        "record".into(),
        "abs_beta[amplitude]".into(),
        "value[prob or prob/amplitude^2]".into(),
    ]);
    csv.row(["peak".to_string(), pf.peak_location().to_string(), pf.delta_weight.to_string()]);
    let (lo, hi) = pf.support();
    for i in 0..cfg.points {
        let b = lo + (hi - lo) * i as f64 / cfg.points as f64;
        csv.row(["density".to_string(), b.to_string(), pf.continuous_density(b).to_string()]);
    }
    out.write("pfunction.csv", &csv.finish())?;

    let numeric = pf.continuous_mass_numeric(1e-13)?;
    let normalization = pf.delta_weight + numeric;
    out.write_json(
        "summary.json",
        &PFunctionSummary {
            alpha_magnitude: pf.alpha_mag,
            phase: pf.phase,
            gamma_t: pf.gamma_t,
            peak_location: pf.peak_location(),
            peak_weight: pf.delta_weight,
            support: (lo, hi),
            continuous_mass: pf.continuous_mass(),
            continuous_mass_numeric: numeric,
            normalization,
        },
    )?;
    if (normalization - 1.0).abs() > NORMALIZATION_TOL {
        return Err(CliError::Tolerance(format!(
            "P-function normalization {normalization} deviates from 1"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct PosteriorCheck {
    t_a: f64,
    /// Σ_{n ≤ n_max} p(n|t_a) + tail; absent at t_a = 0.
    normalization: Option<f64>,
    tail_mass: Option<f64>,
    map_estimate: Option<usize>,
}

#[derive(Serialize)]
struct PosteriorSummary {
    gamma: f64,
    n_max: usize,
    checks: Vec<PosteriorCheck>,
}

pub fn posterior(args: &RunArgs) -> Result<(), CliError> {
    let cfg: PosteriorConfig = load(args.config)?;
    let times = cfg.times.values()?;
    let rows = posterior_table(cfg.gamma, &cfg.n_list, &times)?;
    let out = OutDir::create(args.out)?;

    let mut csv = Csv::new(&[format!("t_a[{TIME_UNIT}]"), "n[photons]".into(), "p[prob]".into()]);
    for r in &rows {
        csv.row([r.t_a.to_string(), r.n.to_string(), r.p.to_string()]);
    }
    out.write("posterior.csv", &csv.finish())?;

    let mut checks = Vec::with_capacity(times.len());
    let mut worst: f64 = 0.0;
    for &t_a in &times {
        if t_a == 0.0 {
            checks.push(PosteriorCheck {
                t_a,
                normalization: None,
                tail_mass: None,
                map_estimate: None,
            });
            continue;
        }
        let post = posterior_flat_prior(t_a, cfg.gamma, cfg.n_max)?;
        worst = worst.max((post.total() - 1.0).abs());
        checks.push(PosteriorCheck {
            t_a,
            normalization: Some(post.total()),
            tail_mass: Some(post.tail_mass),
            map_estimate: Some(map_estimate(&post)),
        });
    }
    out.write_json(
        "summary.json",
        &PosteriorSummary {
            gamma: cfg.gamma,
            n_max: cfg.n_max,
            checks,
        },
    )?;
    if worst > NORMALIZATION_TOL {
        return Err(CliError::Tolerance(format!(
            "posterior normalization deviates from 1 by {worst:e}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SampledSummary {
    n_traj: usize,
    seed: u64,
    no_click_fraction: f64,
    chi_square: Option<ChiSquareReport>,
    jackknife_error: Option<f64>,
    trace_distance_to_enumeration: f64,
    mean_photon_number: f64,
}

#[derive(Serialize)]
struct CascadeSummary {
    outcomes: usize,
    probability_sum: f64,
    average_state_moments: Moments,
    convergence: Option<Vec<ConvergenceRow>>,
    sampled: Option<SampledSummary>,
}

pub fn cascade(args: &RunArgs) -> Result<(), CliError> {
    let cfg: CascadeRunConfig = load(args.config)?;
    cfg.cascade.validate()?;
    let rho0 = cfg.state.build(cfg.cutoff, cfg.tail_tol)?;
    let out = OutDir::create(args.out)?;

    let en = run_cascade_enumerated(&rho0, &cfg.cascade)?;
    let mut header = vec!["click_index[splitter]".to_string(), "probability[prob]".to_string()];
    header.extend(pmf_header(rho0.dim()));
    let mut csv = Csv::new(&header);
    for o in &en.outcomes {
        let index = o.click_index.map_or("none".to_string(), |i| i.to_string());
        let mut fields = vec![index, o.probability.to_string()];
        fields.extend(o.final_state.populations().iter().map(f64::to_string));
        csv.row(fields);
    }
    out.write("outcomes.csv", &csv.finish())?;
    out.write_json("average_state.json", &MatrixDump::new(&en.average_state))?;

    let convergence = match &cfg.convergence {
        Some(c) => {
            let rows = continuum_convergence(&rho0, c.gamma, c.t, &c.splitter_counts)?;
            let mut csv = Csv::new(&[
                "splitters[count]".into(),
                "reflectivity[prob]".into(),
                "trace_distance[1]".into(),
            ]);
            for r in &rows {
                csv.row([r.splitters.to_string(), r.reflectivity.to_string(), r.trace_distance.to_string()]);
            }
            out.write("convergence.csv", &csv.finish())?;
            Some(rows)
        }
        None => None,
    };

    let sampled = match &cfg.sampled {
        Some(s) => {
            let seed = args.seed.or(cfg.seed).unwrap_or(0);
            let r = run_cascade_sampled(&rho0, &cfg.cascade, s.n_traj, seed)?;
            Some(SampledSummary {
                n_traj: r.n_traj,
                seed,
                no_click_fraction: r.no_jump_fraction,
                chi_square: click_index_chi_square(&r, &en).ok(),
                jackknife_error: r.jackknife_error,
                trace_distance_to_enumeration: trace_distance(&r.mean_state, &en.average_state)?,
                mean_photon_number: moments(&r.mean_state).mean,
            })
        }
        None => None,
    };

    let total: f64 = en.outcomes.iter().map(|o| o.probability).sum();
    out.write_json(
        "summary.json",
        &CascadeSummary {
            outcomes: en.outcomes.len(),
            probability_sum: total,
            average_state_moments: moments(&en.average_state),
            convergence,
            sampled,
        },
    )?;
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(CliError::Tolerance(format!(
            "cascade outcome probabilities sum to {total}"
        )));
    }
    Ok(())
}

//! Photon-number inference from the first detection time.
//!
//! Adaptive absorption acts as a weak photon-number measurement: in each
//! interval dt the detector clicks with POVM element Π₁ = 2Γdt a†a. Observing
//! the first click at t_a updates a prior p_n by the likelihood
//! 2Γn e^{−2Γnt_a}.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::check_time;
use crate::error::{invalid, Error, Result};
use crate::fock::{AbsorberParams, CMatrix, PhotonNumberDistribution};

/// p(n|t_a) for n = 0..=n_max (with p(0|t_a) = 0) and a bound on the mass
/// above n_max.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorDistribution {
    pub t_a: f64,
    pub gamma: f64,
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl PosteriorDistribution {
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Σ probs + tail_mass.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail_mass
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PovmPair {
    pub pi_1: CMatrix,
    pub pi_0: CMatrix,
    pub dt: f64,
}

/// {Π₁ = 2Γdt a†a, Π₀ = 1 − Π₁} on the truncated space. Both are positive
/// only while 2Γ dt N_max < 1.
pub fn povm_elements(params: &AbsorberParams, dt: f64) -> Result<PovmPair> {
    let g = params.gamma();
    let n_max = params.cutoff() as f64;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if 2.0 * g * dt * n_max >= 1.0 {
        return Err(invalid(
            "dt",
            format!(
                "Π₀ is not positive: need dt < 1/(2Γ N_max) = {}",
                1.0 / (2.0 * g * n_max)
            ),
        ));
    }
    let dim = params.dim();
    let pi_1 = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(2.0 * g * dt * i as f64, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let pi_0 = CMatrix::identity(dim, dim) - &pi_1;
    Ok(PovmPair { pi_1, pi_0, dt })
}

/// n x^{n−1}(1 − x)² with x = e^{−2Γt_a}: the flat-prior posterior.
pub fn flat_prior_posterior_value(n: usize, t_a: f64, gamma: f64) -> Result<f64> {
    check_time("t_a", t_a)?;
    if n == 0 {
        return Ok(0.0);
    }
    let x = (-2.0 * gamma * t_a).exp();
    let one_minus_x = -(-2.0 * gamma * t_a).exp_m1();
    Ok(n as f64 * x.powi(n as i32 - 1) * one_minus_x * one_minus_x)
}

/// Posterior for an (improper) flat prior over n ≥ 1, truncated at `n_max`
/// with the exact remainder Σ_{n>n_max} = x^{n_max}(1 + n_max(1 − x)).
pub fn posterior_flat_prior(t_a: f64, gamma: f64, n_max: usize) -> Result<PosteriorDistribution> {
    check_time("t_a", t_a)?;
    if t_a == 0.0 {
        return Err(invalid("t_a", "flat-prior posterior is improper at t_a = 0"));
    }
    if n_max == 0 {
        return Err(invalid("n_max", "must be >= 1"));
    }
    let probs = (0..=n_max)
        .map(|n| flat_prior_posterior_value(n, t_a, gamma))
        .collect::<Result<Vec<_>>>()?;
    let x = (-2.0 * gamma * t_a).exp();
    let one_minus_x = -(-2.0 * gamma * t_a).exp_m1();
    let tail_mass = x.powi(n_max as i32) * (1.0 + n_max as f64 * one_minus_x);
    Ok(PosteriorDistribution {
        t_a,
        gamma,
        probs,
        tail_mass,
    })
}

fn likelihood(n: f64, t_a: f64, gamma: f64) -> f64 {
    2.0 * gamma * n * (-2.0 * gamma * n * t_a).exp()
}

/// Largest likelihood over integers n > n_max; it peaks at n = 1/(2Γt_a).
fn tail_likelihood_bound(n_max: usize, t_a: f64, gamma: f64) -> f64 {
    let first = (n_max + 1) as f64;
    if t_a == 0.0 {
        return f64::INFINITY;
    }
    let peak = 1.0 / (2.0 * gamma * t_a);
    if peak <= first {
        likelihood(first, t_a, gamma)
    } else {
        likelihood(peak.floor().max(first), t_a, gamma)
            .max(likelihood(peak.ceil(), t_a, gamma))
    }
}

/// Bayes posterior for a general prior. Prior mass τ above the cutoff enters
/// through the largest likelihood it could carry, so `tail_mass` bounds the
/// true posterior tail from above and the reported probabilities are lower
/// bounds that become exact when τ = 0.
pub fn posterior_general(
    prior: &PhotonNumberDistribution,
    t_a: f64,
    gamma: f64,
) -> Result<PosteriorDistribution> {
    check_time("t_a", t_a)?;
    let weights: Vec<f64> = prior
        .probs()
        .iter()
        .enumerate()
        .map(|(n, p)| p * likelihood(n as f64, t_a, gamma))
        .collect();
    let evidence: f64 = weights.iter().sum();
    if !(evidence > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    let tau = prior.tail_mass_bound();
    let tail_weight = if tau > 0.0 {
        tau * tail_likelihood_bound(prior.cutoff(), t_a, gamma)
    } else {
        0.0
    };
    let z = evidence + tail_weight;
    Ok(PosteriorDistribution {
        t_a,
        gamma,
        probs: weights.iter().map(|w| w / z).collect(),
        tail_mass: tail_weight / z,
    })
}

/// Most probable photon number; ties go to the smaller n.
pub fn map_estimate(post: &PosteriorDistribution) -> usize {
    let mut best = 0;
    for (n, &p) in post.probs.iter().enumerate() {
        if p > post.probs[best] {
            best = n;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorRow {
    pub t_a: f64,
    pub n: usize,
    pub p: f64,
}

/// Flat-prior posterior values p(n|t_a) for each n in `n_list` over `t_grid`,
/// grouped by n.
pub fn posterior_table(gamma: f64, n_list: &[usize], t_grid: &[f64]) -> Result<Vec<PosteriorRow>> {
    if n_list.is_empty() {
        return Err(invalid("n_list", "must not be empty"));
    }
    let mut rows = Vec::with_capacity(n_list.len() * t_grid.len());
    for &n in n_list {
        for &t_a in t_grid {
            rows.push(PosteriorRow {
                t_a,
                n,
                p: flat_prior_posterior_value(n, t_a, gamma)?,
            });
        }
    }
    Ok(rows)
}

/// Posterior after `steps` no-click updates with Π₀ at dt = t_a/steps followed
/// by one Π₁ click, for a prior supported within the cutoff.
pub fn sequential_povm_posterior(
    prior: &PhotonNumberDistribution,
    gamma: f64,
    t_a: f64,
    steps: usize,
) -> Result<PosteriorDistribution> {
    check_time("t_a", t_a)?;
    if steps == 0 || t_a == 0.0 {
        return Err(invalid("steps", "need t_a > 0 and at least one step"));
    }
    if prior.tail_mass_bound() > 0.0 {
        return Err(invalid("prior", "sequential update needs a prior without tail mass"));
    }
    let params = AbsorberParams::new(gamma, prior.cutoff().max(1))?;
    let povm = povm_elements(&params, t_a / steps as f64)?;
    let weights: Vec<f64> = prior
        .probs()
        .iter()
        .enumerate()
        .map(|(n, p)| p * povm.pi_0[(n, n)].re.powi(steps as i32) * povm.pi_1[(n, n)].re)
        .collect();
    let z: f64 = weights.iter().sum();
    if !(z > 0.0) {
        return Err(Error::ZeroEvidence);
    }
    Ok(PosteriorDistribution {
        t_a,
        gamma,
        probs: weights.iter().map(|w| w / z).collect(),
        tail_mass: 0.0,
    })
}

/// Largest absolute difference between two posteriors (tails included).
pub fn posterior_max_difference(a: &PosteriorDistribution, b: &PosteriorDistribution) -> f64 {
    let n = a.probs.len().max(b.probs.len());
    (0..n)
        .map(|i| (a.prob(i) - b.prob(i)).abs())
        .fold((a.tail_mass - b.tail_mass).abs(), f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform(n_max: usize) -> PhotonNumberDistribution {
        let mut probs = vec![1.0 / n_max as f64; n_max + 1];
        probs[0] = 0.0;
        PhotonNumberDistribution::from_probs(probs).unwrap()
    }

    #[test]
    fn povm_examples() {
        let p = AbsorberParams::new(1.0, 5).unwrap();
        let povm = povm_elements(&p, 0.05).unwrap();
        assert_eq!(povm.pi_1[(0, 0)].re, 0.0);
        assert_abs_diff_eq!(povm.pi_1[(3, 3)].re, 2.0 * 0.05 * 3.0, epsilon = 1e-15);
        assert_eq!(&povm.pi_0 + &povm.pi_1, CMatrix::identity(6, 6));
        let err = povm_elements(&p, 0.1).unwrap_err();
        assert!(err.to_string().contains("0.1"), "{err}");
    }

    #[test]
    fn flat_prior_spot_values() {
        // x = 1/4
        let t = 0.5 * 4f64.ln();
        let post = posterior_flat_prior(t, 1.0, 10).unwrap();
        assert_abs_diff_eq!(post.prob(1), 9.0 / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.prob(2), 9.0 / 32.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.prob(3), 27.0 / 256.0, epsilon = 1e-12);
        assert_eq!(post.prob(0), 0.0);
        assert_eq!(map_estimate(&post), 1);
        assert!(posterior_flat_prior(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn flat_prior_normalization() {
        for gt in [0.05, 0.2, 2f64.ln(), 2.0] {
            for n_max in [1, 5, 40, 400] {
                let post = posterior_flat_prior(gt, 1.0, n_max).unwrap();
                assert_abs_diff_eq!(post.total(), 1.0, epsilon = 1e-9);
            }
        }
        let late = posterior_flat_prior(20.0, 1.0, 10).unwrap();
        assert_abs_diff_eq!(late.prob(1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tail_matches_brute_force_sum() {
        let (t, n_max) = (0.2, 7);
        let post = posterior_flat_prior(t, 1.0, n_max).unwrap();
        let brute: f64 = (n_max + 1..5000)
            .map(|n| flat_prior_posterior_value(n, t, 1.0).unwrap())
            .sum();
        assert_abs_diff_eq!(post.tail_mass, brute, epsilon = 1e-13);
    }

    #[test]
    fn general_posterior_examples() {
        let point = PhotonNumberDistribution::point(3, 6).unwrap();
        let post = posterior_general(&point, 0.7, 1.0).unwrap();
        assert_eq!(post.prob(3), 1.0);
        assert_eq!(map_estimate(&post), 3);

        let mut probs = vec![0.0; 6];
        probs[1] = 0.5;
        probs[5] = 0.5;
        let prior = PhotonNumberDistribution::from_probs(probs).unwrap();
        let post = posterior_general(&prior, 0.1, 1.0).unwrap();
        let odds = 5.0 * (-0.8f64).exp();
        assert_abs_diff_eq!(post.prob(5) / post.prob(1), odds, epsilon = 1e-12);
        assert_abs_diff_eq!(post.prob(5), odds / (1.0 + odds), epsilon = 1e-12);
        assert_abs_diff_eq!(post.prob(5), 0.6920, epsilon = 1e-4);

        let vac = PhotonNumberDistribution::point(0, 3).unwrap();
        assert!(matches!(posterior_general(&vac, 0.5, 1.0), Err(Error::ZeroEvidence)));
    }

    #[test]
    fn uniform_prior_recovers_flat_posterior() {
        let t = 0.3;
        let n_max = 400;
        let general = posterior_general(&uniform(n_max), t, 1.0).unwrap();
        let flat = posterior_flat_prior(t, 1.0, n_max).unwrap();
        assert!(posterior_max_difference(&general, &flat) < 1e-9);
    }

    #[test]
    fn tail_bound_is_conservative() {
        // prior with unresolved mass above the cutoff
        let prior = PhotonNumberDistribution::new(vec![0.0, 0.3, 0.3, 0.3], 0.1).unwrap();
        let post = posterior_general(&prior, 0.05, 1.0).unwrap();
        assert_abs_diff_eq!(post.total(), 1.0, epsilon = 1e-15);
        // any actual placement of the tail mass, e.g. all at n = 10
        let mut probs = vec![0.0, 0.3, 0.3, 0.3];
        probs.resize(11, 0.0);
        probs[10] = 0.1;
        let exact = posterior_general(&PhotonNumberDistribution::from_probs(probs).unwrap(), 0.05, 1.0).unwrap();
        assert!(exact.prob(10) <= post.tail_mass + 1e-15);
    }

    #[test]
    fn map_small_time_picks_cutoff() {
        let post = posterior_flat_prior(1e-4, 1.0, 12).unwrap();
        assert_eq!(map_estimate(&post), 12);
    }

    #[test]
    fn posterior_table_rows() {
        let rows = posterior_table(1.0, &[1, 2, 5], &[0.0, 0.5 * 4f64.ln(), 1.0]).unwrap();
        assert_eq!(rows.len(), 9);
        assert!(rows.iter().all(|r| r.p >= 0.0));
        assert_abs_diff_eq!(rows[4].p, 0.28125, epsilon = 1e-12);
        assert!(posterior_table(1.0, &[], &[1.0]).is_err());
    }

    #[test]
    fn sequential_povm_is_first_order() {
        let prior = uniform(30);
        let exact = posterior_general(&prior, 0.5, 1.0).unwrap();
        let coarse = sequential_povm_posterior(&prior, 1.0, 0.5, 50).unwrap();
        let fine = sequential_povm_posterior(&prior, 1.0, 0.5, 500).unwrap();
        let ratio = posterior_max_difference(&coarse, &exact) / posterior_max_difference(&fine, &exact);
        assert!((8.5..11.5).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn mode_bound(gt in 0.01f64..3.0) {
            let x = (-2.0 * gt).exp();
            let bound = (x / (1.0 - x)).ceil() as usize + 1;
            let post = posterior_flat_prior(gt, 1.0, bound + 50).unwrap();
            let mode = map_estimate(&post);
            prop_assert!(mode <= bound);
            for n in mode.max(1)..post.n_max() {
                prop_assert!(post.prob(n + 1) <= post.prob(n));
            }
        }

        #[test]
        fn flat_normalization(gt in 0.02f64..5.0, n_max in 1usize..200) {
            let post = posterior_flat_prior(gt, 1.0, n_max).unwrap();
            prop_assert!((post.total() - 1.0).abs() < 1e-9);
        }
    }
}

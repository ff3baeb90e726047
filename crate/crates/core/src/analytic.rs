//! Closed-form results for coherent, number-state and general diagonal inputs.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::check_time;
use crate::error::{invalid, Result};
use crate::fock::{
    coherent_amplitudes, CMatrix, FockDensityMatrix, Moments, PhotonNumberDistribution,
};
use crate::quadrature;

/// First-detection density for a coherent input:
/// 2Γ|α|² e^{−2Γt₁} exp[−|α|²(1 − e^{−2Γt₁})].
pub fn coherent_jump_density(alpha: Complex64, gamma: f64, t1: f64) -> Result<f64> {
    check_time("t1", t1)?;
    let a2 = alpha.norm_sqr();
    let decay = (-2.0 * gamma * t1).exp();
    Ok(2.0 * gamma * a2 * decay * (a2 * (-2.0 * gamma * t1).exp_m1()).exp())
}

/// exp[−|α|²(1 − e^{−2Γt})].
pub fn coherent_no_jump_probability(alpha: Complex64, gamma: f64, t: f64) -> Result<f64> {
    check_time("t", t)?;
    Ok((alpha.norm_sqr() * (-2.0 * gamma * t).exp_m1()).exp())
}

/// 2Γn e^{−2Γnt₁}.
pub fn number_jump_density(n: usize, gamma: f64, t1: f64) -> Result<f64> {
    check_time("t1", t1)?;
    let n = n as f64;
    Ok(2.0 * gamma * n * (-2.0 * gamma * n * t1).exp())
}

/// Radial P-representation of the adaptively absorbed coherent state: a
/// singular peak of weight `delta_weight` at |β| = |α|e^{−Γt} plus the density
/// 2e^{|β|²−|α|²} on [|α|e^{−Γt}, |α|), all at phase arg α. Densities are
/// with respect to |β| d|β| (the angular delta integrated out).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PFunctionRadial {
    pub alpha_mag: f64,
    pub phase: f64,
    pub gamma_t: f64,
    pub delta_weight: f64,
}

impl PFunctionRadial {
    pub fn peak_location(&self) -> f64 {
        self.alpha_mag * (-self.gamma_t).exp()
    }

    /// Half-open support [lo, hi) of the continuous part.
    pub fn support(&self) -> (f64, f64) {
        (self.peak_location(), self.alpha_mag)
    }

    pub fn continuous_density(&self, b: f64) -> f64 {
        let (lo, hi) = self.support();
        if b >= lo && b < hi {
            2.0 * (b * b - self.alpha_mag * self.alpha_mag).exp()
        } else {
            0.0
        }
    }

    /// ∫ density(b) b db from the antiderivative e^{b²−|α|²}.
    pub fn continuous_mass(&self) -> f64 {
        let lo = self.peak_location();
        -(lo * lo - self.alpha_mag * self.alpha_mag).exp_m1()
    }

    /// ∫ density(b) b db by adaptive quadrature.
    pub fn continuous_mass_numeric(&self, tol: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if hi <= lo {
            return Ok(0.0);
        }
        let a2 = self.alpha_mag * self.alpha_mag;
        let r = quadrature::integrate(|b: f64| 2.0 * (b * b - a2).exp() * b, lo, hi, tol, 1.0)?;
        Ok(r.value)
    }

    /// Peak weight plus the numerically integrated continuous part.
    pub fn normalization(&self, tol: f64) -> Result<f64> {
        Ok(self.delta_weight + self.continuous_mass_numeric(tol)?)
    }

    /// w|β₀⟩⟨β₀| + ∫ density(b) b |β⟩⟨β| db, with composite Simpson on
    /// `intervals` (rounded up to even) panels.
    pub fn reconstruct_state(&self, cutoff: usize, intervals: usize) -> Result<FockDensityMatrix> {
        let dim = cutoff + 1;
        let projector = |b: f64| {
            let amps = coherent_amplitudes(Complex64::from_polar(b, self.phase), cutoff);
            let v = nalgebra::DVector::from_vec(amps);
            &v * v.adjoint()
        };
        let mut out: CMatrix = projector(self.peak_location()) * Complex64::new(self.delta_weight, 0.0);
        let (lo, hi) = self.support();
        if hi > lo {
            let m = intervals.max(2).next_multiple_of(2);
            let h = (hi - lo) / m as f64;
            let a2 = self.alpha_mag * self.alpha_mag;
            for i in 0..=m {
                let b = lo + h * i as f64;
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                // closed upper end: the integrand is continuous there
                let f = 2.0 * (b * b - a2).exp() * b;
                out += projector(b) * Complex64::new(w * h / 3.0 * f, 0.0);
            }
        }
        debug_assert_eq!(out.nrows(), dim);
        let tail = crate::fock::poisson_tail(self.alpha_mag * self.alpha_mag, cutoff);
        Ok(FockDensityMatrix::from_parts(out, tail))
    }
}

pub fn coherent_p_function(alpha: Complex64, gamma: f64, t: f64) -> Result<PFunctionRadial> {
    check_time("t", t)?;
    if alpha.norm() == 0.0 {
        return Err(invalid("alpha", "P-function support degenerates for alpha = 0"));
    }
    Ok(PFunctionRadial {
        alpha_mag: alpha.norm(),
        phase: alpha.arg(),
        gamma_t: gamma * t,
        delta_weight: coherent_no_jump_probability(alpha, gamma, t)?,
    })
}

/// e^{−2nΓt}|n⟩⟨n| + (1 − e^{−2nΓt})|n−1⟩⟨n−1|; vacuum for n = 0.
pub fn number_unconditional(n: usize, gamma: f64, t: f64, cutoff: usize) -> Result<FockDensityMatrix> {
    check_time("t", t)?;
    if n > cutoff {
        return Err(invalid("n", format!("{n} exceeds cutoff {cutoff}")));
    }
    let mut probs = vec![0.0; cutoff + 1];
    if n == 0 {
        probs[0] = 1.0;
    } else {
        let x = -(-2.0 * n as f64 * gamma * t).exp_m1();
        probs[n] = 1.0 - x;
        probs[n - 1] = x;
    }
    Ok(FockDensityMatrix::diagonal(&PhotonNumberDistribution::from_parts(probs, 0.0)))
}

/// Photon-number distribution under adaptive absorption at time t:
/// p_n(t) = e^{−2nΓt} p_n + (1 − e^{−2(n+1)Γt}) p_{n+1}.
pub fn statistics_at_time(
    p_in: &PhotonNumberDistribution,
    gamma: f64,
    t: f64,
) -> Result<PhotonNumberDistribution> {
    check_time("t", t)?;
    let p = p_in.probs();
    let out = (0..p.len())
        .map(|n| {
            let stay = (-2.0 * n as f64 * gamma * t).exp();
            let moved = -(-2.0 * (n + 1) as f64 * gamma * t).exp_m1();
            stay * p[n] + moved * p_in.prob(n + 1)
        })
        .collect();
    Ok(PhotonNumberDistribution::from_parts(out, p_in.tail_mass_bound()))
}

/// p_n(∞) = p_{n+1} + p_0 δ_{n,0}.
pub fn asymptotic_distribution(p_in: &PhotonNumberDistribution) -> PhotonNumberDistribution {
    let p = p_in.probs();
    let mut out: Vec<f64> = (0..p.len()).map(|n| p_in.prob(n + 1)).collect();
    out[0] += p[0];
    PhotonNumberDistribution::from_parts(out, p_in.tail_mass_bound())
}

/// Long-time moments from the input moments and vacuum probability p₀:
/// n̄ + p₀ − 1, Δn² − p₀(n̄ + n̄(∞)), and :Δn²: + 1 − p₀(2n̄ + p₀).
pub fn asymptotic_moments(p_in: &PhotonNumberDistribution) -> Moments {
    let m = p_in.moments();
    let p0 = p_in.prob(0);
    let mean = m.mean + p0 - 1.0;
    Moments {
        mean,
        variance: m.variance - p0 * (m.mean + mean),
        normally_ordered_variance: m.normally_ordered_variance + 1.0 - p0 * (2.0 * m.mean + p0),
    }
}

/// p₀|0⟩ + (1 − p₀)|N⟩ photon-number mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPointInput {
    pub p0: f64,
    pub n: usize,
}

impl TwoPointInput {
    pub fn new(p0: f64, n: usize) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(invalid("p0", format!("must lie in (0, 1), got {p0}")));
        }
        if n == 0 {
            return Err(invalid("N", "must be >= 1"));
        }
        Ok(Self { p0, n })
    }

    pub fn distribution(&self, cutoff: usize) -> Result<PhotonNumberDistribution> {
        if self.n > cutoff {
            return Err(invalid("N", format!("{} exceeds cutoff {cutoff}", self.n)));
        }
        let mut probs = vec![0.0; cutoff + 1];
        probs[0] = self.p0;
        probs[self.n] = 1.0 - self.p0;
        PhotonNumberDistribution::from_probs(probs)
    }
}

/// Normally ordered variances of the two-point input family before and after
/// complete adaptive absorption, as functions of N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubPoissonianWindow {
    pub p0: f64,
}

impl SubPoissonianWindow {
    /// N(1 − p₀)(Np₀ − 1).
    pub fn input_nov(&self, n: u64) -> f64 {
        let n = n as f64;
        n * (1.0 - self.p0) * (n * self.p0 - 1.0)
    }

    /// (N − 1)(1 − p₀)((N − 1)p₀ − 1).
    pub fn output_nov(&self, n: u64) -> f64 {
        self.input_nov(n.saturating_sub(1))
    }

    /// Integers N with super-Poissonian input and sub-Poissonian output.
    pub fn window(&self) -> Option<RangeInclusive<u64>> {
        // both conditions fail for N > 1/p0 + 1
        let upper = (1.0 / self.p0).ceil() as u64 + 2;
        let hits: Vec<u64> = (1..=upper)
            .filter(|&n| self.input_nov(n) > 0.0 && self.output_nov(n) < 0.0)
            .collect();
        Some(*hits.first()?..=*hits.last()?)
    }
}

pub fn sub_poissonian_window(p0: f64) -> Result<SubPoissonianWindow> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(invalid("p0", format!("must lie in (0, 1), got {p0}")));
    }
    Ok(SubPoissonianWindow { p0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::unconditional_adaptive_state;
    use crate::dynamics::jump_time_density;
    use crate::fock::{coherent_state, number_state, trace_distance};
    use crate::AbsorberParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const ONE: Complex64 = Complex64::new(1.0, 0.0);

    #[test]
    fn coherent_density_examples() {
        assert_abs_diff_eq!(coherent_jump_density(ONE, 0.7, 0.0).unwrap(), 1.4, epsilon = 1e-15);
        let d = coherent_jump_density(ONE, 1.0, 1.0).unwrap();
        let e2 = (-2.0f64).exp();
        assert_abs_diff_eq!(d, 2.0 * e2 * (-(1.0 - e2)).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.114004, epsilon = 1e-6);
        let total = quadrature::integrate(
            |t: f64| coherent_jump_density(ONE, 1.0, t).unwrap(),
            0.0,
            40.0,
            1e-12,
            1.0,
        )
        .unwrap()
        .value;
        assert_abs_diff_eq!(total, 1.0 - (-1.0f64).exp(), epsilon = 1e-11);
    }

    #[test]
    fn coherent_density_matches_numeric() {
        let a = Complex64::new(0.8, 1.1);
        let p = AbsorberParams::new(0.6, 30).unwrap();
        let rho = coherent_state(a, 30).unwrap();
        for t1 in [0.0, 0.2, 1.0, 3.0] {
            let d = jump_time_density(&rho, &p, t1).unwrap();
            assert_abs_diff_eq!(d, coherent_jump_density(a, 0.6, t1).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn no_jump_examples() {
        assert_eq!(coherent_no_jump_probability(ONE, 1.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(coherent_no_jump_probability(ONE, 1.0, 1.0).unwrap(), 0.421193, epsilon = 1e-6);
        assert_abs_diff_eq!(
            coherent_no_jump_probability(ONE, 1.0, 50.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn number_density_examples() {
        assert_eq!(number_jump_density(0, 1.0, 0.3).unwrap(), 0.0);
        assert_abs_diff_eq!(number_jump_density(2, 0.5, 1.0).unwrap(), 2.0 * (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn p_function_examples() {
        let p = coherent_p_function(ONE, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.delta_weight, 0.421193, epsilon = 1e-6);
        assert_abs_diff_eq!(p.continuous_mass(), 0.578807, epsilon = 1e-6);
        let (lo, hi) = p.support();
        assert_abs_diff_eq!(lo, 0.36788, epsilon = 1e-5);
        assert_eq!(hi, 1.0);
        assert_eq!(p.continuous_density(1.0), 0.0);
        assert_eq!(p.continuous_density(0.3), 0.0);
        let p0 = coherent_p_function(ONE, 1.0, 0.0).unwrap();
        assert_eq!(p0.delta_weight, 1.0);
        assert_eq!(p0.continuous_mass(), 0.0);
        assert!(coherent_p_function(Complex64::new(0.0, 0.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn p_function_normalization_grid() {
        for a in [0.5, 1.0, 2.0] {
            for gt in [0.1, 1.0, 3.0] {
                let p = coherent_p_function(Complex64::new(a, 0.0), 1.0, gt).unwrap();
                assert_abs_diff_eq!(p.normalization(1e-12).unwrap(), 1.0, epsilon = 1e-9);
                assert_abs_diff_eq!(p.delta_weight + p.continuous_mass(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn p_function_reconstructs_adaptive_state() {
        let a = Complex64::from_polar(1.2, -0.5);
        let p = AbsorberParams::new(1.0, 30).unwrap();
        let rho = coherent_state(a, 30).unwrap();
        let target = unconditional_adaptive_state(&rho, &p, 0.8).unwrap();
        let recon = coherent_p_function(a, 1.0, 0.8).unwrap().reconstruct_state(30, 200).unwrap();
        assert!(trace_distance(&recon, &target).unwrap() < 1e-4);
    }

    #[test]
    fn number_unconditional_examples() {
        let s = number_unconditional(1, 1.0, 0.5 * 2f64.ln(), 3).unwrap();
        assert_abs_diff_eq!(s.populations()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.populations()[1], 0.5, epsilon = 1e-15);
        assert_eq!(number_unconditional(4, 1.0, 0.0, 5).unwrap(), number_state(4, 5).unwrap());
        assert_eq!(number_unconditional(0, 1.0, 2.0, 5).unwrap(), FockDensityMatrix::vacuum(5));
    }

    #[test]
    fn statistics_examples() {
        let p = PhotonNumberDistribution::point(2, 4).unwrap();
        // e^{-4Γt} = 1/4
        let t = 0.25 * 4f64.ln();
        let out = statistics_at_time(&p, 1.0, t).unwrap();
        assert_abs_diff_eq!(out.prob(2), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(out.prob(1), 0.75, epsilon = 1e-15);
        let two = PhotonNumberDistribution::from_probs(vec![0.4, 0.0, 0.0, 0.6]).unwrap();
        assert_eq!(statistics_at_time(&two, 1.0, 0.0).unwrap(), two);
        let late = statistics_at_time(&two, 1.0, 30.0).unwrap();
        let asym = asymptotic_distribution(&two);
        assert_eq!(asym.probs(), &[0.4, 0.0, 0.6, 0.0]);
        for n in 0..4 {
            assert_abs_diff_eq!(late.prob(n), asym.prob(n), epsilon = 1e-15);
        }
    }

    #[test]
    fn asymptotic_poisson() {
        let probs: Vec<f64> = (0..30)
            .scan(1.0f64, |f, n| {
                if n > 0 {
                    *f *= n as f64;
                }
                Some((-1.0f64).exp() / *f)
            })
            .collect();
        let dist = PhotonNumberDistribution::from_parts(probs, crate::fock::poisson_tail(1.0, 29));
        assert_abs_diff_eq!(asymptotic_distribution(&dist).prob(0), 2.0 * (-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn asymptotic_moment_examples() {
        let vac = PhotonNumberDistribution::point(0, 3).unwrap();
        assert_eq!(asymptotic_moments(&vac).mean, 0.0);
        let two = TwoPointInput::new(0.4, 3).unwrap().distribution(3).unwrap();
        let m = asymptotic_moments(&two);
        assert_abs_diff_eq!(m.mean, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance, 0.96, epsilon = 1e-12);
        assert_abs_diff_eq!(m.normally_ordered_variance, -0.24, epsilon = 1e-12);
    }

    #[test]
    fn window_examples() {
        let w = sub_poissonian_window(0.4).unwrap();
        assert_abs_diff_eq!(w.input_nov(3), 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(w.output_nov(3), -0.24, epsilon = 1e-12);
        assert_eq!(w.window(), Some(3..=3));
        let half = sub_poissonian_window(0.5).unwrap();
        assert_abs_diff_eq!(half.output_nov(2), -0.25, epsilon = 1e-15);
        assert_eq!(half.input_nov(2), 0.0);
        assert_eq!(half.window(), None);
        for p0 in [0.1, 0.3, 0.77] {
            assert_eq!(sub_poissonian_window(p0).unwrap().output_nov(1), 0.0);
        }
        let w = sub_poissonian_window(0.15).unwrap();
        // 1/p0 = 6.67: only N = 7
        assert_eq!(w.window(), Some(7..=7));
        assert!(sub_poissonian_window(1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn moment_formulas_match_shift(raw in proptest::collection::vec(0.0f64..1.0, 13)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-3);
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let dist = PhotonNumberDistribution::from_parts(probs, 0.0);
            let a = asymptotic_moments(&dist);
            let b = asymptotic_distribution(&dist).moments();
            prop_assert!((a.mean - b.mean).abs() < 1e-9);
            prop_assert!((a.variance - b.variance).abs() < 1e-9);
            prop_assert!((a.normally_ordered_variance - b.normally_ordered_variance).abs() < 1e-9);
        }
    }
}

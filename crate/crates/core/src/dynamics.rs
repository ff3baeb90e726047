//! Linear absorption: the jump and no-jump superoperators of the damped
//! oscillator, its closed-form solution as a beam-splitter loss channel, and
//! first-detection statistics.
//!
//! Times are in the same units as 1/Γ. With n, n' Fock indices:
//!
//! * jump: (aρa†)_{n,n'} = √((n+1)(n'+1)) ρ_{n+1,n'+1}
//! * no-jump propagation over dt: ρ_{n,n'} ↦ e^{−Γ(n+n')dt} ρ_{n,n'}
//! * unconditional evolution over t: loss channel with η = e^{−2Γt}

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fock::{AbsorberParams, CMatrix, FockDensityMatrix, PhotonNumberDistribution};

/// Beam-splitter loss channel with transmissivity η ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel {
    eta: f64,
}

impl LossChannel {
    pub fn new(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta <= 1.0 {
            Ok(Self { eta })
        } else {
            Err(invalid("eta", format!("transmissivity must lie in (0, 1], got {eta}")))
        }
    }

    /// The channel produced by running the absorber for time `t`: η = e^{−2Γt}.
    pub fn from_absorber(gamma: f64, t: f64) -> Result<Self> {
        check_time("t", t)?;
        Self::new((-2.0 * gamma * t).exp())
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Σ_k A_k ρ A_k† with A_k = Σ_n √C(n,k) η^{(n−k)/2} (1−η)^{k/2} |n−k⟩⟨n|.
    pub fn apply(&self, rho: &FockDensityMatrix) -> FockDensityMatrix {
        let weights: Vec<f64> = (0..rho.dim()).map(|k| (1.0 - self.eta).powi(k as i32)).collect();
        FockDensityMatrix::from_parts(
            weighted_kraus_sum(rho.elements(), self.eta, &weights),
            rho.tail_mass_bound(),
        )
    }
}

/// Σ_k w_k B_k ρ B_k† for the k-photon removal operators B_k of a splitter
/// with transmissivity `eta`; `weights[k]` multiplies the k-photon term and
/// already contains the (1−η)^k factor.
pub(crate) fn weighted_kraus_sum(rho: &CMatrix, eta: f64, weights: &[f64]) -> CMatrix {
    let dim = rho.nrows();
    let sqrt_binom = sqrt_binomial_table(dim);
    let amp: Vec<f64> = (0..dim).map(|m| eta.powf(0.5 * m as f64)).collect();
    CMatrix::from_fn(dim, dim, |m, mp| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..dim - m.max(mp) {
            let w = weights[k];
            if w == 0.0 {
                continue;
            }
            let c = sqrt_binom[m + k][k] * sqrt_binom[mp + k][k] * w;
            acc += rho[(m + k, mp + k)] * c;
        }
        acc * (amp[m] * amp[mp])
    })
}

/// table[n][k] = √C(n, k) for n < dim.
fn sqrt_binomial_table(dim: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; dim]; dim];
    for (n, row) in table.iter_mut().enumerate() {
        let mut c = 1.0f64;
        for k in 0..=n {
            row[k] = c.sqrt();
            c = c * (n - k) as f64 / (k + 1) as f64;
        }
    }
    table
}

pub(crate) fn check_time(name: &'static str, t: f64) -> Result<f64> {
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(invalid(name, format!("time must be finite and >= 0, got {t}")))
    }
}

/// Ĵρ = aρa†, unnormalized, with its trace n̄.
pub fn jump_map(rho: &FockDensityMatrix) -> (FockDensityMatrix, f64) {
    let out = FockDensityMatrix::from_parts(jump_elements(rho.elements()), rho.tail_mass_bound());
    let norm = out.trace();
    (out, norm)
}

pub(crate) fn jump_elements(rho: &CMatrix) -> CMatrix {
    let dim = rho.nrows();
    CMatrix::from_fn(dim, dim, |n, m| {
        if n + 1 < dim && m + 1 < dim {
            rho[(n + 1, m + 1)] * (((n + 1) * (m + 1)) as f64).sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub(crate) fn no_jump_elements(rho: &CMatrix, gamma: f64, dt: f64) -> CMatrix {
    let decay: Vec<f64> = (0..rho.nrows()).map(|n| (-gamma * n as f64 * dt).exp()).collect();
    CMatrix::from_fn(rho.nrows(), rho.ncols(), |n, m| rho[(n, m)] * (decay[n] * decay[m]))
}

/// e^{2ΓL̂dt}ρ, unnormalized, with its trace (the probability of no detection
/// during dt).
pub fn no_jump_propagate(
    rho: &FockDensityMatrix,
    params: &AbsorberParams,
    dt: f64,
) -> Result<(FockDensityMatrix, f64)> {
    check_time("dt", dt)?;
    let out = FockDensityMatrix::from_parts(
        no_jump_elements(rho.elements(), params.gamma(), dt),
        rho.tail_mass_bound(),
    );
    let norm = out.trace();
    Ok((out, norm))
}

/// Unconditional damping for time `t`, in closed form as the loss channel
/// with η = e^{−2Γt}.
pub fn master_evolve(
    rho: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
) -> Result<FockDensityMatrix> {
    Ok(LossChannel::from_absorber(params.gamma(), t)?.apply(rho))
}

/// 2Γ(Ĵ + L̂)ρ, the right-hand side of the damped-oscillator master equation.
pub fn generator(rho: &CMatrix, gamma: f64) -> CMatrix {
    let mut out = jump_elements(rho);
    for n in 0..rho.nrows() {
        for m in 0..rho.ncols() {
            out[(n, m)] -= rho[(n, m)] * (0.5 * (n + m) as f64);
        }
    }
    out * Complex64::new(2.0 * gamma, 0.0)
}

/// Binomial photon statistics behind a beam splitter of transmissivity `eta`
/// fed with |n⟩ and vacuum.
pub fn beam_splitter_transmit_distribution(
    n: usize,
    eta: f64,
) -> Result<PhotonNumberDistribution> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta", format!("must lie in [0, 1], got {eta}")));
    }
    let mut probs = Vec::with_capacity(n + 1);
    let mut binom = 1.0f64;
    for m in 0..=n {
        probs.push(binom * eta.powi(m as i32) * (1.0 - eta).powi((n - m) as i32));
        binom = binom * (n - m) as f64 / (m + 1) as f64;
    }
    Ok(PhotonNumberDistribution::from_parts(probs, 0.0))
}

/// S(t) = Σ_n p_n e^{−2Γnt}: probability that no photon has been absorbed by `t`.
pub fn survival_probability(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t: f64,
) -> Result<f64> {
    check_time("t", t)?;
    let g = params.gamma();
    Ok(rho0
        .populations()
        .iter()
        .enumerate()
        .map(|(n, p)| p * (-2.0 * g * n as f64 * t).exp())
        .sum())
}

/// Density of the first absorption at t1: 2Γ Tr[Ĵ e^{2ΓL̂t1} ρ(0)] = 2Γ Σ_n n p_n e^{−2Γn t1}.
pub fn jump_time_density(
    rho0: &FockDensityMatrix,
    params: &AbsorberParams,
    t1: f64,
) -> Result<f64> {
    check_time("t1", t1)?;
    let g = params.gamma();
    Ok(2.0
        * g
        * rho0
            .populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p * (-2.0 * g * n as f64 * t1).exp())
            .sum::<f64>())
}

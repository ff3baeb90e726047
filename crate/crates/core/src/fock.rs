//! Truncated Fock-basis states of a single bosonic mode.
//!
//! A [`FockDensityMatrix`] stores ρ_{n,n'} for n, n' ∈ 0..=cutoff together with
//! a declared upper bound on the probability mass that lives above the cutoff.
//! Constructors compute that mass exactly; maps that act on states carry the
//! bound along (sums of bounds for mixtures), so truncation error stays
//! visible all the way down to the outputs.
//!
//! Unnormalized branches (a conditional state before renormalization) are
//! passed around as `(FockDensityMatrix, norm)` pairs, where `norm` is the
//! trace of the matrix and equals the branch probability or density.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance used by [`FockDensityMatrix::validate`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for normalized states.
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Default bound on the Poisson tail a coherent-state constructor may drop.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Parameters of the monitored absorber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorberParams {
    gamma: f64,
    cutoff: usize,
    quad_tol: f64,
    root_tol: f64,
}

impl AbsorberParams {
    /// Coupling rate `gamma` (1/time) and Fock cutoff N_max, with default
    /// tolerances (`quad_tol` = `root_tol` = 1e-12).
    pub fn new(gamma: f64, cutoff: usize) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid("gamma", format!("must be finite and > 0, got {gamma}")));
        }
        if cutoff < 1 {
            return Err(invalid("cutoff", "must be at least 1"));
        }
        Ok(Self {
            gamma,
            cutoff,
            quad_tol: 1e-12,
            root_tol: 1e-12,
        })
    }

    pub fn with_quad_tol(mut self, tol: f64) -> Result<Self> {
        self.quad_tol = check_tol("quad_tol", tol)?;
        Ok(self)
    }

    pub fn with_root_tol(mut self, tol: f64) -> Result<Self> {
        self.root_tol = check_tol("root_tol", tol)?;
        Ok(self)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn root_tol(&self) -> f64 {
        self.root_tol
    }
}

fn check_tol(name: &'static str, tol: f64) -> Result<f64> {
    if tol > 0.0 && tol <= 1e-2 {
        Ok(tol)
    } else {
        Err(invalid(name, format!("must lie in (0, 1e-2], got {tol}")))
    }
}

/// Photon-number probabilities p_0..p_{N_max} plus a bound on the mass above N_max.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    tail_mass_bound: f64,
}

impl PhotonNumberDistribution {
    pub fn new(probs: Vec<f64>, tail_mass_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("probs", "distribution must have at least one entry"));
        }
        if let Some((n, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(invalid("probs", format!("p_{n} = {p} is not a probability")));
        }
        if !(tail_mass_bound.is_finite() && tail_mass_bound >= 0.0) {
            return Err(invalid("tail_mass_bound", "must be finite and >= 0"));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass_bound;
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "probs",
                format!("probabilities plus tail bound sum to {total}, expected 1"),
            ));
        }
        Ok(Self {
            probs,
            tail_mass_bound,
        })
    }

    /// Fully supported on 0..probs.len(); no tail.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs, 0.0)
    }

    /// Skips normalization checks; used for intermediate results whose
    /// normalization follows from the producing map.
    pub(crate) fn from_parts(probs: Vec<f64>, tail_mass_bound: f64) -> Self {
        Self {
            probs,
            tail_mass_bound,
        }
    }

    /// δ_{n,k} on 0..=cutoff.
    pub fn point(k: usize, cutoff: usize) -> Result<Self> {
        if k > cutoff {
            return Err(invalid("n", format!("{k} exceeds cutoff {cutoff}")));
        }
        let mut probs = vec![0.0; cutoff + 1];
        probs[k] = 1.0;
        Ok(Self::from_parts(probs, 0.0))
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// p_n, zero above the cutoff.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn moments(&self) -> Moments {
        let (s1, s2) = self
            .probs
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(s1, s2), (n, p)| {
                let n = n as f64;
                (s1 + n * p, s2 + n * n * p)
            });
        Moments::from_raw(s1, s2)
    }
}

/// Mean, variance and normally ordered variance :Δn²: = Δn² − n̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub normally_ordered_variance: f64,
}

impl Moments {
    fn from_raw(first: f64, second: f64) -> Self {
        let variance = second - first * first;
        Self {
            mean: first,
            variance,
            normally_ordered_variance: variance - first,
        }
    }
}

/// Density matrix of one mode in the Fock basis truncated at `cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    elements: CMatrix,
    tail_mass_bound: f64,
}

impl FockDensityMatrix {
    /// Wraps a square matrix. No positivity or trace checks are made here;
    /// call [`validate`](Self::validate) for that.
    pub fn from_matrix(elements: CMatrix, tail_mass_bound: f64) -> Result<Self> {
        if elements.nrows() != elements.ncols() {
            return Err(Error::DimensionMismatch {
                left: elements.nrows(),
                right: elements.ncols(),
            });
        }
        if elements.nrows() < 1 {
            return Err(invalid("elements", "matrix must be at least 1x1"));
        }
        if !(tail_mass_bound.is_finite() && tail_mass_bound >= 0.0) {
            return Err(invalid("tail_mass_bound", "must be finite and >= 0"));
        }
        Ok(Self {
            elements,
            tail_mass_bound,
        })
    }

    pub(crate) fn from_parts(elements: CMatrix, tail_mass_bound: f64) -> Self {
        debug_assert!(elements.is_square());
        Self {
            elements,
            tail_mass_bound,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(CMatrix::zeros(dim, dim), 0.0)
    }

    /// Vacuum |0⟩⟨0|.
    pub fn vacuum(cutoff: usize) -> Self {
        let mut m = CMatrix::zeros(cutoff + 1, cutoff + 1);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        Self::from_parts(m, 0.0)
    }

    /// Pure state |ψ⟩⟨ψ| from Fock amplitudes.
    pub fn pure(amplitudes: &[Complex64], tail_mass_bound: f64) -> Result<Self> {
        let dim = amplitudes.len();
        let m = CMatrix::from_fn(dim, dim, |i, j| amplitudes[i] * amplitudes[j].conj());
        Self::from_matrix(m, tail_mass_bound)
    }

    /// Diagonal (phase-averaged) state with the given photon statistics.
    pub fn diagonal(dist: &PhotonNumberDistribution) -> Self {
        let dim = dist.probs.len();
        let m = CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                Complex64::new(dist.probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::from_parts(m, dist.tail_mass_bound)
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn cutoff(&self) -> usize {
        self.dim() - 1
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.elements[(n, m)]
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|n| self.elements[(n, n)].re).sum()
    }

    /// Diagonal p_n = ρ_{n,n}.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.elements[(n, n)].re).collect()
    }

    pub fn distribution(&self) -> PhotonNumberDistribution {
        PhotonNumberDistribution::from_parts(self.populations(), self.tail_mass_bound)
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_parts(self.elements.map(|z| z * factor), self.tail_mass_bound)
    }

    /// Returns ρ / Tr ρ together with the trace. Fails on a zero-norm branch.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let norm = self.trace();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::ZeroNorm("cannot normalize a branch with vanishing trace"));
        }
        Ok((self.scaled(1.0 / norm), norm))
    }

    /// self + weight · other. Tail bounds add with the same weight.
    pub fn add_scaled(&mut self, other: &Self, weight: f64) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        self.elements
            .zip_apply(&other.elements, |a, b| *a += b * weight);
        self.tail_mass_bound += weight.abs() * other.tail_mass_bound;
        Ok(())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.elements)
    }

    /// Checks Hermiticity, unit trace (up to the tail bound) and positivity.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in i..d {
                let diff = (self.elements[(i, j)] - self.elements[(j, i)].conj()).norm();
                if diff > HERMITIAN_TOL {
                    return Err(invalid(
                        "elements",
                        format!("not Hermitian at ({i},{j}): deviation {diff:.3e}"),
                    ));
                }
            }
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > TRACE_TOL + self.tail_mass_bound {
            return Err(invalid("elements", format!("trace {trace} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(invalid(
                "elements",
                format!("not positive semidefinite: eigenvalue {min:.3e}"),
            ));
        }
        Ok(())
    }
}

pub(crate) fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()).map(|z| z * 0.5);
    let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Poisson mass Σ_{n>cutoff} e^{−μ} μ^n / n!, summed forward from the cutoff.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    // p_cutoff in log space to stay finite for large cutoffs
    let mut log_p = -mean;
    for n in 1..=cutoff {
        log_p += mean.ln() - (n as f64).ln();
    }
    let mut term = log_p.exp();
    let mut sum = 0.0;
    let mut n = cutoff;
    loop {
        n += 1;
        term *= mean / n as f64;
        sum += term;
        if (n as f64) > mean && term <= sum * 1e-17 || term == 0.0 {
            break;
        }
    }
    sum
}

/// Coherent state |α⟩ truncated at `cutoff`, requiring the dropped Poisson
/// tail to stay below [`DEFAULT_TAIL_TOL`].
///
/// Keep |α|² well under `cutoff` (|α|² ≤ cutoff/2 is comfortable).
pub fn coherent_state(alpha: Complex64, cutoff: usize) -> Result<FockDensityMatrix> {
    coherent_state_with_tail_tol(alpha, cutoff, DEFAULT_TAIL_TOL)
}

/// As [`coherent_state`] with a caller-chosen truncation tolerance. The exact
/// tail is stored as the state's tail bound; amplitudes are not renormalized.
pub fn coherent_state_with_tail_tol(
    alpha: Complex64,
    cutoff: usize,
    tail_tol: f64,
) -> Result<FockDensityMatrix> {
    if !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(invalid("alpha", "must be finite"));
    }
    let mean = alpha.norm_sqr();
    let tail = poisson_tail(mean, cutoff);
    if tail > tail_tol {
        return Err(Error::Truncation {
            cutoff,
            tail,
            tol: tail_tol,
        });
    }
    FockDensityMatrix::pure(&coherent_amplitudes(alpha, cutoff), tail)
}

/// e^{−|α|²/2} α^n / √n! for n = 0..=cutoff.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> Vec<Complex64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// Fock state |n⟩⟨n|.
pub fn number_state(n: usize, cutoff: usize) -> Result<FockDensityMatrix> {
    let dist = PhotonNumberDistribution::point(n, cutoff)?;
    Ok(FockDensityMatrix::diagonal(&dist))
}

pub fn moments(rho: &FockDensityMatrix) -> Moments {
    rho.distribution().moments()
}

/// ½‖a − b‖₁.
pub fn trace_distance(a: &FockDensityMatrix, b: &FockDensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(0.5 * trace_norm(&(&a.elements - &b.elements)))
}

/// Σ|λ_i| of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

/// Tr(ρσ). Equals the fidelity when either argument is pure.
pub fn pure_fidelity(rho: &FockDensityMatrix, sigma: &FockDensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    Ok(rho
        .elements
        .iter()
        .zip(sigma.elements.transpose().iter())
        .map(|(a, b)| a * b)
        .sum::<Complex64>()
        .re)
}

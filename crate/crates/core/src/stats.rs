//! Histograms and goodness-of-fit for ensemble checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};

/// Fixed-width histogram on [lo, hi]; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(invalid("bins", "need at least one bin"));
        }
        if !(hi > lo) {
            return Err(invalid("range", format!("empty range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        Ok(Self {
            edges,
            counts: vec![0; bins],
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let width = (hi - lo) / self.bins() as f64;
        Some((((x - lo) / width) as usize).min(self.bins() - 1))
    }

    pub fn add(&mut self, x: f64) -> bool {
        match self.bin_of(x) {
            Some(i) => {
                self.counts[i] += 1;
                true
            }
            None => false,
        }
    }

    /// Adds counts of a histogram with identical edges.
    pub fn merge(&mut self, other: &Self) {
        debug_assert_eq!(self.edges, other.edges);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson χ² test of observed counts against expected counts. Adjacent
/// categories are pooled left to right until each expected count is ≥ 5.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<ChiSquareReport> {
    if observed.len() != expected.len() {
        return Err(invalid("expected", "length differs from observed"));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o as f64;
        e_acc += e;
        if e_acc >= 5.0 {
            pooled.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => pooled.push((o_acc, e_acc)),
        }
    }
    if pooled.len() < 2 {
        return Err(invalid("expected", "fewer than two categories after pooling"));
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    Ok(ChiSquareReport {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_binning() {
        let mut h = Histogram::uniform(0.0, 2.0, 4).unwrap();
        assert!(h.add(0.0));
        assert!(h.add(0.49));
        assert!(h.add(2.0));
        assert!(!h.add(2.1));
        assert_eq!(h.counts, vec![2, 0, 0, 1]);
        assert_eq!(h.total(), 3);
        assert!(Histogram::uniform(0.0, 0.0, 3).is_err());
    }

    #[test]
    fn perfect_fit_has_unit_p_value() {
        let r = chi_square_test(&[10, 20, 30], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_statistic() {
        // (60-50)^2/50 + (40-50)^2/50 = 4, dof 1: p = erfc(sqrt(2)) = 0.0455003
        let r = chi_square_test(&[60, 40], &[50.0, 50.0]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.045500263896358).abs() < 1e-9);
    }

    #[test]
    fn pools_sparse_categories() {
        let r = chi_square_test(&[50, 2, 1, 47], &[50.0, 1.0, 1.0, 48.0]).unwrap();
        assert_eq!(r.dof, 1);
    }
}

//! Photon-number distributions over a truncated Fock space.

use crate::error::{Error, Result};

/// Diagonal of a single-mode state in the Fock basis: the probability of
/// finding exactly n photons, for n = 0..dim-1.
///
/// Entries are nonnegative and sum to one; constructors renormalize away
/// rounding-level deficits and reject anything worse.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
}

impl PhotonDistribution {
    /// Builds a distribution from raw probabilities.
    ///
    /// The sum must be within 1e-9 of one; the stored vector is divided by the
    /// exact sum so downstream code can rely on unit normalization.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution {
                reason: "no entries".into(),
            });
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution {
                reason: format!("entry {bad} is negative or not finite"),
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() >= 1e-9 {
            return Err(Error::InvalidDistribution {
                reason: format!("entries sum to {sum}, not 1"),
            });
        }
        let mut probs = probs;
        for p in &mut probs {
            *p /= sum;
        }
        Ok(Self { probs })
    }

    /// Number state |n>: all probability at exactly `n` photons.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidParameter {
                name: "fock_n",
                value: n as f64,
                expected: "n < dim",
            });
        }
        let mut probs = vec![0.0; dim];
        probs[n] = 1.0;
        Ok(Self { probs })
    }

    /// Chaotic light with mean photon number `nbar`, truncated to `dim`
    /// entries and renormalized.
    pub fn thermal(nbar: f64, dim: usize) -> Result<Self> {
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::InvalidParameter {
                name: "nbar",
                value: nbar,
                expected: "finite and >= 0",
            });
        }
        let ratio = nbar / (1.0 + nbar);
        let mut probs = Vec::with_capacity(dim);
        let mut w = 1.0 / (1.0 + nbar);
        for _ in 0..dim {
            probs.push(w);
            w *= ratio;
        }
        Self::normalized(probs)
    }

    /// Poissonian light with the given mean photon number, truncated to `dim`
    /// entries and renormalized.
    pub fn coherent(mean: f64, dim: usize) -> Result<Self> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(Error::InvalidParameter {
                name: "mean",
                value: mean,
                expected: "finite and >= 0",
            });
        }
        let mut probs = Vec::with_capacity(dim);
        let mut w = (-mean).exp();
        for n in 0..dim {
            probs.push(w);
            w *= mean / (n + 1) as f64;
        }
        Self::normalized(probs)
    }

    /// Uniform distribution over 0..dim-1 photons; the maximal-entropy state
    /// used as the default starting point for reconstruction.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(Self {
            probs: vec![1.0 / dim as f64; dim],
        })
    }

    fn normalized(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || !sum.is_finite() || sum <= 0.0 {
            return Err(Error::InvalidDistribution {
                reason: format!("cannot normalize; mass {sum}"),
            });
        }
        let mut probs = probs;
        for p in &mut probs {
            *p /= sum;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Mean photon number of the distribution.
    pub fn mean_photons(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Overlap Sum_n sqrt(p_n * q_n) between two distributions, in [0, 1].
///
/// Equals 1 exactly when the distributions coincide and 0 when their supports
/// are disjoint. The shorter vector is treated as zero-padded.
pub fn fidelity(p: &PhotonDistribution, q: &PhotonDistribution) -> f64 {
    overlap(p.probs(), q.probs())
}

pub(crate) fn overlap(p: &[f64], q: &[f64]) -> f64 {
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    s.min(1.0)
}

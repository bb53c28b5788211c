//! Finite outcome distributions and the quantile / check-loss primitives the
//! bound formulas are built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite discrete law on the real line.
///
/// Always held in canonical form: strictly increasing support, strictly
/// positive probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct WeightedDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for WeightedDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        if raw.support.len() != raw.probs.len() {
            return Err(Error::Data(format!(
                "support has {} values but probs has {}",
                raw.support.len(),
                raw.probs.len()
            )));
        }
        let total: f64 = raw.probs.iter().sum();
        if total.is_finite() && (total - 1.0).abs() > 1e-12 {
            return Err(Error::Data(format!("probabilities sum to {total}, expected 1")));
        }
        Self::from_pairs(raw.support.into_iter().zip(raw.probs))
    }
}

impl WeightedDistribution {
    /// Builds a distribution from `(value, weight)` pairs. Weights are
    /// normalized, equal values merged and zero-weight points dropped.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (index, &(value, weight)) in pairs.iter().enumerate() {
            if !value.is_finite() || !weight.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight });
            }
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
        pairs.retain(|p| p.1 > 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (value, weight) in pairs {
            // -0.0 and 0.0 are the same outcome
            let value = if value == 0.0 { 0.0 } else { value };
            match support.last() {
                Some(&last) if last == value => *weights.last_mut().unwrap() += weight,
                _ => {
                    support.push(value);
                    weights.push(weight);
                }
            }
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { support, probs })
    }

    /// Equal mass on each listed value (repeated values accumulate mass).
    pub fn uniform(values: &[f64]) -> Result<Self> {
        Self::from_pairs(values.iter().map(|&v| (v, 1.0)))
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::from_pairs([(value, 1.0)])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(y, p)| y * p).sum()
    }

    pub fn min(&self) -> f64 {
        self.support[0]
    }

    pub fn max(&self) -> f64 {
        self.support[self.support.len() - 1]
    }

    /// P(Y <= y).
    pub fn cdf(&self, y: f64) -> f64 {
        self.iter().take_while(|&(v, _)| v <= y).map(|(_, p)| p).sum()
    }

    /// P(Y = y); zero off the support.
    pub fn prob_at(&self, y: f64) -> f64 {
        match self.support.binary_search_by(|v| v.total_cmp(&y)) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    /// Generalized inverse `inf { y : F(y) >= gamma }` for `gamma` in (0, 1).
    pub fn quantile(&self, gamma: f64) -> Result<f64> {
        check_level(gamma)?;
        Ok(self.support[self.quantile_index(gamma)])
    }

    /// Index of the quantile for any level in [0, 1]; level 0 maps to the
    /// minimum and level 1 to the maximum of the support.
    pub(crate) fn quantile_index(&self, level: f64) -> usize {
        let mut cumulative = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            cumulative += p;
            if cumulative >= level {
                return i;
            }
        }
        self.support.len() - 1
    }

    /// E[rho_gamma(Y, q)] with the quantile check loss.
    pub fn check_loss_expectation(&self, gamma: f64, q: f64) -> Result<f64> {
        check_level(gamma)?;
        Ok(self.check_loss_unchecked(gamma, q))
    }

    fn check_loss_unchecked(&self, gamma: f64, q: f64) -> f64 {
        self.iter().map(|(y, p)| p * check_loss(gamma, y, q)).sum()
    }

    /// E[rho_level(Y, q_level)], the minimal expected check loss. Defined for
    /// every level in [0, 1]; the endpoints give zero.
    pub fn quantile_deviation(&self, level: f64) -> f64 {
        if level <= 0.0 || level >= 1.0 {
            return 0.0;
        }
        let q = self.support[self.quantile_index(level)];
        self.check_loss_unchecked(level, q)
    }
}

/// Quantile check loss `gamma * (y - q)^+ + (1 - gamma) * (q - y)^+`.
pub fn check_loss(gamma: f64, y: f64, q: f64) -> f64 {
    if y >= q {
        gamma * (y - q)
    } else {
        (1.0 - gamma) * (q - y)
    }
}

fn check_level(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange(gamma))
    }
}

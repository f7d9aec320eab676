//! Walker alias tables: O(n) construction, O(1) categorical draws.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AliasError {
    #[error("alias table needs at least one positive weight")]
    AllZeroWeights,
    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight {index} is not finite")]
    NonFiniteWeight { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
    pmf: Vec<f64>,
    total_weight: f64,
}

/// Neumaier-compensated sum.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

impl AliasTable {
    /// Builds a table over non-negative weights with the small/large
    /// worklist method. Zero weights are allowed and receive no mass.
    pub fn new(weights: &[f64]) -> Result<Self, AliasError> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(AliasError::NonFiniteWeight { index });
            }
            if value < 0.0 {
                return Err(AliasError::NegativeWeight { index, value });
            }
        }
        let total_weight = compensated_sum(weights);
        if !(total_weight > 0.0) {
            return Err(AliasError::AllZeroWeights);
        }
        let n = weights.len();
        let pmf: Vec<f64> = weights.iter().map(|&w| w / total_weight).collect();
        let mut scaled: Vec<f64> = pmf.iter().map(|&p| p * n as f64).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut prob = vec![1.0; n];

        let mut small = Vec::with_capacity(n);
        let mut large = Vec::with_capacity(n);
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers differ from 1 only by rounding.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
            alias[i] = i as u32;
        }
        Ok(AliasTable { prob, alias, pmf, total_weight })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.prob
    }

    pub fn aliases(&self) -> &[u32] {
        &self.alias
    }

    /// Normalized weight of `index`, the probability `sample` returns it.
    #[inline]
    pub fn probability(&self, index: usize) -> f64 {
        self.pmf[index]
    }

    /// Draws an index using exactly two uniform variates.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.prob.len();
        let u: f64 = rng.random();
        let bucket = ((u * n as f64) as usize).min(n - 1);
        let v: f64 = rng.random();
        if v < self.prob[bucket] {
            bucket
        } else {
            self.alias[bucket] as usize
        }
    }

    /// Probability mass implied by the bucket layout.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.prob.len();
        let mut mass = vec![0.0; n];
        for i in 0..n {
            mass[i] += self.prob[i];
            mass[self.alias[i] as usize] += 1.0 - self.prob[i];
        }
        mass.iter_mut().for_each(|m| *m /= n as f64);
        mass
    }
}

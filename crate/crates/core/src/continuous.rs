//! Re-estimation of continuous topic densities and of the supervised
//! regression, run once per iteration after the sweep.

use log::warn;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{BetaParams, ContinuousTopicParams, GaussianParams, ModelState, SupervisedParams};

/// Ridge term added to the normal equations of the response regression.
pub const RIDGE: f64 = 1e-6;
pub const GAUSSIAN_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum UpdateError {
    #[error("regression input contains a non-finite value")]
    NonFiniteInput,
    #[error("regression needs at least one document")]
    EmptyInput,
    #[error("regression rows have inconsistent widths")]
    ShapeMismatch,
}

/// Count, mean and sum of squared deviations; mergeable across shards.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Biased (divide-by-n) variance.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn of(items: &[f64]) -> Self {
        let mut m = Moments::default();
        items.iter().for_each(|&x| m.push(x));
        m
    }
}

/// Method-of-moments Beta fit for one topic; `None` when the moments are
/// outside the feasible region or fewer than two items exist.
pub fn beta_from_moments(m: &Moments) -> Option<BetaParams> {
    if m.count < 2 {
        return None;
    }
    let mean = m.mean;
    let var = m.variance();
    let spread = mean * (1.0 - mean);
    if !(var > 0.0) || var >= spread {
        return None;
    }
    let common = spread / var - 1.0;
    Some(BetaParams { a: mean * common, b: (1.0 - mean) * common })
}

pub fn update_beta_from_moments(moments: &[Moments], previous: &[BetaParams]) -> Vec<BetaParams> {
    moments
        .iter()
        .zip(previous)
        .enumerate()
        .map(|(k, (m, prev))| match beta_from_moments(m) {
            Some(p) => p,
            None => {
                if m.count >= 2 {
                    warn!("topic {k}: beta moments infeasible (mean {}, variance {}), keeping previous", m.mean, m.variance());
                }
                *prev
            }
        })
        .collect()
}

/// Beta re-estimation from each topic's items.
pub fn update_beta_params(items_by_topic: &[Vec<f64>], previous: &[BetaParams]) -> Vec<BetaParams> {
    let moments: Vec<Moments> = items_by_topic.iter().map(|items| Moments::of(items)).collect();
    update_beta_from_moments(&moments, previous)
}

pub fn update_gaussian_from_moments(moments: &[Moments], previous: &[GaussianParams]) -> Vec<GaussianParams> {
    moments
        .iter()
        .zip(previous)
        .map(|(m, prev)| {
            if m.count == 0 {
                *prev
            } else {
                GaussianParams { mean: m.mean, variance: m.variance().max(GAUSSIAN_VARIANCE_FLOOR) }
            }
        })
        .collect()
}

/// Gaussian re-estimation: sample mean and floored biased variance.
pub fn update_gaussian_params(items_by_topic: &[Vec<f64>], previous: &[GaussianParams]) -> Vec<GaussianParams> {
    let moments: Vec<Moments> = items_by_topic.iter().map(|items| Moments::of(items)).collect();
    update_gaussian_from_moments(&moments, previous)
}

/// Refits one continuous factor from per-topic moments.
pub fn refit_continuous(previous: &ContinuousTopicParams, moments: &[Moments]) -> ContinuousTopicParams {
    if let Some(prev) = previous.gaussian_params() {
        ContinuousTopicParams::gaussian(update_gaussian_from_moments(moments, prev))
    } else {
        let prev = previous.beta_params().expect("continuous params are gaussian or beta");
        ContinuousTopicParams::beta(update_beta_from_moments(moments, prev))
    }
}

/// Least squares with a small ridge: eta = (A'A + lambda I)^-1 A'y and
/// sigma2 = (y'y - y'A eta) / D, floored at zero.
pub fn update_supervised_params(zbar: &[Vec<f64>], y: &[f64]) -> Result<SupervisedParams, UpdateError> {
    let d = zbar.len();
    if d == 0 || y.len() != d {
        return Err(if d == 0 { UpdateError::EmptyInput } else { UpdateError::ShapeMismatch });
    }
    let k = zbar[0].len();
    if zbar.iter().any(|row| row.len() != k) {
        return Err(UpdateError::ShapeMismatch);
    }
    if zbar.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(UpdateError::NonFiniteInput);
    }
    let a = DMatrix::from_fn(d, k, |r, c| zbar[r][c]);
    let yv = DVector::from_column_slice(y);
    let gram = a.transpose() * &a + DMatrix::identity(k, k) * RIDGE;
    let rhs = a.transpose() * &yv;
    let eta = gram.cholesky().ok_or(UpdateError::NonFiniteInput)?.solve(&rhs);
    let sigma2 = ((yv.dot(&yv) - rhs.dot(&eta)) / d as f64).max(0.0);
    if !sigma2.is_finite() || eta.iter().any(|e| !e.is_finite()) {
        return Err(UpdateError::NonFiniteInput);
    }
    Ok(SupervisedParams { eta: eta.iter().copied().collect(), sigma2 })
}

/// Per continuous factor, per topic moments of the values assigned to it.
pub fn continuous_moments(state: &ModelState) -> Vec<Vec<Moments>> {
    let k = state.config.num_topics;
    let mut out = vec![vec![Moments::default(); k]; state.config.schema.num_continuous()];
    for (doc, z) in state.corpus.documents.iter().zip(&state.assignments) {
        for (blob, &t) in doc.blobs.iter().zip(z) {
            for (j, values) in blob.continuous.iter().enumerate() {
                for &v in values {
                    out[j][t as usize].push(state.corpus.domains[j].value(v));
                }
            }
        }
    }
    out
}

/// Refits every continuous factor and the response regression in place.
pub fn update_state_params(state: &mut ModelState) -> Result<(), UpdateError> {
    let moments = continuous_moments(state);
    for (j, m) in moments.iter().enumerate() {
        let refit = refit_continuous(&state.params.continuous[j], m);
        state.params.continuous[j] = refit;
    }
    if state.config.supervised() && !state.corpus.documents.is_empty() {
        let zbar: Vec<Vec<f64>> = (0..state.num_documents()).map(|d| state.zbar(d)).collect();
        let y: Vec<f64> = state.corpus.documents.iter().map(|d| d.signal.unwrap_or(0.0)).collect();
        state.params.supervised = update_supervised_params(&zbar, &y)?;
    }
    Ok(())
}

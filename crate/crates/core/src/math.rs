use std::f64::consts::PI;

pub use statrs::function::gamma::ln_gamma;

/// Log of the supervised density floor used when the response variance is 0.
pub const LN_DEGENERATE_DENSITY: f64 = -690.775_527_898_213_7; // ln(1e-300)

/// ln Γ(x + n) - ln Γ(x), the log rising factorial.
#[inline]
pub fn ln_rising(x: f64, n: u32) -> f64 {
    match n {
        0 => 0.0,
        1 => x.ln(),
        2..=8 => {
            let mut p = x;
            for r in 1..n {
                p *= x + r as f64;
            }
            p.ln()
        }
        _ => ln_gamma(x + n as f64) - ln_gamma(x),
    }
}

/// Log density of N(mean, variance) at `y`; a zero variance degenerates
/// to an indicator with tolerance 1e-9.
#[inline]
pub fn normal_ln_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        return if (y - mean).abs() < 1e-9 { 0.0 } else { LN_DEGENERATE_DENSITY };
    }
    let d = y - mean;
    -0.5 * (2.0 * PI * variance).ln() - d * d / (2.0 * variance)
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Exponentiates log weights in place after subtracting their maximum and
/// returns the sum of the resulting weights.
#[inline]
pub fn exp_normalize_in_place(weights: &mut [f64]) -> f64 {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        sum += *w;
    }
    sum
}

/// Draws an index proportional to non-negative `weights` summing to `total`.
#[inline]
pub fn sample_linear(weights: &[f64], total: f64, u: f64) -> usize {
    let mut target = u * total;
    for (i, &w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return i;
        }
    }
    // Rounding left a sliver past the end: return the last positive weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

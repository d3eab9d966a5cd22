//! Maximum of `M` i.i.d. `½χ²₂M` (equivalently `Gamma(M, 1)`) variables.
//!
//! At low SNR the optimized sum-rate tracks `(log2 e) ρ E[max]`, while the
//! equal-power rate tracks `(log2 e) ρ M`. The two agree to first order
//! exactly when `max/M` concentrates at 1, which is what this module measures.

use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::trial_rng;
use crate::special::{gamma_pq, ln_gamma};
use crate::stats::{run_trials, Estimate};

/// Counts, threshold and slack for one concentration query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxChiQuery {
    /// Number of variables, and also the gamma shape (half the degrees of freedom).
    pub m: usize,
    pub x: f64,
    pub zeta: f64,
}

impl MaxChiQuery {
    pub fn new(m: usize, x: f64, zeta: f64) -> Result<Self> {
        if m == 0 || !(x > 0.0) || !(zeta > 0.0) {
            return Err(Error::Domain(format!(
                "need M >= 1, x > 0, zeta > 0; got M={m}, x={x}, zeta={zeta}"
            )));
        }
        Ok(Self { m, x, zeta })
    }

    /// The threshold `M(1 + ζ)` at which concentration is assessed.
    pub fn for_slack(m: usize, zeta: f64) -> Result<Self> {
        Self::new(m, m as f64 * (1.0 + zeta), zeta)
    }
}

/// `Pr{max ≤ x} = P(M, x)^M`.
pub fn cdf_max_chisq(m: usize, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let (p, q) = gamma_pq(m as f64, x)?;
    let n = m as f64;
    // near 1, (1 − Q)^M through log1p keeps the tail digits
    Ok(if q < 0.5 { (n * (-q).ln_1p()).exp() } else { p.powf(n) })
}

/// Upper bound on the single-variable tail `Q(M, x) ≤ e^{−x} x^M / (Γ(M)(x − (M−1)))`,
/// valid for `x > M − 1`. Evaluated in log space.
pub fn tail_upper_bound(m: usize, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    let n = m as f64;
    if !(x > n - 1.0) {
        return Err(Error::Domain(format!("tail bound needs x > M - 1, got M={m}, x={x}")));
    }
    Ok((-x + n * x.ln() - (x - (n - 1.0)).ln() - ln_gamma(n)).exp())
}

/// Stirling form `(M−1) ln(M−1) − (M−1) + ½ ln(2π(M−1))` of `ln Γ(M)`.
pub fn stirling_log_gamma(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("Stirling form needs M >= 2, got {m}")));
    }
    let n = (m - 1) as f64;
    Ok(n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln())
}

/// `M(ζ − ln(1+ζ)) + ½ ln M + ½ ln(2π) + ln ζ`: the log-tail exponent at
/// `x = M(1+ζ)` after the Stirling simplification.
pub fn concentration_lhs(m: usize, zeta: f64) -> f64 {
    let n = m as f64;
    n * (zeta - zeta.ln_1p()) + 0.5 * n.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln() + zeta.ln()
}

/// The same exponent before substituting `x = M(1+ζ)`:
/// `M ln M − ½ ln M − M + ½ ln(2π) + x − M ln x + ln(x − M + 1)`.
pub fn concentration_lhs_at(m: usize, x: f64) -> f64 {
    let n = m as f64;
    n * n.ln() - 0.5 * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI).ln() + x - n * x.ln()
        + (x - n + 1.0).ln()
}

/// Empirical concentration probability at one slack value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackProbability {
    pub zeta: f64,
    /// Fraction of trials with `max/M ≤ 1 + ζ`.
    pub prob: f64,
    /// Binomial standard error of `prob`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxStats {
    pub m: usize,
    /// Sample mean of the maximum (not divided by M).
    pub mean_max: Estimate,
    pub slack: Vec<SlackProbability>,
}

/// Monte Carlo over maxima of `M` i.i.d. `Gamma(M, 1)` draws.
pub fn empirical_max_stats(m: usize, zetas: &[f64], trials: u64, seed: u64) -> Result<MaxStats> {
    if m == 0 || trials == 0 {
        return Err(Error::Domain(format!("need M >= 1 and trials >= 1, got M={m}, trials={trials}")));
    }
    let n = m as f64;
    let dist = Gamma::new(n, 1.0).map_err(|e| Error::Domain(e.to_string()))?;
    let acc = run_trials(trials, 1 + zetas.len(), |t, out| {
        let mut rng = trial_rng(seed, t);
        let max = (0..m).map(|_| dist.sample(&mut rng)).fold(0.0, f64::max);
        out[0] = max;
        for (o, &z) in out[1..].iter_mut().zip(zetas) {
            *o = if max <= n * (1.0 + z) { 1.0 } else { 0.0 };
        }
        Ok(())
    })?;
    let slack = zetas
        .iter()
        .zip(&acc[1..])
        .map(|(&zeta, a)| {
            let prob = a.mean();
            SlackProbability {
                zeta,
                prob,
                std_error: (prob * (1.0 - prob) / trials as f64).sqrt(),
            }
        })
        .collect();
    Ok(MaxStats {
        m,
        mean_max: acc[0].estimate(),
        slack,
    })
}

//! Large-system analytics.
//!
//! `F(β, ρ)` is the per-user rate, in bits, of `K` users served equal power by
//! `M = βK` antennas when the eigenvalues of `HH*/K` follow the
//! Marchenko–Pastur law. The sensitivity `δ/ε` is the fractional SNR increase
//! needed per fractional reduction in served users to hold `K·F` constant:
//!
//! ```text
//! δ/ε = (F − β ∂F/∂β) / (ρ ∂F/∂ρ) = (F − c2) / c1
//! ```
//!
//! Everything here is a pure function of `(β, ρ)`; nothing depends on `M` or
//! `K` individually.

use crate::error::{Error, Result};
use crate::LOG2_E;

/// Bracket used by [`solve_operating_point`], in linear SNR.
pub const SOLVER_RHO_MIN: f64 = 1e-8;
pub const SOLVER_RHO_MAX: f64 = 1e8;
/// Scan density of the bracket search, points per decade.
const SCAN_PER_DECADE: usize = 8;

pub const QUADRATURE_ABS_TOL: f64 = 1e-8;
const QUADRATURE_REL_TOL: f64 = 1e-11;
const QUADRATURE_MAX_DEPTH: u32 = 40;

fn check_domain(beta: f64, rho: f64) -> Result<()> {
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be >= 1, got {beta}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("rho must be positive and finite, got {rho}")));
    }
    Ok(())
}

/// Intermediates shared by `F`, `c1`, `c2` and `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    pub beta: f64,
    pub rho: f64,
    /// `4ρ√β / (1 + ρ(√β+1)²)`
    pub a: f64,
    /// `(√β−1)/(√β+1)`; exactly zero at β = 1.
    pub gamma_mp: f64,
    pub d: f64,
    /// `1 − a`, formed as `(1 + ρ(√β−1)²)/(1 + ρ(√β+1)²)` so it never cancels.
    pub one_minus_a: f64,
    /// `√(1 − a)`
    pub s: f64,
    /// `1 − √(1 − a) = a / (1 + √(1 − a))`
    pub one_minus_s: f64,
    /// `1 + ρ(√β+1)²`
    pub p: f64,
}

impl MpParams {
    pub fn new(beta: f64, rho: f64) -> Result<Self> {
        check_domain(beta, rho)?;
        let sb = beta.sqrt();
        let p = 1.0 + rho * (sb + 1.0).powi(2);
        let a = 4.0 * rho * sb / p;
        let one_minus_a = (1.0 + rho * (sb - 1.0).powi(2)) / p;
        let s = one_minus_a.max(0.0).sqrt();
        let one_minus_s = a / (1.0 + s);
        let gamma_mp = if beta == 1.0 { 0.0 } else { (sb - 1.0) / (sb + 1.0) };

        let g_s = gamma_mp + s;
        let sq1 = (1.0 + s).powi(2);
        let d = (beta - 1.0) / (2.0 * s * p * g_s)
            - (sb + 1.0).powi(2) / (2.0 * s * p * sq1)
            - (beta + 1.0) / (2.0 * p * sq1);

        Ok(Self {
            beta,
            rho,
            a,
            gamma_mp,
            d,
            one_minus_a,
            s,
            one_minus_s,
            p,
        })
    }

    /// `ln((1+γ)/(γ+√(1−a)))`, zero at β = 1 only through its `(β−1)` prefactor.
    fn ln_gamma_ratio(&self) -> f64 {
        (self.one_minus_s / (self.gamma_mp + self.s)).ln_1p()
    }

    /// `ln((1+√(1−a))/2)`
    fn ln_half_one_plus_s(&self) -> f64 {
        (-0.5 * self.one_minus_s).ln_1p()
    }
}

/// Per-user large-system rate `F(β, ρ)` in bits, closed form.
pub fn cap_f(beta: f64, rho: f64) -> Result<f64> {
    let m = MpParams::new(beta, rho)?;
    let sb = beta.sqrt();
    let t1 = (rho * (sb + 1.0).powi(2)).ln_1p();
    let t2 = (beta + 1.0) * m.ln_half_one_plus_s();
    let t3 = -sb * m.one_minus_s / (1.0 + m.s);
    let t4 = if beta == 1.0 {
        0.0
    } else {
        (beta - 1.0) * m.ln_gamma_ratio()
    };
    Ok(LOG2_E * (t1 + t2 + t3 + t4))
}

/// `F(β, ρ)` by adaptive Simpson quadrature of the Marchenko–Pastur integral.
///
/// The support `[(√β−1)², (√β+1)²]` is mapped to `θ ∈ [0, π]` through
/// `λ = (√β−1)² + 2h sin²(θ/2)`, `h = 2√β`, which turns the square-root edges
/// (and the `λ^{-1/2}` pole at β = 1) into the smooth factor `h² sin²θ / (2λ)`.
pub fn cap_f_quadrature(beta: f64, rho: f64) -> Result<f64> {
    check_domain(beta, rho)?;
    let sb = beta.sqrt();
    let lo = (sb - 1.0).powi(2);
    let h = 2.0 * sb;
    let integrand = |theta: f64| -> f64 {
        let half = (0.5 * theta).sin();
        let lambda = lo + 2.0 * h * half * half;
        // ln(1 + ρλ)/λ, continuous at λ = 0
        let x = rho * lambda;
        let log_over_lambda = if x < 1e-300 { rho } else { rho * x.ln_1p() / x };
        let st = theta.sin();
        h * h * st * st * log_over_lambda / (2.0 * std::f64::consts::PI)
    };
    let total = adaptive_simpson(integrand, 0.0, std::f64::consts::PI, QUADRATURE_ABS_TOL)?;
    Ok(total * LOG2_E)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    const PANELS: usize = 16;
    let width = (b - a) / PANELS as f64;
    let mut coarse = Vec::with_capacity(PANELS);
    let mut rough_total = 0.0;
    for i in 0..PANELS {
        let x0 = a + width * i as f64;
        let x2 = x0 + width;
        let x1 = 0.5 * (x0 + x2);
        let (f0, f1, f2) = (f(x0), f(x1), f(x2));
        let s = width / 6.0 * (f0 + 4.0 * f1 + f2);
        rough_total += s;
        coarse.push((x0, x2, f0, f1, f2, s));
    }
    let tol = abs_tol.min(QUADRATURE_REL_TOL * rough_total.abs()).max(f64::MIN_POSITIVE);
    let panel_tol = tol / PANELS as f64;
    let mut total = 0.0;
    for (x0, x2, f0, f1, f2, s) in coarse {
        total += simpson_step(&f, x0, x2, f0, f1, f2, s, panel_tol, QUADRATURE_MAX_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numeric(format!(
            "adaptive simpson did not reach tolerance {tol:e} on [{a}, {b}]"
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// `c1 = ρ ∂F/∂ρ`, closed form.
pub fn coeff_c1(beta: f64, rho: f64) -> Result<f64> {
    let m = MpParams::new(beta, rho)?;
    Ok(c1_from(&m))
}

fn c1_from(m: &MpParams) -> f64 {
    let sb = m.beta.sqrt();
    m.a * LOG2_E * ((sb + 1.0).powi(2) / (4.0 * sb) + m.d)
}

/// `c2 = β ∂F/∂β`, closed form.
pub fn coeff_c2(beta: f64, rho: f64) -> Result<f64> {
    let m = MpParams::new(beta, rho)?;
    Ok(c2_from(&m))
}

fn c2_from(m: &MpParams) -> f64 {
    let (beta, rho) = (m.beta, m.rho);
    let sb = beta.sqrt();
    let g_s = m.gamma_mp + m.s;
    let first = beta * LOG2_E * (m.ln_gamma_ratio() + m.ln_half_one_plus_s());
    let second = LOG2_E * (sb - 1.0) * m.one_minus_s / (2.0 * g_s);
    let bracket = -(sb + 1.0) + 2.0 * m.d * (rho * beta - rho - 1.0)
        + 2.0 * sb / (1.0 + m.s).powi(2);
    first - second - m.a * LOG2_E / 4.0 * bracket
}

/// The auxiliary quantity `d` shared by `c1` and `c2`.
pub fn coeff_d(beta: f64, rho: f64) -> Result<f64> {
    Ok(MpParams::new(beta, rho)?.d)
}

/// Sensitivity `δ/ε` at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPoint {
    pub beta: f64,
    pub rho: f64,
    pub value: f64,
}

/// `δ/ε = (F − c2)/c1`.
///
/// The numerator cancels to `O(ρ²)` at low SNR, so relative accuracy degrades
/// like `ε_machine/ρ`; it is still about 1e-8 at ρ = 1e-8. Round-off below
/// zero is clamped.
pub fn sensitivity(beta: f64, rho: f64) -> Result<SensitivityPoint> {
    let m = MpParams::new(beta, rho)?;
    let c1 = c1_from(&m);
    if !(c1 > 0.0) {
        return Err(Error::Numeric(format!(
            "c1 = {c1} is not positive at beta={beta}, rho={rho}"
        )));
    }
    let f = cap_f(beta, rho)?;
    let value = ((f - c2_from(&m)) / c1).max(0.0);
    Ok(SensitivityPoint { beta, rho, value })
}

/// β = 1 reduction: `(ln b)(1 + b/ρ) − (1/b)(1 + ρ/b)` with `b = (1 + √(1+4ρ))/2`.
pub fn sensitivity_beta1(rho: f64) -> f64 {
    let root = (1.0 + 4.0 * rho).sqrt();
    let b = 0.5 * (1.0 + root);
    // ln b = ln(1 + (√(1+4ρ) − 1)/2), with the difference formed without cancellation
    let ln_b = (2.0 * rho / (root + 1.0)).ln_1p();
    ln_b * (1.0 + b / rho) - (1.0 + rho / b) / b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrRegime {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptote {
    pub value: f64,
    /// False when the high-SNR form is nonpositive, i.e. ρ is too small for it.
    pub in_regime: bool,
}

/// First-order sensitivity asymptotes: `βρ/2` as ρ → 0; `ln(ρ)/2 − 1` (β = 1)
/// or `ln ρ + ln(β−1) − 1` (β > 1) as ρ → ∞.
pub fn sensitivity_asymptote(beta: f64, rho: f64, regime: SnrRegime) -> Result<Asymptote> {
    check_domain(beta, rho)?;
    Ok(match regime {
        SnrRegime::Low => Asymptote {
            value: beta * rho / 2.0,
            in_regime: true,
        },
        SnrRegime::High => {
            let value = if beta == 1.0 {
                rho.ln() / 2.0 - 1.0
            } else {
                rho.ln() + (beta - 1.0).ln() - 1.0
            };
            Asymptote {
                value,
                in_regime: value > 0.0,
            }
        }
    })
}

/// SNR increase in dB for a power penalty coefficient δ: `10 log10(1 + δ)`.
pub fn db_penalty(delta: f64) -> Result<f64> {
    if !(delta > -1.0) {
        return Err(Error::Domain(format!("power penalty must exceed -1, got {delta}")));
    }
    Ok(10.0 * delta.ln_1p() / std::f64::consts::LN_10)
}

/// Complexity-reduction coefficient `ε = (β' − β)/β`.
pub fn complexity_reduction(beta_from: f64, beta_to: f64) -> f64 {
    (beta_to - beta_from) / beta_from
}

/// Finds ρ with `sensitivity(β, ρ) = target` on `[1e-8, 1e8]`.
///
/// Monotonicity in ρ is not assumed: a log-spaced scan looks for sign changes
/// first and refuses targets that are crossed zero or several times. The
/// bracket is then bisected in `ln ρ` to a relative width of 1e-13.
pub fn solve_operating_point(beta: f64, target: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!("target sensitivity must be positive, got {target}")));
    }
    check_domain(beta, 1.0)?;
    let (ln_lo, ln_hi) = (SOLVER_RHO_MIN.ln(), SOLVER_RHO_MAX.ln());
    let decades = (SOLVER_RHO_MAX / SOLVER_RHO_MIN).log10().round() as usize;
    let n = decades * SCAN_PER_DECADE;
    let f = |ln_rho: f64| -> Result<f64> { Ok(sensitivity(beta, ln_rho.exp())?.value - target) };

    let mut brackets = Vec::new();
    let mut prev_x = ln_lo;
    let mut prev_f = f(prev_x)?;
    for i in 1..=n {
        let x = ln_lo + (ln_hi - ln_lo) * i as f64 / n as f64;
        let fx = f(x)?;
        if fx == 0.0 {
            brackets.push((x, x));
        } else if prev_f != 0.0 && (prev_f < 0.0) != (fx < 0.0) {
            brackets.push((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    let (mut lo, mut hi) = match brackets.as_slice() {
        [] => {
            return Err(Error::Range(format!(
                "sensitivity {target} is not reached for beta={beta} on rho in [{SOLVER_RHO_MIN:e}, {SOLVER_RHO_MAX:e}]"
            )))
        }
        [one] => *one,
        many => {
            return Err(Error::Range(format!(
                "sensitivity {target} is crossed {} times for beta={beta}; operating point is ambiguous",
                many.len()
            )))
        }
    };
    let mut f_lo = f(lo)?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid.exp());
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Default β step for [`finite_diff_sensitivity`], relative to β.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

/// Sensitivity from its definition, without the closed-form derivatives.
///
/// With `M` fixed, `K ∝ 1/β`, so holding `I_eq ≈ K·F` constant while β moves
/// to `β + dβ` means solving `F(β + dβ, ρ(1 + δ))/(β + dβ) = F(β, ρ)/β` for δ.
/// Returns `δ / (dβ/β)`.
pub fn finite_diff_sensitivity(beta: f64, rho: f64, dbeta: f64) -> Result<f64> {
    check_domain(beta, rho)?;
    if !(dbeta > 0.0) {
        return Err(Error::Domain(format!("dbeta must be positive, got {dbeta}")));
    }
    let beta2 = beta + dbeta;
    let base = cap_f(beta, rho)? * beta2;
    let g = |delta: f64| -> Result<f64> { Ok(cap_f(beta2, rho * (1.0 + delta))? * beta - base) };

    let mut lo = -0.5;
    let mut hi = 1.0;
    if g(lo)? > 0.0 {
        return Err(Error::Range(format!(
            "finite-difference root below delta={lo} at beta={beta}, rho={rho}"
        )));
    }
    while g(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Range(format!(
                "finite-difference root not bracketed at beta={beta}, rho={rho}"
            )));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    Ok(delta / (dbeta / beta))
}

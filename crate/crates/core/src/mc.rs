//! Monte Carlo sum-rates over i.i.d. Rayleigh channels.
//!
//! `H` is always `K x M` (served users by transmit antennas) and the power
//! weights form a `K`-vector on the probability simplex.

use crate::error::{Error, Result};
use crate::matgen::{gram_eigenvalues, log_det_capacity, sample_channel, ChannelEnsemble, Cholesky, ComplexMatrix};
use crate::stats::{run_trials, Estimate};
use crate::LOG2_E;

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_OPT_TOL: f64 = 1e-7;
pub const MAX_OPT_ITERS: usize = 500;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn check_dims(m: usize, k: usize, trials: u64) -> Result<()> {
    if m == 0 || k == 0 {
        return Err(Error::Dimension(format!("need M >= 1 and K >= 1, got M={m}, K={k}")));
    }
    if trials == 0 {
        return Err(Error::Dimension("need at least one trial".into()));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("rho must be positive and finite, got {rho}")));
    }
    Ok(())
}

/// Equal-power sum-rate `E log2 det(I + (ρ/K) H* H)`.
pub fn estimate_i_eq(m: usize, k: usize, rho: f64, trials: u64, seed: u64) -> Result<Estimate> {
    check_dims(m, k, trials)?;
    check_rho(rho)?;
    let acc = run_trials(trials, 1, |t, out| {
        let h = sample_channel(&ChannelEnsemble::new(k, m, seed, t))?;
        out[0] = log_det_capacity(&h, rho / k as f64)?;
        Ok(())
    })?;
    Ok(acc[0].estimate())
}

/// Power weights on the simplex, one per served user.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub weights: Vec<f64>,
    /// `log2 det(I + ρ H* D H)` at `weights`.
    pub objective: f64,
    /// Norm of the projected-gradient step `P(w + ∇f) − w`.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `log2 det(I + ρ H* diag(w) H)`.
pub fn weighted_objective(h: &ComplexMatrix, rho: f64, weights: &[f64]) -> Result<f64> {
    let root: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
    log_det_capacity(&h.scale_rows(&root), rho)
}

/// Gradient of [`weighted_objective`]: `(log2 e) ρ h_k (I + ρ H* D H)^{-1} h_k*`.
pub fn objective_gradient(h: &ComplexMatrix, rho: f64, weights: &[f64]) -> Result<Vec<f64>> {
    let root: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
    let hw = h.scale_rows(&root);
    let mut a = hw.conj_transpose().matmul(&hw).scale(rho);
    a.add_diag(1.0);
    let chol = Cholesky::new(&a)?;
    Ok((0..h.rows())
        .map(|k| {
            let hk: Vec<_> = h.row(k).iter().map(|z| z.conj()).collect();
            let x = chol.solve(&hk);
            let quad: f64 = hk.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            LOG2_E * rho * quad
        })
        .collect())
}

/// Euclidean projection onto `{w : w >= 0, Σ w = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn gradient_map(w: &[f64], g: &[f64]) -> (Vec<f64>, f64) {
    let stepped: Vec<f64> = w.iter().zip(g).map(|(a, b)| a + b).collect();
    let p = project_simplex(&stepped);
    let norm = p.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    (p, norm)
}

/// `gᵀ(to − from)` for two points of the simplex. The mean of `g` over the
/// moving coordinates is removed first: it contributes nothing exactly but
/// dominates the rounding error.
fn directional(g: &[f64], to: &[f64], from: &[f64]) -> f64 {
    let (sum, n) = g
        .iter()
        .zip(to.iter().zip(from))
        .filter(|(_, (t, f))| t != f)
        .fold((0.0, 0usize), |(s, n), (gi, _)| (s + gi, n + 1));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    g.iter().zip(to.iter().zip(from)).map(|(gi, (t, f))| (gi - mean) * (t - f)).sum()
}

/// Maximizes the concave `log2 det(I + ρ H* D H)` over diagonal `D` with unit trace.
///
/// Projected gradient ascent with Armijo backtracking (step halves from 1.0).
/// The iteration starts from the best of the uniform allocation and the `K`
/// single-user allocations, so the result never falls below either. Stops when
/// the projected-gradient norm drops below `tol` or after [`MAX_OPT_ITERS`];
/// in the latter case the best iterate is returned with `converged = false`.
pub fn optimize_power_allocation(h: &ComplexMatrix, rho: f64, tol: f64) -> Result<PowerAllocation> {
    check_rho(rho)?;
    let k = h.rows();
    if k == 0 || h.cols() == 0 {
        return Err(Error::Dimension("empty channel".into()));
    }
    if k == 1 {
        let objective = weighted_objective(h, rho, &[1.0])?;
        return Ok(PowerAllocation {
            weights: vec![1.0],
            objective,
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut w = vec![1.0 / k as f64; k];
    let mut f = weighted_objective(h, rho, &w)?;
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let fe = weighted_objective(h, rho, &e)?;
        if fe > f {
            f = fe;
            w = e;
        }
    }

    let mut iterations = 0;
    let mut g = objective_gradient(h, rho, &w)?;
    let (_, mut residual) = gradient_map(&w, &g);
    let mut first_step = 1.0;
    while residual >= tol && iterations < MAX_OPT_ITERS {
        iterations += 1;
        let mut step = first_step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let cand = project_simplex(&trial);
            let ascent = directional(&g, &cand, &w);
            let fc = weighted_objective(h, rho, &cand)?;
            let gc = objective_gradient(h, rho, &cand)?;
            // near the optimum value differences sink into rounding; for a concave
            // objective a nonnegative slope at the candidate still certifies ascent
            if fc >= f + ARMIJO * ascent || directional(&gc, &cand, &w) >= 0.0 {
                accepted = Some((cand, fc.max(f), gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            if first_step != 1.0 {
                // the spectral step can be far off along flat directions
                first_step = 1.0;
                continue;
            }
            break;
        };
        // Barzilai-Borwein step for the next iteration (the objective is concave, so sᵀy > 0)
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..k {
            let (si, yi) = (cand[i] - w[i], g[i] - gc[i]);
            ss += si * si;
            sy += si * yi;
        }
        first_step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1.0 };
        w = cand;
        f = fc;
        g = gc;
        residual = gradient_map(&w, &g).1;
    }

    Ok(PowerAllocation {
        weights: w,
        objective: f,
        kkt_residual: residual,
        iterations,
        converged: residual < tol,
    })
}

/// Optimized-power sum-rate `E max_D log2 det(I + ρ H* D H)`.
pub fn estimate_i_opt(m: usize, k: usize, rho: f64, trials: u64, seed: u64) -> Result<Estimate> {
    check_dims(m, k, trials)?;
    check_rho(rho)?;
    let acc = run_trials(trials, 1, |t, out| {
        let h = sample_channel(&ChannelEnsemble::new(k, m, seed, t))?;
        out[0] = optimize_power_allocation(&h, rho, DEFAULT_OPT_TOL)?.objective;
        Ok(())
    })?;
    Ok(acc[0].estimate())
}

/// Rate of serving only the strongest user: `log2(1 + ρ max_k ‖h_k‖²)`.
pub fn best_single_user_rate(h: &ComplexMatrix, rho: f64) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::Dimension("empty channel".into()));
    }
    let g = h.row_norms_sqr().into_iter().fold(0.0, f64::max);
    Ok((rho * g).ln_1p() * LOG2_E)
}

/// Low-SNR linear growth `(log2 e) ρ M`.
pub fn low_snr_linear_bound(m: usize, rho: f64) -> f64 {
    LOG2_E * rho * m as f64
}

/// Equal-power rate curve over an SNR grid, reusing one eigendecomposition
/// per channel draw for every grid point (common random numbers).
pub fn i_eq_curve(m: usize, k: usize, rhos: &[f64], trials: u64, seed: u64) -> Result<Vec<Estimate>> {
    check_dims(m, k, trials)?;
    for &r in rhos {
        check_rho(r)?;
    }
    let acc = run_trials(trials, rhos.len(), |t, out| {
        let h = sample_channel(&ChannelEnsemble::new(k, m, seed, t))?;
        let eig = gram_eigenvalues(&h)?;
        for (o, &rho) in out.iter_mut().zip(rhos) {
            let s = rho / k as f64;
            *o = eig.iter().map(|l| (s * l).ln_1p()).sum::<f64>() * LOG2_E;
        }
        Ok(())
    })?;
    Ok(acc.iter().map(|a| a.estimate()).collect())
}

/// Optimized-power rate curve; the same channel draws are used at every grid point.
pub fn i_opt_curve(m: usize, k: usize, rhos: &[f64], trials: u64, seed: u64) -> Result<Vec<Estimate>> {
    check_dims(m, k, trials)?;
    for &r in rhos {
        check_rho(r)?;
    }
    let acc = run_trials(trials, rhos.len(), |t, out| {
        let h = sample_channel(&ChannelEnsemble::new(k, m, seed, t))?;
        for (o, &rho) in out.iter_mut().zip(rhos) {
            *o = optimize_power_allocation(&h, rho, DEFAULT_OPT_TOL)?.objective;
        }
        Ok(())
    })?;
    Ok(acc.iter().map(|a| a.estimate()).collect())
}

/// SNR in dB at which a rate curve, sampled at increasing `rho_db`, first
/// reaches `rate`. Linear interpolation between grid points; `None` if the
/// curve never brackets `rate`.
pub fn rho_db_at_rate(rho_db: &[f64], rates: &[f64], rate: f64) -> Option<f64> {
    rho_db
        .windows(2)
        .zip(rates.windows(2))
        .find(|(_, r)| r[0] <= rate && rate <= r[1])
        .map(|(x, r)| {
            if r[1] == r[0] {
                x[0]
            } else {
                x[0] + (x[1] - x[0]) * (rate - r[0]) / (r[1] - r[0])
            }
        })
}

/// Extra SNR (dB) curve `b` needs to match the rate curve `a` reaches at `at_db`.
pub fn db_gap(rho_db: &[f64], rates_a: &[f64], rates_b: &[f64], at_db: f64) -> Option<f64> {
    let level = interpolate(rho_db, rates_a, at_db)?;
    Some(rho_db_at_rate(rho_db, rates_b, level)? - at_db)
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    xs.windows(2)
        .zip(ys.windows(2))
        .find(|(w, _)| w[0] <= x && x <= w[1])
        .map(|(w, y)| y[0] + (y[1] - y[0]) * (x - w[0]) / (w[1] - w[0]))
}

use anyhow::{bail, Context, Result};
use bcsens::closed_form::{
    cap_f, complexity_reduction, db_penalty, sensitivity, sensitivity_asymptote, solve_operating_point, SnrRegime,
};
use bcsens::maxchi::{cdf_max_chisq, empirical_max_stats};
use bcsens::mc::{i_eq_curve, i_opt_curve};
use bcsens::precoder::{simulate_ber, Constellation, Fading, PrecoderConfig};
use bcsens::{db_to_linear, linear_to_db};

use crate::config::{Command, RunConfig};
use crate::format::{g9, Table};

/// Sensitivity and its two asymptotes over the β list and dB grid.
pub fn sensitivity_table(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["beta", "rho_db", "sensitivity", "low_asymptote", "high_asymptote"]);
    for &beta in &cfg.betas {
        if !(beta >= 1.0) {
            bail!("sens: beta must be >= 1, got {beta}");
        }
        for rho_db in cfg.rho_grid_db() {
            let rho = db_to_linear(rho_db);
            let s = sensitivity(beta, rho).with_context(|| format!("beta={beta}, rho_db={rho_db}"))?;
            let lo = sensitivity_asymptote(beta, rho, SnrRegime::Low)?;
            let hi = sensitivity_asymptote(beta, rho, SnrRegime::High)?;
            t.push(vec![g9(beta), g9(rho_db), g9(s.value), g9(lo.value), g9(hi.value)]);
        }
    }
    Ok(t)
}

/// For each transition `beta_base → β′`, the SNR at which a fractional power
/// increase `target` buys the user reduction, and its dB cost.
pub fn operating_point_table(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "beta_from",
        "beta_to",
        "epsilon",
        "delta",
        "required_sensitivity",
        "rho_db",
        "db_penalty",
    ]);
    let penalty = db_penalty(cfg.target)?;
    for &to in &cfg.betas {
        let eps = complexity_reduction(cfg.beta_base, to);
        if !(eps > 0.0) {
            bail!("op-point: transition {} -> {to} does not reduce the user count", cfg.beta_base);
        }
        let required = cfg.target / eps;
        let rho_db = if cfg.target == 0.0 {
            f64::NEG_INFINITY
        } else {
            let rho = solve_operating_point(cfg.beta_base, required)
                .with_context(|| format!("op-point: transition {} -> {to}", cfg.beta_base))?;
            linear_to_db(rho)
        };
        t.push(vec![
            g9(cfg.beta_base),
            g9(to),
            g9(eps),
            g9(cfg.target),
            g9(required),
            g9(rho_db),
            g9(penalty),
        ]);
    }
    Ok(t)
}

/// Monte Carlo equal-power and optimized sum-rates next to the large-system value `K·F`.
pub fn mi_table(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "M", "K", "rho_db", "i_eq_mc", "i_eq_se", "i_eq_closed", "i_opt_mc", "i_opt_se",
    ]);
    let grid = cfg.rho_grid_db();
    let rhos: Vec<f64> = grid.iter().map(|&d| db_to_linear(d)).collect();
    for &k in &cfg.ks {
        if k == 0 || k > cfg.m {
            bail!("mi: need 1 <= K <= M, got K={k}, M={}", cfg.m);
        }
        let beta = cfg.m as f64 / k as f64;
        let eq = i_eq_curve(cfg.m, k, &rhos, cfg.trials, cfg.seed)?;
        let opt = if cfg.opt_trials > 0 {
            Some(i_opt_curve(cfg.m, k, &rhos, cfg.opt_trials, cfg.seed)?)
        } else {
            None
        };
        for (i, (&rho_db, &rho)) in grid.iter().zip(&rhos).enumerate() {
            let closed = k as f64 * cap_f(beta, rho)?;
            let (om, os) = opt.as_ref().map_or((f64::NAN, f64::NAN), |o| (o[i].mean, o[i].std_error));
            t.push(vec![
                cfg.m.to_string(),
                k.to_string(),
                g9(rho_db),
                g9(eq[i].mean),
                g9(eq[i].std_error),
                g9(closed),
                g9(om),
                g9(os),
            ]);
        }
    }
    Ok(t)
}

/// Exact and simulated probability that the largest of M `Gamma(M,1)` draws stays below `M(1+ζ)`.
pub fn maxchi_table(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "M",
        "zeta",
        "analytic_prob",
        "empirical_prob",
        "empirical_se",
        "mean_max_over_M",
    ]);
    for &m in &cfg.ms {
        let stats = empirical_max_stats(m, &cfg.zetas, cfg.trials, cfg.seed)?;
        let mean = stats.mean_max.mean / m as f64;
        for s in &stats.slack {
            let analytic = cdf_max_chisq(m, m as f64 * (1.0 + s.zeta))?;
            t.push(vec![
                m.to_string(),
                g9(s.zeta),
                g9(analytic),
                g9(s.prob),
                g9(s.std_error),
                g9(mean),
            ]);
        }
    }
    Ok(t)
}

pub fn precoder_config(cfg: &RunConfig, k: usize) -> Result<PrecoderConfig> {
    let modulation = cfg.constellation.for_users(k)?;
    let pc = PrecoderConfig {
        m: cfg.m,
        k,
        pool: cfg.pool.max(k),
        alpha: cfg.alpha.unwrap_or(k as f64),
        constellation: Constellation::new(modulation),
        seed: cfg.seed,
        tau_factor: cfg.tau_factor,
        perturb: true,
        fading: match cfg.coherence {
            0 => Fading::Fast,
            n => Fading::Block(n),
        },
    };
    pc.validate()?;
    Ok(pc)
}

/// Uncoded BER of the vector-perturbation chain for each K.
pub fn vp_ber_table(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["K", "constellation", "rho_db", "ber", "bit_errors", "bits"]);
    let grid = cfg.rho_grid_db();
    for &k in &cfg.ks {
        let pc = precoder_config(cfg, k)?;
        for p in simulate_ber(&pc, &grid, cfg.trials)? {
            t.push(vec![
                k.to_string(),
                pc.constellation.modulation.name().to_string(),
                g9(p.rho_db),
                g9(p.ber),
                p.bit_errors.to_string(),
                p.bits_sent.to_string(),
            ]);
        }
    }
    Ok(t)
}

pub fn table(cfg: &RunConfig) -> Result<Table> {
    match cfg.command {
        Command::Sens => sensitivity_table(cfg),
        Command::OpPoint => operating_point_table(cfg),
        Command::Mi => mi_table(cfg),
        Command::MaxChi => maxchi_table(cfg),
        Command::VpBer => vp_ber_table(cfg),
    }
}

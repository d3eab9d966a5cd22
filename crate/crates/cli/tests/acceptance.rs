//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bcsens::closed_form::{
    cap_f, cap_f_quadrature, coeff_c1, coeff_c2, finite_diff_sensitivity, sensitivity, solve_operating_point,
    FD_RELATIVE_STEP,
};
use bcsens::matgen::{log_det_capacity, sample_channel, ChannelEnsemble};
use bcsens::maxchi::{cdf_max_chisq, concentration_lhs, tail_upper_bound};
use bcsens::mc::{best_single_user_rate, estimate_i_eq, optimize_power_allocation, DEFAULT_OPT_TOL};
use bcsens::precoder::{
    find_perturbation, mean_gamma_norm, receive, regularized_inverse, simulate_ber, tau, transmit, Constellation,
    Modulation, PrecoderConfig,
};
use bcsens::rng::trial_rng;
use bcsens::{db_to_linear, Complex64, ComplexMatrix};
use rand::Rng;
use statrs::function::gamma::gamma_ur;

const BETAS: [f64; 5] = [1.0, 1.5, 2.0, 4.0, 8.0];
const RHOS: [f64; 7] = [1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1e3];
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn closed_form_vs_quadrature() -> Outcome {
    let mut worst = 0.0f64;
    for &b in &BETAS {
        for &r in &RHOS {
            worst = worst.max((cap_f(b, r).unwrap() - cap_f_quadrature(b, r).unwrap()).abs());
        }
    }
    outcome(worst < 1e-6, format!("max |F - quadrature| = {worst:.3e} bits (limit 1e-6)"))
}

fn sensitivity_vs_finite_difference() -> Outcome {
    let mut worst = 0.0f64;
    for &b in &BETAS {
        for &r in &RHOS {
            let s = sensitivity(b, r).unwrap().value;
            let fd = finite_diff_sensitivity(b, r, FD_RELATIVE_STEP * b).unwrap();
            worst = worst.max(rel(fd, s));
        }
    }
    outcome(worst < 1e-3, format!("max relative error = {worst:.3e} (limit 1e-3)"))
}

fn gradient_coefficients() -> Outcome {
    let h = 1e-6;
    let mut worst = (0.0f64, 0.0f64);
    for &b in &BETAS {
        for &r in &RHOS {
            let f = |bb: f64, rr: f64| cap_f(bb, rr).unwrap();
            let d_rho = (f(b, r * (1.0 + h)) - f(b, r * (1.0 - h))) / (2.0 * h);
            // F is defined for beta >= 1 only; second-order one-sided stencil at the edge
            let d_beta = if b == 1.0 {
                (-3.0 * f(b, r) + 4.0 * f(b * (1.0 + h), r) - f(b * (1.0 + 2.0 * h), r)) / (2.0 * h)
            } else {
                (f(b * (1.0 + h), r) - f(b * (1.0 - h), r)) / (2.0 * h)
            };
            worst.0 = worst.0.max(rel(coeff_c1(b, r).unwrap(), d_rho));
            worst.1 = worst.1.max(rel(coeff_c2(b, r).unwrap(), d_beta));
        }
    }
    outcome(
        worst.0 < 1e-4 && worst.1 < 1e-4,
        format!("max relative error c1 = {:.3e}, c2 = {:.3e} (limit 1e-4)", worst.0, worst.1),
    )
}

fn operating_points() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (target, want_db) in [(0.3, 1.0), (0.1, -6.0), (0.043, -10.0)] {
        let db = 10.0 * solve_operating_point(1.0, target).unwrap().log10();
        pass &= (db - want_db).abs() <= 0.3;
        parts.push(format!("{target} -> {db:.3} dB (want {want_db} +/- 0.3)"));
    }
    outcome(pass, parts.join("; "))
}

fn bcsens() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bcsens"))
}

fn run_cli(args: &[&str], out: &Path) -> Vec<u8> {
    let status = bcsens()
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .expect("spawn bcsens");
    assert!(status.success(), "bcsens {args:?} failed");
    std::fs::read(out).expect("read CSV")
}

/// `(rho_db, rate)` per K from an `mi` CSV.
fn mi_curves(csv: &str, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |n: &str| header.iter().position(|h| *h == n).unwrap();
    let (ck, cr, ci) = (col("K"), col("rho_db"), col("i_eq_mc"));
    let mut x = Vec::new();
    let mut y = Vec::new();
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        if f[ck] == k.to_string() {
            x.push(f[cr].parse().unwrap());
            y.push(f[ci].parse().unwrap());
        }
    }
    (x, y)
}

fn lerp_at(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.windows(2).position(|w| w[0] <= x && x <= w[1]).expect("x inside grid");
    ys[i] + (ys[i + 1] - ys[i]) * (x - xs[i]) / (xs[i + 1] - xs[i])
}

/// First SNR at which an increasing curve reaches `level`.
fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    let i = ys.windows(2).position(|w| w[0] <= level && level <= w[1])?;
    Some(xs[i] + (xs[i + 1] - xs[i]) * (level - ys[i]) / (ys[i + 1] - ys[i]))
}

fn halving_penalty(dir: &Path) -> Outcome {
    let start = Instant::now();
    let csv = run_cli(
        &[
            "mi", "--m", "8", "--ks", "8,4", "--rho-start-db", "-20", "--rho-stop-db", "60", "--rho-step-db",
            "0.25", "--trials", "10000", "--opt-trials", "0", "--seed", "5",
        ],
        &dir.join("mi.csv"),
    );
    let elapsed = start.elapsed();
    let csv = String::from_utf8(csv).unwrap();
    let (x8, y8) = mi_curves(&csv, 8);
    let (x4, y4) = mi_curves(&csv, 4);
    let gap = |at: f64| crossing(&x4, &y4, lerp_at(&x8, &y8, at)).map(|x| x - at);
    let (g1, g10, g20) = (gap(1.0), gap(10.0), gap(20.0));
    let pass = matches!(g1, Some(g) if (g - 1.4).abs() <= 0.2)
        && matches!(g10, Some(g) if g > 2.3)
        && matches!(g20, Some(g) if g > 7.0)
        && elapsed <= Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "gap at 1 dB = {g1:.3?} (1.4 +/- 0.2), 10 dB = {g10:.3?} (> 2.3), 20 dB = {g20:.3?} (> 7.0); {:.1}s (<= 120s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn rate_anchors() -> Outcome {
    let a = estimate_i_eq(8, 8, db_to_linear(1.0), 10_000, SEED).unwrap();
    let b = estimate_i_eq(8, 4, db_to_linear(2.65), 10_000, SEED).unwrap();
    let pass = (a.mean - 8.0).abs() <= 0.2 && (b.mean - 8.0).abs() <= 0.2;
    outcome(
        pass,
        format!(
            "I_eq(8,8,1 dB) = {:.4} +/- {:.4}, I_eq(8,4,2.65 dB) = {:.4} +/- {:.4} (want 8.0 +/- 0.2)",
            a.mean, a.std_error, b.mean, b.std_error
        ),
    )
}

fn snr_asymptotes() -> Outcome {
    let mut pass = true;
    let mut ratios = Vec::new();
    for beta in [1.0, 2.0, 4.0, 8.0] {
        let r = sensitivity(beta, 1e-3).unwrap().value / (beta * 1e-3 / 2.0);
        pass &= (0.98..=1.02).contains(&r);
        ratios.push(format!("{r:.4}"));
    }
    let gaps: Vec<f64> = [1e3, 1e4, 1e5]
        .iter()
        .map(|&rho: &f64| (sensitivity(2.0, rho).unwrap().value - (rho.ln() - 1.0)).abs())
        .collect();
    pass &= gaps[1] < gaps[0] && gaps[2] < gaps[1];
    outcome(
        pass,
        format!(
            "low-SNR ratios [{}] in [0.98, 1.02]; high-SNR gaps [{}] decreasing",
            ratios.join(", "),
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn bound_ordering() -> Outcome {
    let configs = [(2, 2), (4, 2), (4, 4), (8, 4), (8, 8), (3, 1)];
    let mut rng = trial_rng(SEED, 8);
    let mut violations = 0;
    let tol = 1e-12;
    for i in 0..1000u64 {
        let (m, k) = configs[i as usize % configs.len()];
        let rho = db_to_linear(rng.random_range(-20.0..30.0));
        let h = sample_channel(&ChannelEnsemble::new(k, m, SEED, i)).unwrap();
        let eq = log_det_capacity(&h, rho / k as f64).unwrap();
        let opt = optimize_power_allocation(&h, rho, DEFAULT_OPT_TOL).unwrap().objective;
        let single = best_single_user_rate(&h, rho).unwrap();
        if !(eq >= 0.0 && opt >= eq - tol * eq && opt >= single - tol * single) {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations of I_opt >= I_eq >= 0, I_opt >= single-user in 1000 draws"))
}

fn max_concentration() -> Outcome {
    let ms = [8usize, 16, 32, 64, 128];
    let cdf: Vec<f64> = ms.iter().map(|&m| cdf_max_chisq(m, 1.5 * m as f64).unwrap()).collect();
    let cdf_ok = cdf.windows(2).all(|w| w[1] > w[0]) && cdf[4] >= 0.99;

    let mut bound_ok = true;
    for &m in &ms {
        for f in [1.1, 1.25, 1.5, 2.0, 3.0] {
            let x = f * m as f64;
            let tail = gamma_ur(m as f64, x);
            bound_ok &= tail_upper_bound(m, x).unwrap() >= tail;
        }
    }

    let mut lhs_ok = true;
    let mut negative = Vec::new();
    for zeta in [0.1, 0.5, 1.0] {
        let v: Vec<f64> = ms.iter().map(|&m| concentration_lhs(m, zeta)).collect();
        lhs_ok &= v.windows(2).all(|w| w[1] > w[0]);
        for (&m, &x) in ms.iter().zip(&v) {
            if !(x > 0.0) {
                lhs_ok = false;
                negative.push(format!("M={m}, zeta={zeta}: {x:.4}"));
            }
        }
    }
    outcome(
        cdf_ok && bound_ok && lhs_ok,
        format!(
            "cdf {cdf:.5?} (increasing, >= 0.99 at 128): {cdf_ok}; tail bound holds: {bound_ok}; \
             exponent positive and increasing: {lhs_ok}{}",
            if negative.is_empty() { String::new() } else { format!(" (nonpositive at {})", negative.join("; ")) }
        ),
    )
}

fn exhaustive_objective(u: &[Complex64], g: &ComplexMatrix, tau: f64, radius: i64) -> f64 {
    let k = u.len();
    let width = 2 * radius + 1;
    let mut best = f64::INFINITY;
    for code in 0..width.pow(2 * k as u32) {
        let mut c = code;
        let v: Vec<Complex64> = u
            .iter()
            .map(|s| {
                let re = c % width - radius;
                c /= width;
                let im = c % width - radius;
                c /= width;
                s + Complex64::new(re as f64, im as f64) * tau
            })
            .collect();
        best = best.min(g.mul_vec(&v).iter().map(|z| z.norm_sqr()).sum());
    }
    best
}

fn vector_perturbation() -> Outcome {
    let start = Instant::now();
    let mut rng = trial_rng(SEED, 10);

    // (a) exhaustive comparison
    let radius = 2;
    let mut mismatches = 0;
    let mut outside = 0;
    for i in 0..1000u64 {
        let k = rng.random_range(1..=3usize);
        let m = k + rng.random_range(0..=1usize);
        let con = Constellation::new(if rng.random_bool(0.5) { Modulation::Qpsk } else { Modulation::Qam16 });
        let h = sample_channel(&ChannelEnsemble::new(k, m, SEED, 10_000 + i)).unwrap();
        let rho = db_to_linear(rng.random_range(0.0..20.0));
        let g = regularized_inverse(&h, k as f64, rho).unwrap();
        let u: Vec<Complex64> = (0..k).map(|_| con.symbol(rng.random_range(0..con.size()))).collect();
        let tau = tau(&con);
        let p = find_perturbation(&u, &g, tau).unwrap();
        let best = exhaustive_objective(&u, &g, tau, radius);
        let inside = p.l.iter().all(|z| z.re.abs() <= radius && z.im.abs() <= radius);
        if !inside {
            outside += 1;
        }
        let tol = 1e-9 * best.max(1e-12);
        if p.objective > best + tol || (inside && (p.objective - best).abs() > tol) {
            mismatches += 1;
        }
    }
    let a_ok = mismatches == 0;

    // (b) power reduction
    let mut cfg = PrecoderConfig::new(8, 8, Modulation::Qam16, SEED);
    let rho = db_to_linear(10.0);
    let with = mean_gamma_norm(&cfg, rho, 10_000, true).unwrap();
    let without = mean_gamma_norm(&cfg, rho, 10_000, false).unwrap();
    let b_ok = with.mean < without.mean;

    // (c) noiseless zero-forcing loopback
    cfg.alpha = 0.0;
    let mut bit_errors = 0u32;
    for t in 0..2000u64 {
        let h = sample_channel(&ChannelEnsemble::new(8, 8, SEED, 50_000 + t)).unwrap();
        let labels: Vec<usize> = (0..8).map(|_| rng.random_range(0..16)).collect();
        let u: Vec<Complex64> = labels.iter().map(|&l| cfg.constellation.symbol(l)).collect();
        let tx = transmit(&u, &h, &cfg, 1.0).unwrap();
        let decoded = receive(&h.mul_vec(&tx.x), cfg.tau(), tx.gamma_norm, &cfg.constellation);
        bit_errors += labels.iter().zip(&decoded).map(|(a, b)| (a ^ b).count_ones()).sum::<u32>();
    }
    let c_ok = bit_errors == 0;

    // (d) uncoded comparison at equal throughput
    let grid: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64).collect();
    let mut k8 = PrecoderConfig::new(8, 8, Modulation::Qpsk, SEED);
    k8.pool = 8;
    let mut k4 = PrecoderConfig::new(8, 4, Modulation::Qam16, SEED);
    k4.pool = 8;
    let ber8 = simulate_ber(&k8, &grid, 1_000_000).unwrap();
    let ber4 = simulate_ber(&k4, &grid, 1_000_000).unwrap();
    let monotone = |c: &[bcsens::precoder::BerPoint]| c.windows(2).all(|w| w[1].ber <= w[0].ber);
    let better: Vec<f64> = ber8
        .iter()
        .zip(&ber4)
        .filter(|(a, b)| a.rho_db >= 10.0 && b.ber < a.ber)
        .map(|(a, _)| a.rho_db)
        .collect();
    let d_ok = monotone(&ber8) && monotone(&ber4) && !better.is_empty();

    let elapsed = start.elapsed();
    outcome(
        a_ok && b_ok && c_ok && d_ok && elapsed <= Duration::from_secs(600),
        format!(
            "(a) {mismatches} mismatches / 1000 ({outside} outside search box); \
             (b) E[gamma] {:.4} vs {:.4} unperturbed; (c) {bit_errors} bit errors; \
             (d) monotone {}/{}, K=4 better at {better:?} dB; {:.1}s (<= 600s)",
            with.mean,
            without.mean,
            monotone(&ber8),
            monotone(&ber4),
            elapsed.as_secs_f64()
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let runs: [(&str, &[&str]); 5] = [
        ("sens", &["sens"]),
        ("op-point", &["op-point"]),
        (
            "mi",
            &["mi", "--ks", "8,4", "--trials", "3000", "--opt-trials", "20", "--rho-start-db", "-10", "--rho-stop-db", "20", "--rho-step-db", "2"],
        ),
        ("maxchi", &["maxchi", "--trials", "5000"]),
        ("vp-ber", &["vp-ber", "--trials", "20000", "--rho-start-db", "0", "--rho-stop-db", "20", "--rho-step-db", "5"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in runs {
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "1", "4"].iter().enumerate() {
            let mut a: Vec<&str> = args.to_vec();
            a.extend(["--seed", "77", "--threads", threads]);
            outputs.push(run_cli(&a, &dir.join(format!("{name}-{i}.csv"))));
        }
        if outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("commands with differing output across runs or thread counts: {differing:?}"),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("closed-form rate vs quadrature", Box::new(closed_form_vs_quadrature)),
        ("sensitivity vs finite difference", Box::new(sensitivity_vs_finite_difference)),
        ("c1, c2 vs finite differences", Box::new(gradient_coefficients)),
        ("operating points at beta = 1", Box::new(operating_points)),
        ("halving penalty from mi CSV", Box::new(|| halving_penalty(dir.path()))),
        ("rate anchors", Box::new(rate_anchors)),
        ("SNR asymptotes", Box::new(snr_asymptotes)),
        ("rate bound ordering", Box::new(bound_ordering)),
        ("max-gamma concentration", Box::new(max_concentration)),
        ("vector perturbation", Box::new(vector_perturbation)),
        ("CLI determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:2} {verdict}  {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(n);
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}

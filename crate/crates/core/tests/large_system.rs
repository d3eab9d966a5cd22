use approx::assert_relative_eq;
use bcsens::closed_form::cap_f;
use bcsens::matgen::{sample_channel, ChannelEnsemble};
use bcsens::mc::{estimate_i_eq, estimate_i_opt, optimize_power_allocation, DEFAULT_OPT_TOL};
use bcsens::precoder::{simulate_ber, Modulation, PrecoderConfig};
use bcsens::{db_to_linear, Estimate};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn per_user_rate_matches_large_matrix_monte_carlo() {
    let k = 64;
    let est = estimate_i_eq(k, k, 0.1, 400, 17).unwrap();
    let per_user = est.mean / k as f64;
    assert_relative_eq!(per_user, cap_f(1.0, 0.1).unwrap(), max_relative = 0.02);
}

#[test]
fn finite_system_tracks_closed_form() {
    for (m, k, db) in [(8, 8, 1.0), (8, 4, 10.0), (8, 2, -5.0), (4, 1, 20.0)] {
        let rho = db_to_linear(db);
        let est = estimate_i_eq(m, k, rho, 20_000, 3).unwrap();
        let closed = k as f64 * cap_f(m as f64 / k as f64, rho).unwrap();
        assert!(
            (est.mean - closed).abs() < 4.0 * est.std_error + 0.05,
            "M={m} K={k} {db} dB: {} vs {closed}",
            est.mean
        );
    }
}

#[test]
fn equal_power_is_tight_at_low_snr() {
    let rho = db_to_linear(-30.0);
    let eq = estimate_i_eq(16, 16, rho, 200, 9).unwrap();
    let opt = estimate_i_opt(16, 16, rho, 200, 9).unwrap();
    assert!(opt.mean >= eq.mean);
    assert!(opt.mean / eq.mean <= 1.5, "{}", opt.mean / eq.mean);
}

#[test]
fn optimizer_certifies_stationarity() {
    for t in 0..50 {
        let h = sample_channel(&ChannelEnsemble::new(4, 6, 21, t)).unwrap();
        for db in [-10.0, 0.0, 10.0, 25.0] {
            let p = optimize_power_allocation(&h, db_to_linear(db), DEFAULT_OPT_TOL).unwrap();
            assert!(p.converged, "draw {t} at {db} dB");
            assert!(p.kkt_residual < DEFAULT_OPT_TOL);
            assert_relative_eq!(p.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn estimates_ignore_thread_count() {
    let run = || -> (Estimate, Estimate) {
        (
            estimate_i_eq(6, 3, 4.0, 3000, 5).unwrap(),
            estimate_i_opt(6, 3, 4.0, 300, 5).unwrap(),
        )
    };
    assert_eq!(in_pool(1, run), in_pool(3, run));

    let mut cfg = PrecoderConfig::new(8, 4, Modulation::Qam16, 12);
    cfg.pool = 8;
    let ber = || simulate_ber(&cfg, &[6.0, 14.0], 5000).unwrap();
    assert_eq!(in_pool(1, ber), in_pool(4, ber));
}

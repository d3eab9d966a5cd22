//! Vector-perturbation precoding over the multi-user downlink, uncoded.
//!
//! The transmitter sends `x = G(u + τl)/√γ` with the regularized inverse
//! `G = H*(HH* + (α/ρ)I)^{-1}`, where the Gaussian-integer vector `l`
//! minimizes `γ = ‖G(u + τl)‖²`. Each receiver rescales by `√γ`, folds
//! both axes into `[−τ/2, τ/2)` and slices.
//!
//! SNR convention: the transmit vector has unit total power and each user
//! sees `CN(0, 1/ρ)` noise, so ρ is total transmit power over per-user noise.

use num_complex::{Complex, Complex64};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{closest_point, DEFAULT_NODE_CAP};
use crate::matgen::{Cholesky, ComplexMatrix};
use crate::rng::{complex_gaussian, trial_rng};
use crate::stats::{run_trials, Estimate};

pub const DEFAULT_TAU_FACTOR: f64 = 2.5;
/// Channel uses simulated per work item (and per random stream).
const BLOCK_USES: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn name(&self) -> &'static str {
        match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "16QAM",
        }
    }
}

impl std::str::FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            other => Err(Error::Domain(format!("unknown constellation '{other}'"))),
        }
    }
}

/// Square QAM with Gray labels and unit average energy.
///
/// A label is `(in-phase bits << bits_per_axis) | quadrature bits`; along each
/// axis the Gray code of the level index is used, so horizontally or
/// vertically adjacent points differ in one bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub modulation: Modulation,
    /// Indexed by label.
    pub points: Vec<Complex64>,
    /// Distance between neighbouring points.
    pub delta: f64,
    /// Magnitude of the largest point.
    pub c_max: f64,
    pub bits_per_symbol: u32,
    levels: Vec<f64>,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let (per_axis, norm) = match modulation {
            Modulation::Qpsk => (2usize, 2f64.sqrt()),
            Modulation::Qam16 => (4usize, 10f64.sqrt()),
        };
        Self::square(modulation, per_axis, 1.0 / norm)
    }

    fn square(modulation: Modulation, per_axis: usize, half_spacing: f64) -> Self {
        let bits_axis = per_axis.trailing_zeros();
        let levels: Vec<f64> = (0..per_axis)
            .map(|i| (2.0 * i as f64 - (per_axis - 1) as f64) * half_spacing)
            .collect();
        let mut points = vec![Complex64::new(0.0, 0.0); per_axis * per_axis];
        for (i, &re) in levels.iter().enumerate() {
            for (q, &im) in levels.iter().enumerate() {
                let label = (gray(i) << bits_axis) | gray(q);
                points[label] = Complex64::new(re, im);
            }
        }
        let c_max = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        Self {
            modulation,
            points,
            delta: 2.0 * half_spacing,
            c_max,
            bits_per_symbol: 2 * bits_axis,
            levels,
        }
    }

    /// The same constellation with every point multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        let per_axis = self.levels.len();
        let mut c = Self::square(self.modulation, per_axis, s * self.delta / 2.0);
        c.modulation = self.modulation;
        c
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn symbol(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    fn slice_axis(&self, x: f64) -> usize {
        let n = self.levels.len();
        let idx = (x / self.delta + (n - 1) as f64 / 2.0).round();
        gray(idx.clamp(0.0, (n - 1) as f64) as usize)
    }

    /// Label of the nearest point.
    pub fn slice(&self, z: Complex64) -> usize {
        let bits_axis = self.bits_per_symbol / 2;
        (self.slice_axis(z.re) << bits_axis) | self.slice_axis(z.im)
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.size() as f64
    }
}

/// Perturbation lattice spacing `τ = factor·(|c|_max + Δ/2)`.
pub fn tau_with_factor(c: &Constellation, factor: f64) -> f64 {
    factor * (c.c_max + c.delta / 2.0)
}

/// `τ = 2.5(|c|_max + Δ/2)`.
pub fn tau(c: &Constellation) -> f64 {
    tau_with_factor(c, DEFAULT_TAU_FACTOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fading {
    /// Fresh channel for every transmitted vector.
    Fast,
    /// Channel held for this many consecutive vectors.
    Block(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderConfig {
    /// Transmit antennas.
    pub m: usize,
    /// Served users.
    pub k: usize,
    /// Pool the served users are drawn from; `pool >= k`.
    pub pool: usize,
    /// Regularization; zero gives the zero-forcing inverse.
    pub alpha: f64,
    pub constellation: Constellation,
    pub seed: u64,
    pub tau_factor: f64,
    /// When false, `l = 0` always (plain regularized inversion).
    pub perturb: bool,
    pub fading: Fading,
}

impl PrecoderConfig {
    /// Defaults: `α = K`, pool of `K`, fast fading, perturbation on.
    pub fn new(m: usize, k: usize, modulation: Modulation, seed: u64) -> Self {
        Self {
            m,
            k,
            pool: k,
            alpha: k as f64,
            constellation: Constellation::new(modulation),
            seed,
            tau_factor: DEFAULT_TAU_FACTOR,
            perturb: true,
            fading: Fading::Fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.m {
            return Err(Error::Dimension(format!(
                "need 1 <= K <= M, got K={}, M={}",
                self.k, self.m
            )));
        }
        if self.pool < self.k {
            return Err(Error::Dimension(format!(
                "user pool {} is smaller than K={}",
                self.pool, self.k
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.tau_factor > 0.0) {
            return Err(Error::Domain(format!("tau factor must be positive, got {}", self.tau_factor)));
        }
        if let Fading::Block(0) = self.fading {
            return Err(Error::Domain("coherence length must be positive".into()));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        tau_with_factor(&self.constellation, self.tau_factor)
    }
}

/// `G = H*(HH* + (α/ρ)I)^{-1}`, an `M x K` matrix.
pub fn regularized_inverse(h: &ComplexMatrix, alpha: f64, rho: f64) -> Result<ComplexMatrix> {
    if !(alpha >= 0.0) || !(rho > 0.0) {
        return Err(Error::Domain(format!(
            "need alpha >= 0 and rho > 0, got alpha={alpha}, rho={rho}"
        )));
    }
    let mut b = h.gram();
    b.add_diag(alpha / rho);
    let chol = Cholesky::new(&b).map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!("regularized inverse is singular: {msg}")),
        other => other,
    })?;
    // B Hermitian, so H* B^{-1} = (B^{-1} H)*
    Ok(chol.solve_matrix(h).conj_transpose())
}

/// Result of the perturbation search.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub l: Vec<Complex<i64>>,
    /// `(u + τl)* G*G (u + τl)`
    pub objective: f64,
    pub optimal: bool,
}

/// `v* Q v` for Hermitian `Q`.
fn hermitian_form(q: &ComplexMatrix, v: &[Complex64]) -> f64 {
    let qv = q.mul_vec(v);
    v.iter().zip(&qv).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Real `2K x 2K` form with `(re, im)` of each complex coordinate interleaved.
fn real_form(q: &ComplexMatrix) -> Vec<f64> {
    let k = q.rows();
    let n = 2 * k;
    let mut r = vec![0.0; n * n];
    for i in 0..k {
        for j in 0..k {
            let z = q[(i, j)];
            r[(2 * i) * n + 2 * j] = z.re;
            r[(2 * i) * n + 2 * j + 1] = -z.im;
            r[(2 * i + 1) * n + 2 * j] = z.im;
            r[(2 * i + 1) * n + 2 * j + 1] = z.re;
        }
    }
    r
}

fn search(u: &[Complex64], q: &ComplexMatrix, q_real: &[f64], tau: f64) -> Result<Perturbation> {
    let target: Vec<f64> = u.iter().flat_map(|z| [-z.re / tau, -z.im / tau]).collect();
    let cp = closest_point(q_real, &target, DEFAULT_NODE_CAP)?;
    let l: Vec<Complex<i64>> = cp.point.chunks(2).map(|p| Complex::new(p[0], p[1])).collect();
    let v = perturbed(u, &l, tau);
    Ok(Perturbation {
        objective: hermitian_form(q, &v),
        l,
        optimal: cp.optimal,
    })
}

fn perturbed(u: &[Complex64], l: &[Complex<i64>], tau: f64) -> Vec<Complex64> {
    u.iter()
        .zip(l)
        .map(|(a, b)| a + Complex64::new(b.re as f64, b.im as f64) * tau)
        .collect()
}

/// Gaussian-integer `l` minimizing `(u + τl)* G*G (u + τl)`.
pub fn find_perturbation(u: &[Complex64], g: &ComplexMatrix, tau: f64) -> Result<Perturbation> {
    if u.len() != g.cols() {
        return Err(Error::Dimension(format!(
            "{} symbols for a precoder with {} columns",
            u.len(),
            g.cols()
        )));
    }
    let q = g.conj_transpose().matmul(g);
    search(u, &q, &real_form(&q), tau)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    /// Unit-norm transmit vector, one entry per antenna.
    pub x: Vec<Complex64>,
    /// `‖G(u + τl)‖²`, the power normalization.
    pub gamma_norm: f64,
    pub perturbation: Perturbation,
}

/// Precoder for one channel realization at one SNR.
#[derive(Debug, Clone)]
pub struct Precoder {
    g: ComplexMatrix,
    q: ComplexMatrix,
    q_real: Vec<f64>,
    tau: f64,
}

impl Precoder {
    pub fn new(h: &ComplexMatrix, alpha: f64, rho: f64, tau: f64) -> Result<Self> {
        let g = regularized_inverse(h, alpha, rho)?;
        let q = g.conj_transpose().matmul(&g);
        let q_real = real_form(&q);
        Ok(Self { g, q, q_real, tau })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.g
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn precode(&self, u: &[Complex64], perturb: bool) -> Result<Transmission> {
        if u.len() != self.g.cols() {
            return Err(Error::Dimension(format!(
                "{} symbols for {} users",
                u.len(),
                self.g.cols()
            )));
        }
        let perturbation = if perturb {
            search(u, &self.q, &self.q_real, self.tau)?
        } else {
            Perturbation {
                l: vec![Complex::new(0, 0); u.len()],
                objective: hermitian_form(&self.q, u),
                optimal: true,
            }
        };
        let s = self.g.mul_vec(&perturbed(u, &perturbation.l, self.tau));
        let gamma: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        let (x, gamma_norm) = if gamma > 0.0 {
            let inv = 1.0 / gamma.sqrt();
            (s.iter().map(|z| z * inv).collect(), gamma)
        } else {
            (s, 1.0)
        };
        Ok(Transmission {
            x,
            gamma_norm,
            perturbation,
        })
    }
}

/// Precodes `u` for channel `h` at SNR `rho` under `cfg`.
pub fn transmit(u: &[Complex64], h: &ComplexMatrix, cfg: &PrecoderConfig, rho: f64) -> Result<Transmission> {
    Precoder::new(h, cfg.alpha, rho, cfg.tau())?.precode(u, cfg.perturb)
}

/// Centered modulo: folds `x` into `[−τ/2, τ/2)`.
pub fn mod_tau(x: f64, tau: f64) -> f64 {
    let r = x - tau * ((x + tau / 2.0) / tau).floor();
    if r >= tau / 2.0 {
        r - tau
    } else if r < -tau / 2.0 {
        r + tau
    } else {
        r
    }
}

/// Per-user receiver: rescale by `√γ`, fold each axis modulo τ, slice.
/// Returns constellation labels.
pub fn receive(y: &[Complex64], tau: f64, gamma_norm: f64, constellation: &Constellation) -> Vec<usize> {
    let scale = gamma_norm.sqrt();
    y.iter()
        .map(|&yk| {
            let z = yk * scale;
            constellation.slice(Complex64::new(mod_tau(z.re, tau), mod_tau(z.im, tau)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub rho_db: f64,
    pub bit_errors: u64,
    pub bits_sent: u64,
    pub ber: f64,
}

fn draw_channel<R: Rng>(rng: &mut R, cfg: &PrecoderConfig) -> ComplexMatrix {
    let mut pool = ComplexMatrix::zeros(cfg.pool, cfg.m);
    for i in 0..cfg.pool {
        pool.row_mut(i).iter_mut().for_each(|z| *z = complex_gaussian(rng));
    }
    pool
}

fn select_users<R: Rng>(rng: &mut R, pool: &ComplexMatrix, k: usize) -> ComplexMatrix {
    if pool.rows() == k {
        return pool.clone();
    }
    let mut chosen = index::sample(rng, pool.rows(), k).into_vec();
    chosen.sort_unstable();
    let mut h = ComplexMatrix::zeros(k, pool.cols());
    for (r, &src) in chosen.iter().enumerate() {
        h.row_mut(r).copy_from_slice(pool.row(src));
    }
    h
}

/// Uncoded BER of the full chain at each SNR in `rho_grid_db`.
///
/// `symbols_per_point` counts data symbols summed over users; it is rounded
/// up to whole transmitted vectors. Random streams are shared across SNR
/// points (common random numbers), and results do not depend on thread count.
pub fn simulate_ber(cfg: &PrecoderConfig, rho_grid_db: &[f64], symbols_per_point: u64) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    if symbols_per_point == 0 {
        return Err(Error::Domain("symbols_per_point must be at least 1".into()));
    }
    let uses = symbols_per_point.div_ceil(cfg.k as u64);
    let blocks = uses.div_ceil(BLOCK_USES);
    let tau = cfg.tau();
    let bits = cfg.constellation.bits_per_symbol as u64;

    rho_grid_db
        .iter()
        .map(|&rho_db| {
            let rho = crate::db_to_linear(rho_db);
            let noise_std = (1.0 / rho).sqrt();
            let errors: Vec<u64> = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = trial_rng(cfg.seed, b);
                    let mut errors = 0u64;
                    let mut pool = None;
                    let n_uses = BLOCK_USES.min(uses - b * BLOCK_USES);
                    for t in 0..n_uses {
                        let refresh = match cfg.fading {
                            Fading::Fast => true,
                            Fading::Block(n) => t % n as u64 == 0,
                        };
                        if refresh || pool.is_none() {
                            pool = Some(draw_channel(&mut rng, cfg));
                        }
                        let h = select_users(&mut rng, pool.as_ref().expect("drawn above"), cfg.k);
                        let labels: Vec<usize> =
                            (0..cfg.k).map(|_| rng.random_range(0..cfg.constellation.size())).collect();
                        let u: Vec<Complex64> = labels.iter().map(|&l| cfg.constellation.symbol(l)).collect();
                        let tx = transmit(&u, &h, cfg, rho)?;
                        let y: Vec<Complex64> = h
                            .mul_vec(&tx.x)
                            .into_iter()
                            .map(|s| s + complex_gaussian(&mut rng) * noise_std)
                            .collect();
                        let decoded = receive(&y, tau, tx.gamma_norm, &cfg.constellation);
                        errors += labels
                            .iter()
                            .zip(&decoded)
                            .map(|(a, b)| (a ^ b).count_ones() as u64)
                            .sum::<u64>();
                    }
                    Ok(errors)
                })
                .collect::<Result<_>>()?;
            let bit_errors: u64 = errors.iter().sum();
            let bits_sent = uses * cfg.k as u64 * bits;
            Ok(BerPoint {
                rho_db,
                bit_errors,
                bits_sent,
                ber: bit_errors as f64 / bits_sent as f64,
            })
        })
        .collect()
}

/// Mean power normalization `E[γ]` over `draws` random channels and symbol
/// vectors at SNR `rho`. Draw `i` depends only on `(cfg.seed, i)`, so runs
/// with and without perturbation see the same channels and data.
pub fn mean_gamma_norm(cfg: &PrecoderConfig, rho: f64, draws: u64, perturb: bool) -> Result<Estimate> {
    cfg.validate()?;
    let acc = run_trials(draws, 1, |i, out| {
        let mut rng = trial_rng(cfg.seed, i);
        let pool = draw_channel(&mut rng, cfg);
        let h = select_users(&mut rng, &pool, cfg.k);
        let u: Vec<Complex64> = (0..cfg.k)
            .map(|_| cfg.constellation.symbol(rng.random_range(0..cfg.constellation.size())))
            .collect();
        let p = Precoder::new(&h, cfg.alpha, rho, cfg.tau())?;
        out[0] = p.precode(&u, perturb)?.gamma_norm;
        Ok(())
    })?;
    Ok(acc[0].estimate())
}

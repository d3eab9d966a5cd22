//! Run configuration: built-in defaults, then a `key = value` file, then flags.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use bcsens::precoder::Modulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sens,
    OpPoint,
    Mi,
    MaxChi,
    VpBer,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sens => "sens",
            Command::OpPoint => "op-point",
            Command::Mi => "mi",
            Command::MaxChi => "maxchi",
            Command::VpBer => "vp-ber",
        }
    }
}

/// Constellation choice for `vp-ber`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstellationChoice {
    /// QPSK for K=8, 16QAM for K=4: 16 coded bits per channel use in total.
    Auto,
    Fixed(Modulation),
}

impl ConstellationChoice {
    pub fn for_users(&self, k: usize) -> Result<Modulation> {
        match self {
            ConstellationChoice::Fixed(m) => Ok(*m),
            ConstellationChoice::Auto => match (16 % k.max(1), 16 / k.max(1)) {
                (0, 2) => Ok(Modulation::Qpsk),
                (0, 4) => Ok(Modulation::Qam16),
                _ => Err(anyhow!("no automatic constellation for K={k}; set constellation")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// `sens`: β values. `op-point`: target β′ of each transition.
    pub betas: Vec<f64>,
    /// `op-point`: β the transitions start from.
    pub beta_base: f64,
    /// `op-point`: tolerated fractional power increase δ.
    pub target: f64,
    /// Transmit antennas for `mi` and `vp-ber`.
    pub m: usize,
    /// Served users for `mi` and `vp-ber`.
    pub ks: Vec<usize>,
    /// `maxchi`: number of gamma variates.
    pub ms: Vec<usize>,
    pub zetas: Vec<f64>,
    pub rho_start_db: f64,
    pub rho_stop_db: f64,
    pub rho_step_db: f64,
    /// Monte Carlo draws; for `vp-ber`, data symbols per SNR point.
    pub trials: u64,
    /// `mi`: draws for the optimized rate, 0 to skip it.
    pub opt_trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub constellation: ConstellationChoice,
    /// Regularization; `None` means α = K.
    pub alpha: Option<f64>,
    pub pool: usize,
    pub tau_factor: f64,
    /// Channel uses per fading block, 0 for fast fading.
    pub coherence: u32,
    /// Worker threads, 0 for the rayon default.
    pub threads: usize,
    pub gnuplot: bool,
}

pub const KEYS: &[&str] = &[
    "betas",
    "beta_base",
    "target",
    "m",
    "ks",
    "ms",
    "zetas",
    "rho_start_db",
    "rho_stop_db",
    "rho_step_db",
    "trials",
    "opt_trials",
    "seed",
    "out",
    "constellation",
    "alpha",
    "pool",
    "tau_factor",
    "coherence",
    "threads",
    "gnuplot",
];

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("{key}: bad item '{s}': {e}")))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("{key}: empty list");
    }
    Ok(items)
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| anyhow!("{key}: bad value '{v}': {e}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => bail!("{key}: expected a boolean, got '{v}'"),
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            betas: vec![1.0, 2.0, 4.0, 8.0],
            beta_base: 1.0,
            target: 0.3,
            m: 8,
            ks: vec![8, 4, 2, 1],
            ms: vec![1, 2, 4, 8, 16, 32, 64, 128],
            zetas: vec![0.1, 0.5, 1.0],
            rho_start_db: -40.0,
            rho_stop_db: 40.0,
            rho_step_db: 1.0,
            trials: bcsens::mc::DEFAULT_TRIALS,
            opt_trials: 100,
            seed: 1,
            out: None,
            constellation: ConstellationChoice::Auto,
            alpha: None,
            pool: 8,
            tau_factor: bcsens::precoder::DEFAULT_TAU_FACTOR,
            coherence: 0,
            threads: 0,
            gnuplot: false,
        };
        match command {
            Command::Sens | Command::MaxChi => {}
            Command::OpPoint => c.betas = vec![2.0, 4.0, 8.0],
            Command::Mi => {
                c.rho_start_db = -20.0;
                c.rho_step_db = 0.5;
            }
            Command::VpBer => {
                c.ks = vec![8, 4];
                c.rho_start_db = 0.0;
                c.rho_stop_db = 30.0;
                c.rho_step_db = 2.0;
                c.trials = 100_000;
            }
        }
        c
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        match k {
            "betas" => self.betas = parse_list(k, value)?,
            "beta_base" => self.beta_base = parse_one(k, value)?,
            "target" => self.target = parse_one(k, value)?,
            "m" => self.m = parse_one(k, value)?,
            "ks" => self.ks = parse_list(k, value)?,
            "ms" => self.ms = parse_list(k, value)?,
            "zetas" => self.zetas = parse_list(k, value)?,
            "rho_start_db" => self.rho_start_db = parse_one(k, value)?,
            "rho_stop_db" => self.rho_stop_db = parse_one(k, value)?,
            "rho_step_db" => self.rho_step_db = parse_one(k, value)?,
            "trials" => self.trials = parse_one(k, value)?,
            "opt_trials" => self.opt_trials = parse_one(k, value)?,
            "seed" => self.seed = parse_one(k, value)?,
            "out" => {
                let v = value.trim();
                self.out = (v != "-" && !v.is_empty()).then(|| PathBuf::from(v));
            }
            "constellation" => {
                self.constellation = match value.trim().to_ascii_lowercase().as_str() {
                    "auto" => ConstellationChoice::Auto,
                    other => ConstellationChoice::Fixed(other.parse().map_err(|e| anyhow!("{k}: {e}"))?),
                }
            }
            "alpha" => {
                self.alpha = match value.trim() {
                    "auto" => None,
                    v => Some(parse_one(k, v)?),
                }
            }
            "pool" => self.pool = parse_one(k, value)?,
            "tau_factor" => self.tau_factor = parse_one(k, value)?,
            "coherence" => self.coherence = parse_one(k, value)?,
            "threads" => self.threads = parse_one(k, value)?,
            "gnuplot" => self.gnuplot = parse_bool(k, value)?,
            _ => bail!("unknown configuration key '{key}'"),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_file_contents(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected 'key = value'", n + 1))?;
            self.set(k, v).with_context(|| format!("{origin}:{}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        self.apply_file_contents(&text, &path.display().to_string())
    }

    /// Defaults, then the optional file, then `overrides` in order.
    pub fn resolve(command: Command, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = Self::defaults(command);
        if let Some(f) = file {
            c.apply_file(f)?;
        }
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_step_db > 0.0) {
            bail!("rho_step_db must be positive, got {}", self.rho_step_db);
        }
        if !(self.rho_stop_db >= self.rho_start_db) {
            bail!(
                "rho_stop_db ({}) is below rho_start_db ({})",
                self.rho_stop_db,
                self.rho_start_db
            );
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.gnuplot && self.out.is_none() {
            bail!("gnuplot needs an output file (--out)");
        }
        Ok(())
    }

    /// Inclusive dB grid from start to stop.
    pub fn rho_grid_db(&self) -> Vec<f64> {
        let n = ((self.rho_stop_db - self.rho_start_db) / self.rho_step_db + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.rho_start_db + i as f64 * self.rho_step_db).collect()
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "betas" => join(&self.betas),
            "beta_base" => self.beta_base.to_string(),
            "target" => self.target.to_string(),
            "m" => self.m.to_string(),
            "ks" => join(&self.ks),
            "ms" => join(&self.ms),
            "zetas" => join(&self.zetas),
            "rho_start_db" => self.rho_start_db.to_string(),
            "rho_stop_db" => self.rho_stop_db.to_string(),
            "rho_step_db" => self.rho_step_db.to_string(),
            "trials" => self.trials.to_string(),
            "opt_trials" => self.opt_trials.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.as_ref().map_or("-".into(), |p| p.display().to_string()),
            "constellation" => match self.constellation {
                ConstellationChoice::Auto => "auto".into(),
                ConstellationChoice::Fixed(m) => m.name().to_ascii_lowercase(),
            },
            "alpha" => self.alpha.map_or("auto".into(), |a| a.to_string()),
            "pool" => self.pool.to_string(),
            "tau_factor" => self.tau_factor.to_string(),
            "coherence" => self.coherence.to_string(),
            "threads" => self.threads.to_string(),
            "gnuplot" => self.gnuplot.to_string(),
            _ => unreachable!("key list and accessor disagree"),
        }
    }
}

/// Prints as a config file that reproduces this configuration.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# bcsens {}", self.command.name())?;
        for k in KEYS {
            writeln!(f, "{k} = {}", self.value_of(k))?;
        }
        Ok(())
    }
}

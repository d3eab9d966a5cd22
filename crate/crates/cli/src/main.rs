use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bcsens_cli::{execute, Command, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bcsens", version, about = "Sum-rate sensitivity to the number of served users")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sensitivity and its asymptotes versus SNR.
    Sens(Opts),
    /// Operating SNR for user-count reductions at a tolerated power increase.
    OpPoint(Opts),
    /// Monte Carlo and large-system sum-rate curves.
    Mi(Opts),
    /// Concentration of the maximum of gamma variates.
    Maxchi(Opts),
    /// Uncoded BER of vector-perturbation precoding.
    VpBer(Opts),
}

#[derive(Args)]
struct Opts {
    /// key = value file applied before flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    show_config: bool,
    /// Also write <out>.gp plotting the CSV.
    #[arg(long)]
    gnuplot: bool,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Output CSV; stdout when absent or "-".
    #[arg(long)]
    out: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho_start_db: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho_stop_db: Option<String>,
    #[arg(long)]
    rho_step_db: Option<String>,
    /// Comma-separated β values (op-point: target β′).
    #[arg(long)]
    betas: Option<String>,
    #[arg(long)]
    beta_base: Option<String>,
    /// Tolerated fractional power increase δ.
    #[arg(long)]
    target: Option<String>,
    /// Transmit antennas.
    #[arg(long)]
    m: Option<String>,
    /// Comma-separated user counts.
    #[arg(long)]
    ks: Option<String>,
    /// Comma-separated variate counts for maxchi.
    #[arg(long)]
    ms: Option<String>,
    #[arg(long)]
    zetas: Option<String>,
    /// Draws for the optimized rate (0 skips it).
    #[arg(long)]
    opt_trials: Option<String>,
    /// qpsk, 16qam or auto.
    #[arg(long)]
    constellation: Option<String>,
    /// Regularization, or auto for α = K.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    pool: Option<String>,
    #[arg(long)]
    tau_factor: Option<String>,
    /// Channel uses per fading block, 0 for fast fading.
    #[arg(long)]
    coherence: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Vec<(String, String)> {
        let fields = [
            ("threads", &self.threads),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("out", &self.out),
            ("rho_start_db", &self.rho_start_db),
            ("rho_stop_db", &self.rho_stop_db),
            ("rho_step_db", &self.rho_step_db),
            ("betas", &self.betas),
            ("beta_base", &self.beta_base),
            ("target", &self.target),
            ("m", &self.m),
            ("ks", &self.ks),
            ("ms", &self.ms),
            ("zetas", &self.zetas),
            ("opt_trials", &self.opt_trials),
            ("constellation", &self.constellation),
            ("alpha", &self.alpha),
            ("pool", &self.pool),
            ("tau_factor", &self.tau_factor),
            ("coherence", &self.coherence),
        ];
        let mut v: Vec<(String, String)> = fields
            .into_iter()
            .filter_map(|(k, val)| val.as_ref().map(|x| (k.to_string(), x.clone())))
            .collect();
        if self.gnuplot {
            v.push(("gnuplot".into(), "true".into()));
        }
        v
    }
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    let (command, opts) = match &cli.command {
        Sub::Sens(o) => (Command::Sens, o),
        Sub::OpPoint(o) => (Command::OpPoint, o),
        Sub::Mi(o) => (Command::Mi, o),
        Sub::Maxchi(o) => (Command::MaxChi, o),
        Sub::VpBer(o) => (Command::VpBer, o),
    };
    let cfg = RunConfig::resolve(command, opts.config.as_deref(), &opts.overrides())?;
    if opts.show_config {
        write!(std::io::stdout().lock(), "{cfg}")?;
        return Ok(());
    }
    if let Some(csv) = execute(&cfg)? {
        std::io::stdout().lock().write_all(csv.as_bytes())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bcsens: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

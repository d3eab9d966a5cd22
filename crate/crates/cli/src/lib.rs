//! Figure-data front end for the `bcsens` toolkit.
//!
//! Each subcommand resolves a [`RunConfig`], runs one library computation and
//! writes a CSV table (plus an optional gnuplot script).

pub mod commands;
pub mod config;
pub mod format;
pub mod gnuplot;

use std::path::PathBuf;

use anyhow::{Context, Result};

pub use config::{Command, ConstellationChoice, RunConfig};
pub use format::{g9, Table};

/// Runs the configured command, on a dedicated pool when `threads > 0`.
pub fn run(cfg: &RunConfig) -> Result<Table> {
    if cfg.threads == 0 {
        return commands::table(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("cannot start worker threads")?;
    pool.install(|| commands::table(cfg))
}

/// Where the gnuplot script for `out` goes: `out` with `.gp` appended.
pub fn gnuplot_path(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".gp");
    PathBuf::from(s)
}

/// Runs and writes the CSV to `cfg.out` (or returns it for stdout).
pub fn execute(cfg: &RunConfig) -> Result<Option<String>> {
    let table = run(cfg)?;
    let csv = table.to_csv();
    let Some(out) = &cfg.out else {
        return Ok(Some(csv));
    };
    std::fs::write(out, &csv).with_context(|| format!("cannot write {}", out.display()))?;
    if cfg.gnuplot {
        let gp = gnuplot_path(out);
        let name = out.file_name().map_or_else(|| out.display().to_string(), |n| n.to_string_lossy().into_owned());
        std::fs::write(&gp, gnuplot::script(cfg, &table, &name))
            .with_context(|| format!("cannot write {}", gp.display()))?;
    }
    Ok(None)
}

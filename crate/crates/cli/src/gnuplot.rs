//! Plain gnuplot scripts that plot a CSV written by one of the commands.

use std::fmt::Write as _;

use crate::config::{Command, RunConfig};
use crate::format::Table;

fn quoted(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Distinct values of `col`, in first-seen order.
fn groups(t: &Table, col: usize) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for r in &t.rows {
        if !seen.contains(&r[col]) {
            seen.push(r[col].clone());
        }
    }
    seen
}

pub fn script(cfg: &RunConfig, table: &Table, csv_name: &str) -> String {
    // (group column, x column, y columns, x label, y label, log y)
    let (group, x, ys, xl, yl, logy): (&str, &str, &[&str], &str, &str, bool) = match cfg.command {
        Command::Sens => ("beta", "rho_db", &["sensitivity"], "rho [dB]", "sensitivity", true),
        Command::OpPoint => ("beta_from", "beta_to", &["rho_db"], "beta'", "rho [dB]", false),
        Command::Mi => ("K", "rho_db", &["i_eq_mc", "i_eq_closed"], "rho [dB]", "sum-rate [bit/s/Hz]", false),
        Command::MaxChi => ("zeta", "M", &["analytic_prob", "empirical_prob"], "M", "probability", false),
        Command::VpBer => ("K", "rho_db", &["ber"], "rho [dB]", "uncoded BER", true),
    };
    let col = |name: &str| table.column(name).expect("known column") + 1;
    let g = col(group);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel {}", quoted(xl));
    let _ = writeln!(s, "set ylabel {}", quoted(yl));
    let _ = writeln!(s, "set grid");
    if logy {
        let _ = writeln!(s, "set logscale y");
    }
    let mut parts = Vec::new();
    for v in groups(table, g - 1) {
        for y in ys {
            // string compare so labels like QPSK or 0.5 both work
            parts.push(format!(
                "{} skip 1 using {}:(strcol({g}) eq {} ? ${} : NaN) with linespoints title {}",
                quoted(csv_name),
                col(x),
                quoted(&v),
                col(y),
                quoted(&format!("{y} {group}={v}")),
            ));
        }
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

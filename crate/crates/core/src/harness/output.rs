//! CSV and echo writers. Floats are printed with 12 significant digits.
//!
//! Trace columns, per round:
//! `t, Z_t`, then for each player `j`:
//! `pred_j, mistake_j, w_j_0..w_j_{K-1}, l_j_0..l_j_{K-1}, regret_j`.
//!
//! Summary columns, per run:
//! `run_id, seed, J, K, m, T, eta, p`,
//! `L_T_j` (each player), `regret_j`, `ext_regret_j`, `var_j_z` (player-major),
//! `bound_A_j, bound_B_j, bound_C_j` (each player),
//! `exact_bound_ok, slack2_bound_ok, cce_epsilon, bound_rhs`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::{HarnessError, RunConfig, RunResult};
use crate::metrics;

/// `%.12g`-style formatting: fixed notation for exponents in `[-5, 12)`,
/// scientific otherwise, trailing zeros removed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn trace_csv(result: &RunResult) -> String {
    let trace = &result.trace;
    let players = trace.players();
    let actions = trace.actions();
    let regrets: Vec<Vec<f64>> = (0..players)
        .map(|j| metrics::instantaneous_regrets(trace, j).expect("complete trace"))
        .collect();
    let mut out = String::from("t,Z_t");
    for j in 0..players {
        let _ = write!(out, ",pred_{j},mistake_{j}");
        for k in 0..actions {
            let _ = write!(out, ",w_{j}_{k}");
        }
        for k in 0..actions {
            let _ = write!(out, ",l_{j}_{k}");
        }
        let _ = write!(out, ",regret_{j}");
    }
    out.push('\n');
    for (t, r) in trace.records().iter().enumerate() {
        let _ = write!(out, "{},{}", r.round, r.realized_context);
        for (j, player_regrets) in regrets.iter().enumerate() {
            let _ = write!(out, ",{},{}", r.predictions[j], u8::from(r.is_mistake(j)));
            for p in r.strategies.get(j).probs() {
                let _ = write!(out, ",{}", sig12(*p));
            }
            for l in r.losses[j].values() {
                let _ = write!(out, ",{}", sig12(*l));
            }
            let _ = write!(out, ",{}", sig12(player_regrets[t]));
        }
        out.push('\n');
    }
    out
}

pub fn summary_header(players: usize, contexts: usize) -> String {
    let mut h = String::from("run_id,seed,J,K,m,T,eta,p");
    for j in 0..players {
        let _ = write!(h, ",L_T_{j}");
    }
    for j in 0..players {
        let _ = write!(h, ",regret_{j}");
    }
    for j in 0..players {
        let _ = write!(h, ",ext_regret_{j}");
    }
    for j in 0..players {
        for z in 0..contexts {
            let _ = write!(h, ",var_{j}_{z}");
        }
    }
    for j in 0..players {
        let _ = write!(h, ",bound_A_{j},bound_B_{j},bound_C_{j}");
    }
    h.push_str(",exact_bound_ok,slack2_bound_ok,cce_epsilon,bound_rhs\n");
    h
}

pub fn summary_row(result: &RunResult) -> String {
    let m = &result.metrics;
    let spec = &result.spec;
    let mut row = format!(
        "{},{},{},{},{},{},{},{}",
        result.run_id,
        result.seed,
        spec.num_players(),
        spec.num_actions(),
        spec.num_contexts(),
        result.trace.horizon(),
        sig12(m.eta),
        sig12(result.noise)
    );
    for p in &m.players {
        let _ = write!(row, ",{}", p.mistakes);
    }
    for p in &m.players {
        let _ = write!(row, ",{}", sig12(p.contextual_regret));
    }
    for p in &m.players {
        let _ = write!(row, ",{}", sig12(p.external_regret));
    }
    for p in &m.players {
        for v in &p.variation {
            let _ = write!(row, ",{}", sig12(*v));
        }
    }
    for p in &m.players {
        let _ = write!(
            row,
            ",{},{},{}",
            sig12(p.bound.init),
            sig12(p.bound.mistakes),
            sig12(p.bound.variation)
        );
    }
    let _ = writeln!(
        row,
        ",{},{},{},{}",
        u8::from(m.exact_bound_ok()),
        u8::from(m.slack2_bound_ok()),
        sig12(m.cce.epsilon),
        sig12(m.cce.bound_rhs)
    );
    row
}

pub const AGGREGATE_HEADER: &str = "sweep_value,cells,mean_regret,stderr_regret,mean_mistake_rate,\
stderr_mistake_rate,mean_cce_epsilon,stderr_cce_epsilon\n";

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One aggregate line for the runs of one sweep value. Regret and mistake
/// rate are averaged over players first.
pub fn aggregate_block(value: f64, results: &[&RunResult]) -> String {
    let regret: Vec<f64> = results
        .iter()
        .map(|r| {
            let ps = &r.metrics.players;
            ps.iter().map(|p| p.contextual_regret).sum::<f64>() / ps.len() as f64
        })
        .collect();
    let rate: Vec<f64> = results
        .iter()
        .map(|r| {
            let ps = &r.metrics.players;
            ps.iter().map(|p| p.mistakes as f64).sum::<f64>()
                / (ps.len() * r.trace.horizon()) as f64
        })
        .collect();
    let eps: Vec<f64> = results.iter().map(|r| r.metrics.cce.epsilon).collect();
    if results.is_empty() {
        return format!("{},0,,,,,,\n", sig12(value));
    }
    let (rm, rs) = mean_stderr(&regret);
    let (mm, ms) = mean_stderr(&rate);
    let (em, es) = mean_stderr(&eps);
    format!(
        "{},{},{},{},{},{},{},{}\n",
        sig12(value),
        results.len(),
        sig12(rm),
        sig12(rs),
        sig12(mm),
        sig12(ms),
        sig12(em),
        sig12(es)
    )
}

/// Canonical config text preceded by its digest.
pub fn config_echo(config: &RunConfig) -> String {
    format!(
        "# digest sha256:{}\n{}",
        config.digest(),
        config.canonical_text()
    )
}

/// Writes `contents` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let file_name = path
        .file_name()
        .ok_or_else(|| HarnessError::Io(format!("{}: not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents.as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    std::fs::rename(&tmp, path).map_err(io)
}

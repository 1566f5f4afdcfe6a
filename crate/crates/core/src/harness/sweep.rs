//! Sweeps over noise level or step size, one run per (value, seed) cell.

use std::path::Path;

use rayon::prelude::*;

use super::{
    aggregate_block, execute, sig12, summary_header, summary_row, trace_csv, write_atomic,
    EtaSetting, HarnessError, RunConfig, RunResult, SweepAxis,
};
use crate::prediction::{PredictorConfig, PredictorKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub seed: u64,
    pub run_id: String,
    pub config: RunConfig,
}

/// Cells ordered by (sweep value, seed) as listed in the config.
pub fn sweep_cells(config: &RunConfig) -> Result<Vec<SweepCell>, HarnessError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sweep: no sweep axis configured".into()))?;
    let mut cells = Vec::with_capacity(sweep.values.len() * config.seeds.len());
    for &value in &sweep.values {
        let mut cell_config = config.clone();
        cell_config.sweep = None;
        let tag = match sweep.axis {
            SweepAxis::P => {
                cell_config.predictors = config
                    .predictors
                    .iter()
                    .map(|p| PredictorConfig {
                        kind: PredictorKind::Noisy { p: value },
                        seed: p.seed,
                    })
                    .collect();
                "p"
            }
            SweepAxis::Eta => {
                cell_config.eta = EtaSetting::Fixed(value);
                "eta"
            }
        };
        for &seed in &config.seeds {
            cells.push(SweepCell {
                value,
                seed,
                run_id: format!("{tag}{}_s{seed}", sig12(value)),
                config: cell_config.clone(),
            });
        }
    }
    Ok(cells)
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub results: Vec<Result<RunResult, HarnessError>>,
}

impl SweepOutcome {
    pub fn failures(&self) -> impl Iterator<Item = (&SweepCell, &HarnessError)> {
        self.cells
            .iter()
            .zip(&self.results)
            .filter_map(|(c, r)| r.as_ref().err().map(|e| (c, e)))
    }

    /// Summary text: one row per successful cell, then the per-value aggregate block.
    pub fn summary(&self) -> String {
        let ok: Vec<(&SweepCell, &RunResult)> = self
            .cells
            .iter()
            .zip(&self.results)
            .filter_map(|(c, r)| r.as_ref().ok().map(|r| (c, r)))
            .collect();
        let Some((_, first)) = ok.first() else {
            return String::new();
        };
        let mut text = summary_header(first.spec.num_players(), first.spec.num_contexts());
        for (_, r) in &ok {
            text.push_str(&summary_row(r));
        }
        text.push('\n');
        text.push_str(super::AGGREGATE_HEADER);
        let mut values: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !values.contains(&c.value) {
                values.push(c.value);
            }
        }
        for v in values {
            let group: Vec<&RunResult> = ok
                .iter()
                .filter(|(c, _)| c.value == v)
                .map(|(_, r)| *r)
                .collect();
            text.push_str(&aggregate_block(v, &group));
        }
        text
    }
}

/// Runs every cell, `threads` at a time (0 picks the machine default).
pub fn run_sweep(config: &RunConfig, threads: usize) -> Result<SweepOutcome, HarnessError> {
    config.validate()?;
    let cells = sweep_cells(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let results = pool.install(|| {
        cells
            .par_iter()
            .map(|c| execute(&c.config, c.seed, &c.run_id))
            .collect()
    });
    Ok(SweepOutcome { cells, results })
}

impl SweepOutcome {
    /// Writes traces, `summary.csv`, `failures.csv` (when any cell failed) and
    /// `config_echo.toml`.
    pub fn write(&self, config: &RunConfig, out_dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", out_dir.display())))?;
        for r in self.results.iter().flatten() {
            if let Some(pilot) = &r.pilot {
                write_atomic(
                    &out_dir.join(format!("trace_{}.csv", pilot.run_id)),
                    &trace_csv(pilot),
                )?;
            }
            write_atomic(
                &out_dir.join(format!("trace_{}.csv", r.run_id)),
                &trace_csv(r),
            )?;
        }
        write_atomic(&out_dir.join("summary.csv"), &self.summary())?;
        let failures: Vec<_> = self.failures().collect();
        if !failures.is_empty() {
            let mut text = String::from("run_id,error\n");
            for (c, e) in failures {
                text.push_str(&format!(
                    "{},\"{}\"\n",
                    c.run_id,
                    e.to_string().replace('"', "'")
                ));
            }
            write_atomic(&out_dir.join("failures.csv"), &text)?;
        }
        write_atomic(
            &out_dir.join("config_echo.toml"),
            &super::config_echo(config),
        )?;
        Ok(())
    }
}

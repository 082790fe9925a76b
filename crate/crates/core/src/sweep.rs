//! Cartesian experiment grids over policy x alpha x p_bc x seed.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{EhflError, Result};
use crate::metrics::write_csv;
use crate::rng::{derive_seed, Domain};
use crate::scheduler::PolicyKind;
use crate::timeline::{run_to_completion, RunArtifacts};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub policies: Vec<PolicyKind>,
    pub alphas: Vec<f64>,
    pub p_bcs: Vec<f64>,
    /// Seed-axis coordinates; each run's seed is derived from the base seed
    /// and this coordinate only, so runs that differ in policy, alpha or
    /// p_bc share harvest and data streams.
    pub seeds: Vec<u64>,
}

impl Grid {
    /// Single-point grid at the base configuration.
    pub fn single(base: &Config) -> Self {
        Grid {
            policies: vec![base.policy],
            alphas: vec![base.alpha],
            p_bcs: vec![base.p_bc],
            seeds: vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, len) in [
            ("policies", self.policies.len()),
            ("alphas", self.alphas.len()),
            ("p_bcs", self.p_bcs.len()),
            ("seeds", self.seeds.len()),
        ] {
            if len == 0 {
                return Err(EhflError::config(axis, "grid axis is empty"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.policies.len() * self.alphas.len() * self.p_bcs.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One validated configuration per grid point, seed-major order.
    pub fn configs(&self, base: &Config) -> Result<Vec<Config>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.len());
        for &seed in &self.seeds {
            for &p_bc in &self.p_bcs {
                for &alpha in &self.alphas {
                    for &policy in &self.policies {
                        let cfg = Config {
                            policy,
                            alpha,
                            p_bc,
                            seed: derive_seed(base.seed, Domain::Sweep, seed),
                            ..base.clone()
                        };
                        cfg.validate()?;
                        out.push(cfg);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Outcome of a sweep: finished runs in grid order, plus failures.
pub struct SweepReport {
    pub runs: Vec<RunArtifacts>,
    pub failures: Vec<(Config, EhflError)>,
    pub merged_csv: PathBuf,
}

impl SweepReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

pub fn write_run(dir: &Path, run: &RunArtifacts) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv = fs::File::create(dir.join(format!("{}.csv", run.label.run_id)))?;
    write_csv(std::io::BufWriter::new(csv), &[(&run.label, &run.metrics)])?;
    let json = serde_json::to_string_pretty(&run.summary_json()).expect("summary serializes");
    fs::write(dir.join(format!("{}.json", run.label.run_id)), json)?;
    Ok(())
}

/// Runs every grid point (in parallel), writes one CSV and JSON summary per
/// run and a merged CSV in grid order. Diverged runs are reported and do not
/// stop the sweep.
pub fn run_sweep(grid: &Grid, base: &Config, dir: &Path) -> Result<SweepReport> {
    let configs = grid.configs(base)?;
    fs::create_dir_all(dir)?;
    let results: Vec<(Config, Result<RunArtifacts>)> = configs
        .into_par_iter()
        .map(|cfg| {
            let out = run_to_completion(&cfg);
            (cfg, out)
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (cfg, res) in results {
        match res {
            Ok(run) => {
                write_run(dir, &run)?;
                runs.push(run);
            }
            Err(e) => {
                log::error!(
                    "run {} failed: {e}",
                    crate::timeline::run_label(&cfg).run_id
                );
                failures.push((cfg, e));
            }
        }
    }
    let merged_csv = dir.join("merged.csv");
    let rows: Vec<_> = runs
        .iter()
        .map(|r| (&r.label, r.metrics.as_slice()))
        .collect();
    write_csv(
        std::io::BufWriter::new(fs::File::create(&merged_csv)?),
        &rows,
    )?;
    Ok(SweepReport {
        runs,
        failures,
        merged_csv,
    })
}

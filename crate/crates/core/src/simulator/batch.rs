//! Many paths at once, reduced to one record per path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detect_modified_ladder, occupation_time, simulate_killed_run, KilledRun, SimConfig};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Levels at which per-path functionals are recorded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Probes {
    /// `(x, y)` pairs for the occupation time of the reflected dual.
    pub occupation: Vec<(f64, f64)>,
}

/// Everything the checks need from one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path_index: u64,
    pub tau: f64,
    pub s_tau: f64,
    pub shat_tau: f64,
    pub n_tau: usize,
    pub sigma1: Option<f64>,
    /// `Shat((sigma ^ tau)-)`.
    pub shat_pre_sigma: f64,
    /// `Shat(sigma-) - Xhat(sigma-)` on `{sigma <= tau}`.
    pub gap1: Option<f64>,
    pub j1: Option<f64>,
    /// Smallest overshoot over all epochs.
    pub min_overshoot: Option<f64>,
    pub identity_error: f64,
    /// One value per [`Probes::occupation`] entry.
    pub occupation: Vec<f64>,
}

impl PathRecord {
    pub fn from_run(run: &KilledRun, probes: &Probes) -> Result<Self> {
        let d = detect_modified_ladder(run);
        let occupation = probes
            .occupation
            .iter()
            .map(|&(x, y)| occupation_time(run, x, y))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            path_index: run.path_index,
            tau: run.tau,
            s_tau: run.s_tau,
            shat_tau: run.shat_tau,
            n_tau: d.n_tau,
            sigma1: d.first_epoch(),
            shat_pre_sigma: d.pre_ladder_supremum(),
            gap1: d.gaps.first().copied(),
            j1: d.first_overshoot(),
            min_overshoot: d.j_parts.iter().copied().reduce(f64::min),
            identity_error: d.identity_error,
            occupation,
        })
    }

    /// `{sigma <= tau}`.
    pub fn laddered(&self) -> bool {
        self.sigma1.is_some()
    }
}

/// Per-path records ordered by path index. Merging concatenates and
/// re-sorts, so it is associative and commutative and the result does not
/// depend on how paths were batched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalSummary {
    pub probes: Probes,
    pub records: Vec<PathRecord>,
}

impl EmpiricalSummary {
    pub fn new(probes: Probes, mut records: Vec<PathRecord>) -> Self {
        records.sort_by_key(|r| r.path_index);
        Self { probes, records }
    }

    pub fn merge(mut self, other: Self) -> Result<Self> {
        if self.probes != other.probes {
            return Err(Error::InvalidInput("cannot merge summaries with different probes".into()));
        }
        self.records.extend(other.records);
        self.records.sort_by_key(|r| r.path_index);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn shat_tau(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.shat_tau).collect()
    }

    pub fn s_tau(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.s_tau).collect()
    }

    pub fn tau(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.tau).collect()
    }

    /// Samples of `Shat((sigma ^ tau)-)`.
    pub fn pre_ladder(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.shat_pre_sigma).collect()
    }

    pub fn ladder_flags(&self) -> Vec<bool> {
        self.records.iter().map(PathRecord::laddered).collect()
    }

    pub fn ladder_count(&self) -> usize {
        self.records.iter().filter(|r| r.laddered()).count()
    }

    /// First overshoots, one per path with `sigma <= tau`.
    pub fn overshoots(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.j1).collect()
    }

    /// `hist[n]` = number of paths with `N_tau = n`.
    pub fn n_tau_histogram(&self) -> Vec<u64> {
        let max = self.records.iter().map(|r| r.n_tau).max().unwrap_or(0);
        let mut hist = vec![0u64; max + 1];
        for r in &self.records {
            hist[r.n_tau] += 1;
        }
        hist
    }

    /// Indicators of `{tauhat_y <= tau}`, i.e. `Shat(tau) > y`.
    pub fn passage_flags(&self, y: f64) -> Vec<bool> {
        self.records.iter().map(|r| r.shat_tau > y).collect()
    }

    /// Occupation times for probe `i`.
    pub fn occupation(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.occupation[i]).collect()
    }

    pub fn max_identity_error(&self) -> f64 {
        self.records.iter().map(|r| r.identity_error).fold(0.0, f64::max)
    }
}

/// Simulates `config.n_paths` paths in batches of `config.batch_size`.
pub fn batch_simulate(model: &ModelSpec<f64>, config: &SimConfig, probes: &Probes) -> Result<EmpiricalSummary> {
    config.validate(model)?;
    for &(x, y) in &probes.occupation {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::InvalidInput(format!("occupation probe ({x}, {y}) must be positive")));
        }
    }
    let batches: Vec<(u64, u64)> = (0..config.n_paths)
        .step_by(config.batch_size.min(usize::MAX as u64) as usize)
        .map(|start| (start, (start + config.batch_size).min(config.n_paths)))
        .collect();
    let parts = batches
        .into_par_iter()
        .map(|(start, end)| {
            let records = (start..end)
                .map(|i| {
                    let run = simulate_killed_run(model, config, i)?;
                    PathRecord::from_run(&run, probes).map_err(|e| Error::Simulation {
                        path: i,
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EmpiricalSummary::new(probes.clone(), records))
        })
        .collect::<Result<Vec<_>>>()?;
    parts
        .into_iter()
        .try_fold(EmpiricalSummary::new(probes.clone(), Vec::new()), EmpiricalSummary::merge)
}

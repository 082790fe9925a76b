//! Per-epoch evaluation, the network energy ledger and CSV/JSON emission.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{EhflError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub macro_f1: f64,
    /// Mean version age over all clients after this epoch's age update.
    pub mean_vaoi: f64,
    /// Units consumed network-wide since the first slot.
    pub cum_energy: u64,
    /// Trainings launched since the first slot.
    pub trainings_started: u64,
    /// Uploads since the first slot.
    pub transmissions: u64,
    /// Clients with `q_i(t) = 1` this epoch.
    pub participants: usize,
}

/// Unweighted mean of per-class F1 over all `classes`. A class with no true
/// positives scores 0, including classes absent from both inputs.
pub fn macro_f1(predictions: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(EhflError::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if classes == 0 {
        return Err(EhflError::Shape("zero classes".into()));
    }
    let mut tp = vec![0u64; classes];
    let mut fp = vec![0u64; classes];
    let mut fneg = vec![0u64; classes];
    for (&p, &y) in predictions.iter().zip(truth) {
        if p >= classes || y >= classes {
            return Err(EhflError::Shape(format!("class id outside [0, {classes})")));
        }
        if p == y {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[y] += 1;
        }
    }
    let sum: f64 = (0..classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fneg[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(sum / classes as f64)
}

/// A granted energy-consuming action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyEvent {
    TrainStart { kappa: u32 },
    Transmit,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub cum_energy: u64,
    pub trainings: u64,
    pub transmissions: u64,
}

impl EnergyLedger {
    pub fn record(&mut self, event: EnergyEvent) {
        match event {
            EnergyEvent::TrainStart { kappa } => {
                self.cum_energy += kappa as u64;
                self.trainings += 1;
            }
            EnergyEvent::Transmit => {
                self.cum_energy += 1;
                self.transmissions += 1;
            }
        }
    }
}

/// Divides every value by the group maximum.
pub fn normalize_energy(values: &[f64]) -> Result<Vec<f64>> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if values.is_empty() || max <= 0.0 {
        return Err(EhflError::AllZeroGroup);
    }
    Ok(values.iter().map(|v| v / max).collect())
}

pub const CSV_HEADER: &str =
    "run_id,policy,seed,alpha,p_bc,epoch,macro_f1,mean_vaoi,cum_energy,trainings_started,transmissions,participants";

/// Identity columns shared by every row of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLabel {
    pub run_id: String,
    pub policy: String,
    pub seed: u64,
    pub alpha: f64,
    pub p_bc: f64,
}

pub fn csv_row(label: &RunLabel, m: &EpochMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{:.6},{:.6},{},{},{},{}",
        label.run_id,
        label.policy,
        label.seed,
        label.alpha,
        label.p_bc,
        m.epoch,
        m.macro_f1,
        m.mean_vaoi,
        m.cum_energy,
        m.trainings_started,
        m.transmissions,
        m.participants
    )
}

pub fn write_csv<W: Write>(mut w: W, runs: &[(&RunLabel, &[EpochMetrics])]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for (label, series) in runs {
        for m in series.iter() {
            writeln!(w, "{}", csv_row(label, m))?;
        }
    }
    Ok(())
}

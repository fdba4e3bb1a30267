//! Forgetting-oriented evaluation: recovery intervals, inter-peak forgetting
//! rate, consistency, backward-transfer forgetting, balance, and worst-client
//! accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::RoundRecord;

/// Ordered per-round accuracies. Values are expected in [0, 1] but only
/// non-emptiness and finiteness are enforced; the metrics themselves are
/// scale-free.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTrajectory {
    values: Vec<f64>,
}

impl AccuracyTrajectory {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("empty trajectory".to_string()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite trajectory value {bad}")));
        }
        Ok(AccuracyTrajectory { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One span from a record-high peak to the first round that returns to (or
/// above) it, with at least one round in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryInterval {
    pub peak_index: usize,
    pub recovery_index: usize,
    pub peak_value: f64,
}

/// Sequential scan for qualifying recovery intervals.
///
/// A new peak is declared whenever a value strictly exceeds the running
/// maximum (the first point is the initial peak); the open interval closes at
/// the first later round whose value reaches the peak again. Intervals that
/// close immediately (no intermediate round) and an interval still open at
/// the end of the trajectory are discarded.
pub fn find_recovery_intervals(traj: &AccuracyTrajectory) -> Vec<RecoveryInterval> {
    let values = traj.values();
    let mut intervals = Vec::new();
    let mut running_max = values[0];
    let mut open_peak: Option<usize> = Some(0);
    for (t, &v) in values.iter().enumerate().skip(1) {
        if let Some(peak) = open_peak {
            if v >= values[peak] {
                if t > peak + 1 {
                    intervals.push(RecoveryInterval {
                        peak_index: peak,
                        recovery_index: t,
                        peak_value: values[peak],
                    });
                }
                open_peak = None;
            }
        }
        if v > running_max {
            running_max = v;
            open_peak = Some(t);
        }
    }
    intervals
}

/// Inter-peak forgetting rate of one interval: the mean relative deviation
/// from the peak, summed over every round from peak to recovery inclusive and
/// divided by the interval length.
pub fn ipfr(traj: &AccuracyTrajectory, interval: &RecoveryInterval) -> Result<f64> {
    let values = traj.values();
    let (i, j) = (interval.peak_index, interval.recovery_index);
    if j <= i || j >= values.len() {
        return Err(Error::validation(format!("invalid interval [{i}, {j}]")));
    }
    let peak = values[i];
    if peak == 0.0 {
        return Err(Error::validation("undefined peak: peak accuracy is zero".to_string()));
    }
    let sum: f64 = values[i..=j].iter().map(|&a| (peak - a).abs() / peak).sum();
    Ok(sum / (j - i) as f64)
}

/// Average IPFR over all qualifying intervals and the derived consistency
/// `1 − AIPFR`. A trajectory with no qualifying interval counts as perfectly
/// consistent: `(0, 1)`.
pub fn consistency(traj: &AccuracyTrajectory) -> Result<(f64, f64)> {
    let intervals = find_recovery_intervals(traj);
    if intervals.is_empty() {
        return Ok((0.0, 1.0));
    }
    let mut sum = 0.0;
    for interval in &intervals {
        sum += ipfr(traj, interval)?;
    }
    let aipfr = sum / intervals.len() as f64;
    Ok((aipfr, 1.0 - aipfr))
}

/// Backward-transfer forgetting. `history` maps each previously sampled
/// client to its `(round, global-on-client accuracy)` observations from the
/// rounds it was sampled in (all before the final round); `final_acc` maps
/// those clients to the final global model's accuracy on their test split.
/// Only each client's most recent sampled round contributes.
pub fn bwt_forgetting(
    history: &BTreeMap<usize, Vec<(usize, f64)>>,
    final_acc: &BTreeMap<usize, f64>,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::validation("no previously sampled clients".to_string()));
    }
    let mut sum = 0.0;
    for (&client, observations) in history {
        let &(_, at_last_sampled) = observations
            .iter()
            .max_by_key(|&&(round, _)| round)
            .ok_or_else(|| Error::validation(format!("client {client} has no observations")))?;
        let &final_value = final_acc.get(&client).ok_or_else(|| {
            Error::validation(format!("no final accuracy for client {client}"))
        })?;
        sum += final_value - at_last_sampled;
    }
    Ok(sum / history.len() as f64)
}

/// Mean of the average global and average local accuracies.
pub fn balance(global_acc_mean: f64, local_acc_mean: f64) -> f64 {
    (global_acc_mean + local_acc_mean) / 2.0
}

/// Minimum final local accuracy across clients.
pub fn worst_client_accuracy(local_accuracies: &[f64]) -> Result<f64> {
    if local_accuracies.is_empty() {
        return Err(Error::validation("no clients".to_string()));
    }
    Ok(local_accuracies.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Per-run scalar summary; the columns of the side-by-side report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForgettingSummary {
    /// Final-round global test accuracy.
    pub global_accuracy: f64,
    /// Backward-transfer forgetting; `None` when no client was sampled
    /// before the final round.
    pub bwt_forgetting: Option<f64>,
    /// AIPFR of the global accuracy trajectory.
    pub aipfr: f64,
    /// Consistency (1 − AIPFR) of the global accuracy trajectory.
    pub consistency: f64,
    /// Qualifying recovery intervals in the global trajectory.
    pub interval_count: usize,
    /// Final-round mean of per-client personalized accuracies.
    pub local_accuracy: f64,
    /// Minimum final per-client personalized accuracy.
    pub worst_client_accuracy: f64,
    /// AIPFR of the per-round mean-local-accuracy trajectory.
    pub local_aipfr: f64,
    /// Consistency of the per-round mean-local-accuracy trajectory.
    pub local_consistency: f64,
    pub local_interval_count: usize,
    /// `(global_accuracy + local_accuracy) / 2`.
    pub balance: f64,
}

/// Build the summary for a finished run.
pub fn summarize(records: &[RoundRecord]) -> Result<ForgettingSummary> {
    if records.is_empty() {
        return Err(Error::validation("no rounds recorded".to_string()));
    }
    let global_traj =
        AccuracyTrajectory::new(records.iter().map(|r| r.global_test_accuracy).collect())?;
    let local_traj =
        AccuracyTrajectory::new(records.iter().map(RoundRecord::mean_local_accuracy).collect())?;
    let (aipfr, global_consistency) = consistency(&global_traj)?;
    let (local_aipfr, local_consistency) = consistency(&local_traj)?;

    let last = records.last().unwrap();
    let global_accuracy = last.global_test_accuracy;
    let local_accuracy = last.mean_local_accuracy();
    let worst = worst_client_accuracy(&last.local_test_accuracy)?;

    let mut history: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for record in &records[..records.len() - 1] {
        for &k in &record.sampled {
            history
                .entry(k)
                .or_default()
                .push((record.round, record.local_test_accuracy[k]));
        }
    }
    let bwt = if history.is_empty() {
        None
    } else {
        let final_acc: BTreeMap<usize, f64> = history
            .keys()
            .map(|&k| (k, last.local_test_accuracy[k]))
            .collect();
        Some(bwt_forgetting(&history, &final_acc)?)
    };

    Ok(ForgettingSummary {
        global_accuracy,
        bwt_forgetting: bwt,
        aipfr,
        consistency: global_consistency,
        interval_count: find_recovery_intervals(&global_traj).len(),
        local_accuracy,
        worst_client_accuracy: worst,
        local_aipfr,
        local_consistency,
        local_interval_count: find_recovery_intervals(&local_traj).len(),
        balance: balance(global_accuracy, local_accuracy),
    })
}

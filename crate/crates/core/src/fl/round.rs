//! Round orchestration: sample → broadcast → local training → aggregation →
//! evaluation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ClientDataset, Dataset};
use crate::error::{Error, Result};
use crate::nn::{MlpSpec, ModelParams};
use crate::rng::{stream, StreamId};

use super::local::{local_train, TrainSettings};
use super::sampling::sample_clients;
use super::strategy::{
    aggregate, client_score, fedavg_weights, fedkper_weights, fedkper_weights_strict,
    AggregationWeights, ClientUpdate, Strategy,
};

/// Everything recorded about one communication round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index `t`.
    pub round: usize,
    /// Sampled client ids, ascending.
    pub sampled: Vec<usize>,
    /// Per-sampled-client reliability (train accuracy after local training).
    pub train_accuracies: Vec<f64>,
    pub weights: AggregationWeights,
    /// Post-aggregation global model accuracy on the held-out global test set.
    pub global_test_accuracy: f64,
    /// Accuracy of the post-aggregation global model on every client's local
    /// test split. For a sampled client this is the round's global-on-client
    /// accuracy that the backward-transfer metric tracks.
    pub local_test_accuracy: Vec<f64>,
    /// Wall-clock seconds spent in the round (never part of deterministic
    /// outputs).
    pub duration_secs: f64,
}

impl RoundRecord {
    pub fn mean_local_accuracy(&self) -> f64 {
        self.local_test_accuracy.iter().sum::<f64>() / self.local_test_accuracy.len() as f64
    }
}

/// A fully resolved experiment: data, model, and protocol knobs.
pub struct Experiment {
    pub mlp: MlpSpec,
    pub strategy: Strategy,
    pub clients: Vec<ClientDataset>,
    pub global_test: Dataset,
    pub rounds: usize,
    pub sample_fraction: f64,
    pub settings: TrainSettings,
    pub seed: u64,
    /// Train sampled clients on the rayon pool. Never changes any number.
    pub parallel: bool,
    /// Compute adaptive aggregation weights from on-device scores only.
    pub strict_transmission: bool,
}

/// Mutable orchestrator state across rounds.
pub struct FlState {
    pub global: ModelParams,
}

impl FlState {
    pub fn init(experiment: &Experiment) -> FlState {
        FlState { global: experiment.mlp.init_params(experiment.seed) }
    }
}

/// Streaming consumer of finished rounds; lets the harness flush partial logs
/// before a failure.
pub trait RoundSink {
    fn record(&mut self, record: &RoundRecord) -> Result<()>;
}

/// No-op sink.
pub struct DiscardSink;

impl RoundSink for DiscardSink {
    fn record(&mut self, _record: &RoundRecord) -> Result<()> {
        Ok(())
    }
}

fn evaluate_on_clients(
    mlp: &MlpSpec,
    params: &ModelParams,
    clients: &[ClientDataset],
    parallel: bool,
) -> Result<Vec<f64>> {
    let eval = |c: &ClientDataset| -> Result<f64> {
        let (features, labels) = c.test.full_batch();
        mlp.accuracy(params, &features, &labels)
    };
    if parallel {
        clients.par_iter().map(eval).collect()
    } else {
        clients.iter().map(eval).collect()
    }
}

/// Run round `t` (1-based): sample clients, train them from the broadcast
/// snapshot, weight and aggregate their updates into the new global model,
/// then evaluate the global and personalized models.
pub fn run_round(state: &mut FlState, experiment: &Experiment, t: usize) -> Result<RoundRecord> {
    let start = Instant::now();
    let sampled = sample_clients(
        experiment.clients.len(),
        experiment.sample_fraction,
        t as u64,
        experiment.seed,
    )?;

    // Immutable broadcast snapshot; every client trains from the same copy.
    let snapshot = state.global.clone();
    let train_one = |&k: &usize| -> Result<ClientUpdate> {
        let mut rng = stream(experiment.seed, StreamId::LocalTraining, t as u64, k as u64);
        local_train(
            experiment.strategy,
            &experiment.mlp,
            &snapshot,
            &experiment.clients[k],
            &experiment.settings,
            &mut rng,
        )
        .map_err(|e| Error::numeric(format!("round {t}: {e}")))
    };
    // Updates come back keyed by client id; ordering below is id-ascending
    // regardless of completion order.
    let mut updates: Vec<ClientUpdate> = if experiment.parallel {
        sampled.par_iter().map(train_one).collect::<Result<_>>()?
    } else {
        sampled.iter().map(train_one).collect::<Result<_>>()?
    };
    updates.sort_by_key(|u| u.client_id);

    let class_count = experiment.mlp.class_count();
    let weights = match experiment.strategy {
        Strategy::FedAvg | Strategy::FedProx { .. } => fedavg_weights(&updates, class_count)?,
        Strategy::FedKPer => {
            if experiment.strict_transmission {
                let scores: Vec<(usize, f64)> = updates
                    .iter()
                    .map(|u| Ok((u.client_id, client_score(u, class_count)?)))
                    .collect::<Result<_>>()?;
                fedkper_weights_strict(&scores)?
            } else {
                fedkper_weights(&updates, class_count)?
            }
        }
    };
    state.global = aggregate(&updates, &weights)?;

    let (global_features, global_labels) = experiment.global_test.full_batch();
    let global_test_accuracy =
        experiment.mlp.accuracy(&state.global, &global_features, &global_labels)?;
    let local_test_accuracy = evaluate_on_clients(
        &experiment.mlp,
        &state.global,
        &experiment.clients,
        experiment.parallel,
    )?;

    Ok(RoundRecord {
        round: t,
        sampled: sampled.clone(),
        train_accuracies: updates.iter().map(|u| u.train_accuracy).collect(),
        weights,
        global_test_accuracy,
        local_test_accuracy,
        duration_secs: start.elapsed().as_secs_f64(),
    })
}

/// Run the full horizon, streaming each finished round into `sink`.
pub fn run_experiment(experiment: &Experiment, sink: &mut dyn RoundSink) -> Result<Vec<RoundRecord>> {
    if experiment.rounds == 0 {
        return Err(Error::config(Some("rounds"), "must run at least one round".to_string()));
    }
    let mut state = FlState::init(experiment);
    let mut records = Vec::with_capacity(experiment.rounds);
    for t in 1..=experiment.rounds {
        let record = run_round(&mut state, experiment, t)?;
        sink.record(&record)?;
        records.push(record);
    }
    Ok(records)
}

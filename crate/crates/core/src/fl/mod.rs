//! Federated round orchestration: client sampling, local training under a
//! pluggable strategy, and weighted aggregation.

mod local;
mod round;
mod sampling;
mod strategy;

pub use local::{local_train, TrainSettings};
pub use round::{
    run_experiment, run_round, DiscardSink, Experiment, FlState, RoundRecord, RoundSink,
};
pub use sampling::sample_clients;
pub use strategy::{
    aggregate, client_score, diversity_score, fedavg_weights, fedkper_weights,
    fedkper_weights_strict, AggregationWeights, ClientUpdate, Strategy, WeightEntry, EPSILON,
};

//! Client-side local training.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::nn::{ce_objective, fedkper_loss, fedprox_objective, sgd_step, MlpSpec, ModelParams};

use super::strategy::{ClientUpdate, Strategy};

/// Local optimizer knobs shared by every strategy.
#[derive(Debug, Clone, Copy)]
pub struct TrainSettings {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub lambda_cap: f64,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || self.batch_size == 0 || self.max_grad_norm <= 0.0 || self.lambda_cap <= 0.0
        {
            return Err(Error::config(
                None,
                format!(
                    "train settings out of range: lr {}, batch_size {}, max_grad_norm {}, lambda_cap {}",
                    self.lr, self.batch_size, self.max_grad_norm, self.lambda_cap
                ),
            ));
        }
        Ok(())
    }
}

/// Run `epochs` of mini-batch SGD from the broadcast `global_params` under the
/// given strategy and report the update. The final `train_accuracy` is the
/// trained model's accuracy on the client's train split (with zero epochs this
/// is the global model's accuracy).
pub fn local_train(
    strategy: Strategy,
    mlp: &MlpSpec,
    global_params: &ModelParams,
    client: &ClientDataset,
    settings: &TrainSettings,
    rng: &mut ChaCha8Rng,
) -> Result<ClientUpdate> {
    strategy.validate()?;
    settings.validate()?;
    if client.train.is_empty() {
        return Err(Error::validation(format!("client {} has no training data", client.client_id)));
    }

    let mut params = global_params.clone();
    let mut indices: Vec<usize> = (0..client.train.len()).collect();
    for epoch in 0..settings.epochs {
        indices.shuffle(rng);
        for batch_indices in indices.chunks(settings.batch_size) {
            let (features, labels) = client.train.batch(batch_indices);
            let breakdown = match strategy {
                Strategy::FedAvg => ce_objective(mlp, &params, &features, &labels)?,
                Strategy::FedProx { mu } => {
                    fedprox_objective(mlp, &params, global_params, &features, &labels, mu)?
                }
                Strategy::FedKPer => fedkper_loss(
                    mlp,
                    &params,
                    global_params,
                    &features,
                    &labels,
                    settings.lambda_cap,
                )?,
            };
            if !breakdown.total.is_finite() {
                return Err(Error::numeric(format!(
                    "client {} epoch {epoch}: loss diverged ({})",
                    client.client_id, breakdown.total
                )));
            }
            if strategy == Strategy::FedKPer {
                log::debug!(
                    "client {} epoch {epoch}: lambda={:.6} ce={:.6} kd={:.6}",
                    client.client_id,
                    breakdown.lambda,
                    breakdown.ce,
                    breakdown.kd
                );
            }
            params = sgd_step(&params, &breakdown.grad, settings.lr, settings.max_grad_norm)
                .map_err(|e| {
                    Error::numeric(format!("client {} epoch {epoch}: {e}", client.client_id))
                })?;
        }
    }

    let (features, labels) = client.train.full_batch();
    let train_accuracy = mlp.accuracy(&params, &features, &labels)?;
    Ok(ClientUpdate {
        client_id: client.client_id,
        params,
        train_accuracy,
        histogram: client.histogram.clone(),
        size: client.size,
    })
}

//! Aggregation strategies and the client→server update payload.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelParams;

/// Numerical floor used by the diversity/score formulas.
pub const EPSILON: f64 = 1e-12;

/// How local objectives and aggregation weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    /// Size-weighted averaging of plain-CE local models.
    FedAvg,
    /// FedAvg plus a proximal pull `(mu/2)·‖w − w_global‖²` in local training.
    FedProx { mu: f64 },
    /// Adaptive-distillation local training plus reliability×diversity
    /// aggregation weights.
    FedKPer,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::FedAvg => "fedavg",
            Strategy::FedProx { .. } => "fedprox",
            Strategy::FedKPer => "fedkper",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Strategy::FedProx { mu } = self {
            if !(mu.is_finite() && *mu >= 0.0) {
                return Err(Error::config(Some("mu"), format!("proximal mu {mu} must be >= 0")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fedavg" => Ok(Strategy::FedAvg),
            "fedprox" => Ok(Strategy::FedProx { mu: 0.01 }),
            "fedkper" => Ok(Strategy::FedKPer),
            other => Err(Error::config(
                Some("strategy"),
                format!("unknown strategy {other:?} (expected fedavg, fedprox, or fedkper)"),
            )),
        }
    }
}

/// Everything a client transmits after local training. Model parameters and
/// label *statistics* only — raw features and labels never leave the client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ModelParams,
    /// Post-training accuracy of the local model on the client's train split.
    pub train_accuracy: f64,
    /// Train-split label histogram; sums to `size`.
    pub histogram: Vec<u64>,
    /// Train-split sample count `n_k`.
    pub size: usize,
}

/// Per-client aggregation bookkeeping for one round, ascending client id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregationWeights {
    pub entries: Vec<WeightEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightEntry {
    pub client_id: usize,
    /// Normalized-entropy diversity of the client's train labels.
    pub diversity: f64,
    /// Unnormalized score feeding the weights (reliability×diversity for the
    /// adaptive strategy, `n_k` for size weighting).
    pub score: f64,
    /// Normalized aggregation weight; the entries sum to 1.
    pub weight: f64,
}

impl AggregationWeights {
    pub fn weight_for(&self, client_id: usize) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.client_id == client_id)
            .map(|e| e.weight)
    }
}

/// Normalized-entropy diversity of a label histogram:
/// `[-Σ_c π_c·ln(π_c + ε)] / (ln C + ε)` with `π_c = m_c/(M + ε)`, floored at
/// zero (the ε inside the log can push an all-one-class histogram a few
/// 1e-13 below it).
pub fn diversity_score(histogram: &[u64], class_count: usize) -> Result<f64> {
    if class_count < 2 {
        return Err(Error::validation(format!("class_count {class_count} must be >= 2")));
    }
    if histogram.len() != class_count {
        return Err(Error::dimension(format!(
            "histogram has {} bins for {class_count} classes",
            histogram.len()
        )));
    }
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::validation("all-zero histogram".to_string()));
    }
    let m = total as f64;
    let mut entropy = 0.0;
    for &count in histogram {
        let pi = count as f64 / (m + EPSILON);
        entropy -= pi * (pi + EPSILON).ln();
    }
    Ok((entropy / ((class_count as f64).ln() + EPSILON)).max(0.0))
}

/// The on-device unnormalized aggregation score: `A_k · (ε + d_k)`.
pub fn client_score(update: &ClientUpdate, class_count: usize) -> Result<f64> {
    let d = diversity_score(&update.histogram, class_count)?;
    Ok(update.train_accuracy * (EPSILON + d))
}

/// Reliability×diversity weights: normalize `A_k·(ε + d_k)` over the sampled
/// clients. If every score is zero (all accuracies zero) the weights fall
/// back to uniform.
pub fn fedkper_weights(updates: &[ClientUpdate], class_count: usize) -> Result<AggregationWeights> {
    let scored: Vec<(usize, f64, f64)> = {
        let mut v = Vec::with_capacity(updates.len());
        for u in updates {
            let d = diversity_score(&u.histogram, class_count)?;
            v.push((u.client_id, d, u.train_accuracy * (EPSILON + d)));
        }
        v
    };
    weights_from_scores(scored)
}

/// Strict-transmission variant: consumes only `(client_id, p̄_k)` pairs, the
/// single scalar each client would send alongside its parameters. Diversity
/// is not known server-side on this path and is reported as NaN.
pub fn fedkper_weights_strict(scores: &[(usize, f64)]) -> Result<AggregationWeights> {
    weights_from_scores(scores.iter().map(|&(id, s)| (id, f64::NAN, s)).collect())
}

fn weights_from_scores(mut scored: Vec<(usize, f64, f64)>) -> Result<AggregationWeights> {
    if scored.is_empty() {
        return Err(Error::validation("no client updates".to_string()));
    }
    for &(id, _, s) in &scored {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::numeric(format!("client {id} has invalid score {s}")));
        }
    }
    scored.sort_by_key(|&(id, _, _)| id);
    let total: f64 = scored.iter().map(|&(_, _, s)| s).sum();
    let uniform = total <= 0.0;
    if uniform {
        log::warn!("all aggregation scores are zero; falling back to uniform weights");
    }
    let n = scored.len() as f64;
    let entries = scored
        .into_iter()
        .map(|(client_id, diversity, score)| WeightEntry {
            client_id,
            diversity,
            score,
            weight: if uniform { 1.0 / n } else { score / total },
        })
        .collect();
    Ok(AggregationWeights { entries })
}

/// Size-proportional weights `n_k / Σ n_j` (the classical baseline
/// aggregation). Diversity is still computed for the round log.
pub fn fedavg_weights(updates: &[ClientUpdate], class_count: usize) -> Result<AggregationWeights> {
    if updates.is_empty() {
        return Err(Error::validation("no client updates".to_string()));
    }
    let mut scored = Vec::with_capacity(updates.len());
    for u in updates {
        let d = diversity_score(&u.histogram, class_count)?;
        scored.push((u.client_id, d, u.size as f64));
    }
    weights_from_scores(scored)
}

/// Convex combination of client parameters under the given weights, summed in
/// ascending client-id order so the reduction is bit-reproducible.
pub fn aggregate(updates: &[ClientUpdate], weights: &AggregationWeights) -> Result<ModelParams> {
    if updates.is_empty() {
        return Err(Error::validation("no client updates".to_string()));
    }
    let mut order: Vec<&ClientUpdate> = updates.iter().collect();
    order.sort_by_key(|u| u.client_id);
    let manifest = order[0].params.manifest().clone();
    let mut acc = vec![0.0f64; order[0].params.len()];
    for u in &order {
        if u.params.manifest() != &manifest {
            return Err(Error::dimension(format!(
                "client {} parameters have a different manifest",
                u.client_id
            )));
        }
        let w = weights.weight_for(u.client_id).ok_or_else(|| {
            Error::validation(format!("no aggregation weight for client {}", u.client_id))
        })?;
        for (a, &v) in acc.iter_mut().zip(u.params.values()) {
            *a += w * v;
        }
    }
    ModelParams::new(manifest, acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Manifest, LayerShape};

    fn update(id: usize, acc: f64, histogram: Vec<u64>, values: Vec<f64>) -> ClientUpdate {
        let manifest = Manifest::new(vec![LayerShape::new("w", vec![values.len()])]);
        let size = histogram.iter().sum::<u64>() as usize;
        ClientUpdate {
            client_id: id,
            params: ModelParams::new(manifest, values).unwrap(),
            train_accuracy: acc,
            histogram,
            size,
        }
    }

    #[test]
    fn uniform_histogram_has_diversity_one() {
        let d = diversity_score(&[5, 5, 5, 5], 4).unwrap();
        assert!((d - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn single_class_has_near_zero_diversity() {
        let d = diversity_score(&[12, 0, 0], 3).unwrap();
        assert!((0.0..1e-6).contains(&d), "{d}");
    }

    #[test]
    fn half_uniform_histogram_scores_half() {
        // pi = (0.5, 0.5, 0, 0): entropy ln 2, normalizer ln 4
        let d = diversity_score(&[2, 2, 0, 0], 4).unwrap();
        assert!((d - 0.5).abs() < 1e-9, "{d}");
    }

    #[test]
    fn all_zero_histogram_is_rejected() {
        assert!(diversity_score(&[0, 0], 2).is_err());
    }

    #[test]
    fn hand_worked_weights_example() {
        // (A=0.8, d=0.5) and (A=0.4, d=1.0): both score 0.4 -> equal weights.
        let a = update(0, 0.8, vec![2, 2, 0, 0], vec![0.0]);
        let b = update(1, 0.4, vec![1, 1, 1, 1], vec![0.0]);
        let w = fedkper_weights(&[a, b], 4).unwrap();
        assert!((w.entries[0].weight - 0.5).abs() < 1e-12);
        assert!((w.entries[1].weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_client_gets_weight_one() {
        let a = update(3, 0.7, vec![4, 1], vec![0.0]);
        let w = fedkper_weights(&[a], 2).unwrap();
        assert_eq!(w.entries[0].weight, 1.0);
    }

    #[test]
    fn size_plays_no_role_in_adaptive_weights() {
        // identical histogram shapes and accuracies, wildly different n_k
        let a = update(0, 0.5, vec![30, 30], vec![0.0]);
        let b = update(1, 0.5, vec![1, 1], vec![0.0]);
        let w = fedkper_weights(&[a.clone(), b.clone()], 2).unwrap();
        assert!((w.entries[0].weight - 0.5).abs() < 1e-12);
        // while the size-weighted baseline is 60/4 vs 2/4
        let f = fedavg_weights(&[a, b], 2).unwrap();
        assert!((f.entries[0].weight - 60.0 / 62.0).abs() < 1e-12);
    }

    #[test]
    fn zero_accuracies_fall_back_to_uniform() {
        let a = update(0, 0.0, vec![3, 1], vec![0.0]);
        let b = update(1, 0.0, vec![1, 3], vec![0.0]);
        let c = update(2, 0.0, vec![2, 2], vec![0.0]);
        let w = fedkper_weights(&[a, b, c], 2).unwrap();
        for e in &w.entries {
            assert!((e.weight - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn strict_scores_reproduce_full_weights() {
        let a = update(0, 0.9, vec![5, 3, 2, 0], vec![0.0]);
        let b = update(1, 0.3, vec![0, 0, 9, 9], vec![0.0]);
        let full = fedkper_weights(&[a.clone(), b.clone()], 4).unwrap();
        let strict = fedkper_weights_strict(&[
            (0, client_score(&a, 4).unwrap()),
            (1, client_score(&b, 4).unwrap()),
        ])
        .unwrap();
        for (x, y) in full.entries.iter().zip(&strict.entries) {
            assert_eq!(x.weight.to_bits(), y.weight.to_bits());
        }
    }

    #[test]
    fn weight_ordering_follows_accuracy_and_diversity() {
        let base_hist = vec![2, 2, 0, 0];
        let lo = update(0, 0.4, base_hist.clone(), vec![0.0]);
        let hi = update(1, 0.6, base_hist, vec![0.0]);
        let w = fedkper_weights(&[lo, hi], 4).unwrap();
        assert!(w.entries[1].weight > w.entries[0].weight);

        let narrow = update(0, 0.5, vec![4, 0, 0, 0], vec![0.0]);
        let wide = update(1, 0.5, vec![1, 1, 1, 1], vec![0.0]);
        let w2 = fedkper_weights(&[narrow, wide], 4).unwrap();
        assert!(w2.entries[1].weight > w2.entries[0].weight);
    }

    #[test]
    fn fedavg_weight_is_size_proportional() {
        let a = update(0, 0.5, vec![20, 10], vec![0.0]);
        let b = update(1, 0.5, vec![5, 5], vec![0.0]);
        let w = fedavg_weights(&[a, b], 2).unwrap();
        assert!((w.entries[0].weight - 0.75).abs() < 1e-12);
    }

    #[test]
    fn aggregate_identity_and_selection() {
        let a = update(0, 1.0, vec![1, 1], vec![1.0, 2.0, 3.0]);
        let b = update(1, 1.0, vec![1, 1], vec![1.0, 2.0, 3.0]);
        let w = fedkper_weights(&[a.clone(), b.clone()], 2).unwrap();
        let merged = aggregate(&[a.clone(), b.clone()], &w).unwrap();
        assert_eq!(merged.values(), &[1.0, 2.0, 3.0]);

        let c = update(1, 1.0, vec![1, 1], vec![-5.0, 0.0, 7.0]);
        let picked = aggregate(
            &[a.clone(), c],
            &AggregationWeights {
                entries: vec![
                    WeightEntry { client_id: 0, diversity: 1.0, score: 1.0, weight: 1.0 },
                    WeightEntry { client_id: 1, diversity: 1.0, score: 0.0, weight: 0.0 },
                ],
            },
        )
        .unwrap();
        assert_eq!(picked.values(), a.params.values());
    }

    #[test]
    fn manifest_mismatch_is_a_dimension_error() {
        let a = update(0, 1.0, vec![1, 1], vec![1.0, 2.0]);
        let b = update(1, 1.0, vec![1, 1], vec![1.0, 2.0, 3.0]);
        let w = AggregationWeights {
            entries: vec![
                WeightEntry { client_id: 0, diversity: 1.0, score: 1.0, weight: 0.5 },
                WeightEntry { client_id: 1, diversity: 1.0, score: 1.0, weight: 0.5 },
            ],
        };
        assert!(matches!(aggregate(&[a, b], &w), Err(Error::Dimension(_))));
    }
}

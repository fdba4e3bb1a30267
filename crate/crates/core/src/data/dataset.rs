//! In-memory dataset and per-client dataset types.
//!
//! Features are stored as f32 (matching the on-disk format exactly, so file
//! round trips are bit-identical) and widened to f64 when a batch matrix is
//! assembled for the model.

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// A labelled feature table: `n` rows of `dim` features with class labels in
/// `[0, class_count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<u16>,
    dim: usize,
    class_count: usize,
}

impl Dataset {
    pub fn new(features: Vec<f32>, labels: Vec<u16>, dim: usize, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("dataset must hold at least one sample".to_string()));
        }
        if dim == 0 || class_count < 2 {
            return Err(Error::validation(format!(
                "dataset needs dim >= 1 and class_count >= 2, got {dim}/{class_count}"
            )));
        }
        if class_count > u16::MAX as usize + 1 {
            return Err(Error::validation(format!("class_count {class_count} exceeds label width")));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::dimension(format!(
                "{} feature values for {} samples of dim {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite feature at value index {pos}")));
        }
        Ok(Dataset { features, labels, dim, class_count })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Label counts per class, length `class_count`.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.class_count];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    /// New dataset holding `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::validation("empty subset".to_string()));
        }
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::validation(format!("subset index {i} out of range")));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(features, labels, self.dim, self.class_count)
    }

    /// f64 feature matrix plus labels for `indices`, ready for the model.
    pub fn batch(&self, indices: &[usize]) -> (Matrix, Vec<u16>) {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend(self.row(i).iter().map(|&v| v as f64));
            labels.push(self.labels[i]);
        }
        let m = Matrix::from_vec(indices.len(), self.dim, data).expect("sized by construction");
        (m, labels)
    }

    /// The whole dataset as one batch.
    pub fn full_batch(&self) -> (Matrix, Vec<u16>) {
        let data: Vec<f64> = self.features.iter().map(|&v| v as f64).collect();
        let m = Matrix::from_vec(self.len(), self.dim, data).expect("sized by construction");
        (m, self.labels.clone())
    }
}

/// One client's slice of the world: a train/test split plus the label
/// statistics that participate in aggregation.
#[derive(Debug, Clone)]
pub struct ClientDataset {
    pub client_id: usize,
    pub train: Dataset,
    pub test: Dataset,
    /// Label histogram of the train split only; test labels stay in evaluation.
    pub histogram: Vec<u64>,
    /// Train-split size (the `n_k` used by size-proportional aggregation).
    pub size: usize,
}

impl ClientDataset {
    pub fn new(client_id: usize, train: Dataset, test: Dataset) -> Self {
        let histogram = train.histogram();
        let size = train.len();
        ClientDataset { client_id, train, test, histogram, size }
    }
}

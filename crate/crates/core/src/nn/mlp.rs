//! Dense ReLU classifier with a hand-written backward pass.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, StreamId};

use super::matrix::Matrix;
use super::params::{LayerShape, Manifest, ModelParams};

/// Per-example class scores, one row per input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Matrix);

impl Logits {
    pub fn new(matrix: Matrix) -> Self {
        Logits(matrix)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn class_count(&self) -> usize {
        self.0.cols()
    }
}

/// Architecture of the classifier: `widths[0]` inputs, hidden ReLU layers,
/// `widths.last()` linear outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    widths: Vec<usize>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: &[usize], class_count: usize) -> Result<Self> {
        if input_dim == 0 || class_count < 2 || hidden.contains(&0) {
            return Err(Error::validation(format!(
                "bad MLP widths: input {input_dim}, hidden {hidden:?}, classes {class_count}"
            )));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(class_count);
        Ok(MlpSpec { widths })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn class_count(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn manifest(&self) -> Manifest {
        let mut layers = Vec::with_capacity(2 * self.layer_count());
        for l in 0..self.layer_count() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            layers.push(LayerShape::new(format!("dense{l}.weight"), vec![fan_in, fan_out]));
            layers.push(LayerShape::new(format!("dense{l}.bias"), vec![fan_out]));
        }
        Manifest::new(layers)
    }

    /// Uniform Glorot weights in ±√(6/(fan_in+fan_out)), zero biases. Each
    /// layer draws from its own stream so the layout of earlier layers never
    /// shifts later ones.
    pub fn init_params(&self, seed: u64) -> ModelParams {
        let manifest = self.manifest();
        let mut values = Vec::with_capacity(manifest.value_count());
        for l in 0..self.layer_count() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut rng = stream(seed, StreamId::ModelInit, l as u64, 0);
            for _ in 0..fan_in * fan_out {
                values.push(rng.gen_range(-bound..bound));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ModelParams::new(manifest, values).expect("manifest sized for its own layers")
    }

    fn weight(&self, params: &ModelParams, layer: usize) -> Matrix {
        let (fan_in, fan_out) = (self.widths[layer], self.widths[layer + 1]);
        Matrix::from_vec(fan_in, fan_out, params.layer_values(2 * layer).to_vec())
            .expect("manifest slice matches layer shape")
    }

    fn bias<'p>(&self, params: &'p ModelParams, layer: usize) -> &'p [f64] {
        params.layer_values(2 * layer + 1)
    }

    fn check_inputs(&self, params: &ModelParams, batch: &Matrix) -> Result<()> {
        if params.manifest() != &self.manifest() {
            return Err(Error::dimension(
                "parameters do not match this architecture".to_string(),
            ));
        }
        if batch.cols() != self.input_dim() {
            return Err(Error::dimension(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, params: &ModelParams, batch: &Matrix) -> Result<Logits> {
        Ok(Logits(self.forward_cached(params, batch)?.pop().unwrap()))
    }

    /// Runs the forward pass and returns all pre-activation outputs
    /// `[z_0, ..., z_{L-1}]`; the last entry is the logits.
    fn forward_cached(&self, params: &ModelParams, batch: &Matrix) -> Result<Vec<Matrix>> {
        self.check_inputs(params, batch)?;
        let mut zs = Vec::with_capacity(self.layer_count());
        let mut activation = batch.clone();
        for l in 0..self.layer_count() {
            let mut z = activation.matmul(&self.weight(params, l))?;
            z.add_bias_row(self.bias(params, l))?;
            if l + 1 < self.layer_count() {
                activation = z.map(|x| x.max(0.0));
            }
            zs.push(z);
        }
        Ok(zs)
    }

    /// Backpropagate `d_logits` (same shape as the logits) into a full
    /// parameter gradient.
    pub fn backward(
        &self,
        params: &ModelParams,
        batch: &Matrix,
        d_logits: &Matrix,
    ) -> Result<ModelParams> {
        let zs = self.forward_cached(params, batch)?;
        let last = self.layer_count() - 1;
        if d_logits.rows() != batch.rows() || d_logits.cols() != self.class_count() {
            return Err(Error::dimension("logit gradient shape mismatch".to_string()));
        }

        let manifest = self.manifest();
        let mut grad_values = vec![0.0; manifest.value_count()];
        let mut dz = d_logits.clone();
        for l in (0..=last).rev() {
            let input = if l == 0 {
                batch.clone()
            } else {
                zs[l - 1].map(|x| x.max(0.0))
            };
            let dw = input.t_matmul(&dz)?;
            let db = dz.col_sums();
            let w_off = manifest.offset(2 * l);
            grad_values[w_off..w_off + dw.values().len()].copy_from_slice(dw.values());
            let b_off = manifest.offset(2 * l + 1);
            grad_values[b_off..b_off + db.len()].copy_from_slice(&db);

            if l > 0 {
                let da = dz.matmul_t(&self.weight(params, l))?;
                let z_prev = &zs[l - 1];
                let mut next = da;
                for (v, &z) in next.values_mut().iter_mut().zip(z_prev.values()) {
                    if z <= 0.0 {
                        *v = 0.0;
                    }
                }
                dz = next;
            }
        }
        ModelParams::new(manifest, grad_values)
    }

    /// Fraction of rows whose argmax logit equals the label. Ties resolve to
    /// the lowest class index.
    pub fn accuracy(&self, params: &ModelParams, batch: &Matrix, labels: &[u16]) -> Result<f64> {
        if labels.len() != batch.rows() {
            return Err(Error::dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                batch.rows()
            )));
        }
        if labels.is_empty() {
            return Err(Error::validation("empty evaluation batch".to_string()));
        }
        let logits = self.forward(params, batch)?;
        let mut hits = 0usize;
        for (i, &label) in labels.iter().enumerate() {
            let row = logits.matrix().row(i);
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            if best == label as usize {
                hits += 1;
            }
        }
        Ok(hits as f64 / labels.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_weights_give_zero_logits() {
        let mlp = MlpSpec::new(3, &[4], 2).unwrap();
        let params = ModelParams::zeros(mlp.manifest());
        let batch = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        let logits = mlp.forward(&params, &batch).unwrap();
        assert!(logits.matrix().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer_passes_input_through() {
        let mlp = MlpSpec::new(3, &[], 3).unwrap();
        let mut values = vec![0.0; 12];
        for i in 0..3 {
            values[i * 3 + i] = 1.0; // identity weight, zero bias
        }
        let params = ModelParams::new(mlp.manifest(), values).unwrap();
        let batch = Matrix::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let logits = mlp.forward(&params, &batch).unwrap();
        assert_eq!(logits.matrix().values(), &[1.0, 0.0, 0.0]);
    }

    /// Independent oracle: per-example scalar loops over two dense layers.
    #[test]
    fn two_layer_forward_matches_manual_oracle() {
        let mlp = MlpSpec::new(4, &[5], 3).unwrap();
        let params = mlp.init_params(99);
        let mut rng = crate::rng::stream(99, crate::rng::StreamId::SynthSamples, 7, 7);
        let batch_rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let batch = Matrix::from_rows(&batch_rows).unwrap();
        let logits = mlp.forward(&params, &batch).unwrap();

        let w0 = params.layer_values(0); // 4x5
        let b0 = params.layer_values(1);
        let w1 = params.layer_values(2); // 5x3
        let b1 = params.layer_values(3);
        for (i, row) in batch_rows.iter().enumerate() {
            let mut hidden = [0.0f64; 5];
            for (j, h) in hidden.iter_mut().enumerate() {
                let mut acc = b0[j];
                for (k, &x) in row.iter().enumerate() {
                    acc += x * w0[k * 5 + j];
                }
                *h = acc.max(0.0);
            }
            for c in 0..3 {
                let mut acc = b1[c];
                for (j, &h) in hidden.iter().enumerate() {
                    acc += h * w1[j * 3 + c];
                }
                assert!(
                    (logits.matrix().get(i, c) - acc).abs() < 1e-12,
                    "row {i} class {c}"
                );
            }
        }
    }

    #[test]
    fn init_is_reproducible_and_biases_zero() {
        let mlp = MlpSpec::new(8, &[16, 16], 4).unwrap();
        let a = mlp.init_params(3);
        let b = mlp.init_params(3);
        assert_eq!(a, b);
        assert!(a.layer_values(1).iter().all(|&v| v == 0.0));
        let bound = (6.0f64 / (8.0 + 16.0)).sqrt();
        assert!(a.layer_values(0).iter().all(|&v| v.abs() < bound));
    }

    #[test]
    fn batch_width_mismatch_errors() {
        let mlp = MlpSpec::new(3, &[4], 2).unwrap();
        let params = mlp.init_params(0);
        let batch = Matrix::zeros(2, 5);
        assert!(mlp.forward(&params, &batch).is_err());
    }
}

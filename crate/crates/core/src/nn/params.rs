//! Flat parameter vector plus the shape manifest that gives it structure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named tensor in a parameter manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub name: String,
    pub dims: Vec<usize>,
}

impl LayerShape {
    pub fn new(name: impl Into<String>, dims: Vec<usize>) -> Self {
        LayerShape { name: name.into(), dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered list of layer shapes; fixes the meaning of every offset in the
/// flat value vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    layers: Vec<LayerShape>,
}

impl Manifest {
    pub fn new(layers: Vec<LayerShape>) -> Self {
        Manifest { layers }
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn value_count(&self) -> usize {
        self.layers.iter().map(LayerShape::len).sum()
    }

    /// Offset of layer `index` into the flat vector.
    pub fn offset(&self, index: usize) -> usize {
        self.layers[..index].iter().map(LayerShape::len).sum()
    }
}

/// Immutable flat model parameters. Two values with equal manifests are
/// element-wise combinable; all arithmetic yields fresh instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    manifest: Manifest,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn new(manifest: Manifest, values: Vec<f64>) -> Result<Self> {
        if values.len() != manifest.value_count() {
            return Err(Error::dimension(format!(
                "manifest expects {} values, got {}",
                manifest.value_count(),
                values.len()
            )));
        }
        Ok(ModelParams { manifest, values })
    }

    pub fn zeros(manifest: Manifest) -> Self {
        let n = manifest.value_count();
        ModelParams {
            manifest,
            values: vec![0.0; n],
        }
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
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

    /// Slice of the flat vector holding layer `index`.
    pub fn layer_values(&self, index: usize) -> &[f64] {
        let off = self.manifest.offset(index);
        &self.values[off..off + self.manifest.layers()[index].len()]
    }

    fn check_same_manifest(&self, other: &ModelParams) -> Result<()> {
        if self.manifest != other.manifest {
            return Err(Error::dimension(
                "parameter manifests differ".to_string(),
            ));
        }
        Ok(())
    }

    /// `self + scale · other`.
    pub fn axpy(&self, scale: f64, other: &ModelParams) -> Result<ModelParams> {
        self.check_same_manifest(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(ModelParams {
            manifest: self.manifest.clone(),
            values,
        })
    }

    pub fn sub(&self, other: &ModelParams) -> Result<ModelParams> {
        self.check_same_manifest(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ModelParams {
            manifest: self.manifest.clone(),
            values,
        })
    }

    pub fn scale(&self, s: f64) -> ModelParams {
        ModelParams {
            manifest: self.manifest.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Global L2 norm over the whole flat vector.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Replace the values, keeping the manifest. Internal constructor used by
    /// the optimizer and gradient assembly.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<ModelParams> {
        ModelParams::new(self.manifest.clone(), values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest::new(vec![
            LayerShape::new("dense0.weight", vec![2, 3]),
            LayerShape::new("dense0.bias", vec![3]),
        ])
    }

    #[test]
    fn value_count_matches_shapes() {
        assert_eq!(manifest().value_count(), 9);
        assert!(ModelParams::new(manifest(), vec![0.0; 8]).is_err());
        assert!(ModelParams::new(manifest(), vec![0.0; 9]).is_ok());
    }

    #[test]
    fn axpy_requires_equal_manifests() {
        let a = ModelParams::zeros(manifest());
        let other = Manifest::new(vec![LayerShape::new("dense0.weight", vec![9])]);
        let b = ModelParams::zeros(other);
        assert!(a.axpy(1.0, &b).is_err());
    }

    #[test]
    fn norm_and_arithmetic() {
        let a = ModelParams::new(manifest(), vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
            .unwrap();
        assert_eq!(a.l2_norm(), 5.0);
        let doubled = a.axpy(1.0, &a).unwrap();
        assert_eq!(doubled.values()[0], 6.0);
        assert_eq!(a.sub(&a).unwrap().l2_norm(), 0.0);
    }

    #[test]
    fn layer_slices_respect_offsets() {
        let vals: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let p = ModelParams::new(manifest(), vals).unwrap();
        assert_eq!(p.layer_values(0), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(p.layer_values(1), &[6.0, 7.0, 8.0]);
    }
}

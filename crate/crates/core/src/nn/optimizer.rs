//! SGD step with global L2 gradient-norm clipping.

use crate::error::{Error, Result};

use super::params::ModelParams;

/// Scale `grad` down so its global L2 norm is at most `max_norm`. Returns the
/// (possibly unchanged) gradient and the pre-clip norm. The scaling is exact,
/// with no fudge term, so a gradient of norm 10 clipped to 5 lands on 5.
pub fn clip_by_global_norm(grad: &ModelParams, max_norm: f64) -> Result<(ModelParams, f64)> {
    if max_norm <= 0.0 {
        return Err(Error::validation(format!("max_norm {max_norm} must be > 0")));
    }
    if !grad.is_finite() {
        return Err(Error::numeric("non-finite gradient entries".to_string()));
    }
    let norm = grad.l2_norm();
    if norm <= max_norm {
        Ok((grad.clone(), norm))
    } else {
        Ok((grad.scale(max_norm / norm), norm))
    }
}

/// One clipped SGD update: `params − lr · clip(grad)`.
pub fn sgd_step(
    params: &ModelParams,
    grad: &ModelParams,
    lr: f64,
    max_norm: f64,
) -> Result<ModelParams> {
    if lr <= 0.0 {
        return Err(Error::validation(format!("learning rate {lr} must be > 0")));
    }
    let (clipped, _) = clip_by_global_norm(grad, max_norm)?;
    params.axpy(-lr, &clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{LayerShape, Manifest};

    fn params(values: Vec<f64>) -> ModelParams {
        let manifest = Manifest::new(vec![LayerShape::new("w", vec![values.len()])]);
        ModelParams::new(manifest, values).unwrap()
    }

    #[test]
    fn below_threshold_is_untouched() {
        let p = params(vec![1.0, 1.0]);
        let g = params(vec![0.0, 3.0]); // norm 3 < 5
        let next = sgd_step(&p, &g, 0.1, 5.0).unwrap();
        assert_eq!(next.values(), &[1.0, 0.7]);
    }

    #[test]
    fn clipped_gradient_has_exact_max_norm() {
        let p = params(vec![0.0, 0.0]);
        let g = params(vec![6.0, 8.0]); // norm 10
        let next = sgd_step(&p, &g, 1.0, 5.0).unwrap();
        // effective gradient is (3, 4): exactly norm 5
        assert_eq!(next.values(), &[-3.0, -4.0]);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let p = params(vec![0.5, -0.25, 2.0]);
        let g = params(vec![0.0, 0.0, 0.0]);
        let next = sgd_step(&p, &g, 0.01, 5.0).unwrap();
        assert_eq!(next, p);
    }

    #[test]
    fn non_finite_gradient_is_a_numeric_error() {
        let p = params(vec![0.0]);
        let g = params(vec![f64::NAN]);
        assert!(matches!(
            sgd_step(&p, &g, 0.1, 5.0),
            Err(crate::error::Error::Numeric(_))
        ));
    }
}

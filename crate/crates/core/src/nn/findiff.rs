//! Central-difference gradient oracle. Touches nothing but the loss value, so
//! it stays independent of every analytic backward pass it is used to check.

use super::params::ModelParams;

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Estimate `∇f(params)` by central differences with step `epsilon` per
/// coordinate.
pub fn finite_diff_grad<F>(f: F, params: &ModelParams, epsilon: f64) -> ModelParams
where
    F: Fn(&ModelParams) -> f64,
{
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut grad = vec![0.0; params.len()];
    let base = params.values().to_vec();
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += epsilon;
        let mut minus = base.clone();
        minus[i] -= epsilon;
        let fp = f(&params.with_values(plus).expect("same length"));
        let fm = f(&params.with_values(minus).expect("same length"));
        grad[i] = (fp - fm) / (2.0 * epsilon);
    }
    params.with_values(grad).expect("same length")
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, the relative disagreement between two gradients.
/// Zero-vs-zero counts as exact agreement.
pub fn relative_error(a: &ModelParams, b: &ModelParams) -> f64 {
    let diff: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale = a.l2_norm().max(b.l2_norm());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

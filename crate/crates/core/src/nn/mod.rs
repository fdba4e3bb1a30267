//! Differentiable MLP classifier, training losses, and the SGD optimizer.
//!
//! Everything here is a pure function of its inputs (plus explicit RNG
//! streams), computed in f64.

mod findiff;
mod loss;
mod matrix;
mod mlp;
mod optimizer;
mod params;

pub use findiff::{finite_diff_grad, relative_error, DEFAULT_EPSILON};
pub use loss::{
    adaptive_lambda, ce_loss, ce_objective, fedkper_loss, fedprox_objective, kd_loss,
    LossBreakdown,
};
pub use matrix::Matrix;
pub use mlp::{Logits, MlpSpec};
pub use optimizer::{clip_by_global_norm, sgd_step};
pub use params::{LayerShape, Manifest, ModelParams};

#[cfg(test)]
mod gradient_tests {
    //! Analytic gradients of every objective against the finite-difference
    //! oracle, on randomized instances.

    use super::*;
    use crate::rng::{stream, StreamId};
    use rand::Rng;

    fn random_instance(seed: u64) -> (MlpSpec, ModelParams, ModelParams, Matrix, Vec<u16>) {
        let mut rng = stream(seed, StreamId::SynthSamples, 31, 31);
        let input = rng.gen_range(2..6);
        let hidden = rng.gen_range(2..7);
        let classes = rng.gen_range(2..5);
        let batch = rng.gen_range(1..6);
        let mlp = MlpSpec::new(input, &[hidden], classes).unwrap();
        let student = mlp.init_params(seed.wrapping_add(1));
        let global = mlp.init_params(seed.wrapping_add(2));
        let rows: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..input).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let features = Matrix::from_rows(&rows).unwrap();
        let labels: Vec<u16> = (0..batch)
            .map(|_| rng.gen_range(0..classes) as u16)
            .collect();
        (mlp, student, global, features, labels)
    }

    #[test]
    fn fedkper_gradient_matches_finite_differences() {
        for seed in 0..5u64 {
            let (mlp, student, global, batch, labels) = random_instance(seed);
            let analytic = fedkper_loss(&mlp, &student, &global, &batch, &labels, 10.0)
                .unwrap()
                .grad;
            let numeric = finite_diff_grad(
                |p| {
                    fedkper_loss(&mlp, p, &global, &batch, &labels, 10.0)
                        .unwrap()
                        .total
                },
                &student,
                DEFAULT_EPSILON,
            );
            let err = relative_error(&analytic, &numeric);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn kd_gradient_wrt_logits_matches_finite_differences() {
        // Treat the student logits themselves as the parameter vector.
        let manifest = Manifest::new(vec![LayerShape::new("logits", vec![3, 4])]);
        let mut rng = stream(3, StreamId::SynthSamples, 77, 0);
        let teacher_rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let teacher = Logits::new(Matrix::from_rows(&teacher_rows).unwrap());
        let student_vals: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let student = ModelParams::new(manifest, student_vals).unwrap();

        let as_logits = |p: &ModelParams| {
            Logits::new(Matrix::from_vec(3, 4, p.values().to_vec()).unwrap())
        };
        let (_, analytic_mat) = kd_loss(&teacher, &as_logits(&student)).unwrap();
        let analytic = student
            .with_values(analytic_mat.values().to_vec())
            .unwrap();
        let numeric = finite_diff_grad(
            |p| kd_loss(&teacher, &as_logits(p)).unwrap().0,
            &student,
            DEFAULT_EPSILON,
        );
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "relative error {err}");
    }
}

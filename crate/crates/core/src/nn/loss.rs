//! Classification losses: softmax cross-entropy, KL-divergence distillation,
//! and the per-strategy training objectives built from them. Every objective
//! returns both its value and the full analytic parameter gradient.

use crate::error::{Error, Result};

use super::matrix::Matrix;
use super::mlp::{Logits, MlpSpec};
use super::params::ModelParams;

/// Value and gradient of one local-training objective on one batch.
///
/// `total = ce + lambda * kd + prox` holds for every strategy; FedAvg leaves
/// `kd`, `lambda`, and `prox` at zero, FedProx fills `prox`, and the adaptive
/// distillation objective fills `kd`/`lambda`.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub ce: f64,
    pub kd: f64,
    pub lambda: f64,
    pub prox: f64,
    pub total: f64,
    pub grad: ModelParams,
}

/// Row-wise log-softmax (shift by the row max for stability).
fn log_softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter() {
            sum += (v - max).exp();
        }
        let log_z = max + sum.ln();
        for v in row.iter_mut() {
            *v -= log_z;
        }
    }
    out
}

fn check_labels(labels: &[u16], rows: usize, class_count: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::dimension(format!(
            "{} labels for {rows} logit rows",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_count) {
        return Err(Error::validation(format!(
            "label {bad} out of range for {class_count} classes"
        )));
    }
    if rows == 0 {
        return Err(Error::validation("empty batch".to_string()));
    }
    Ok(())
}

/// Mean cross-entropy between softmax(logits) and integer labels, plus the
/// gradient with respect to the logits. Each gradient row sums to zero.
pub fn ce_loss(logits: &Logits, labels: &[u16]) -> Result<(f64, Matrix)> {
    let m = logits.matrix();
    check_labels(labels, m.rows(), m.cols())?;
    let log_p = log_softmax(m);
    let n = m.rows() as f64;

    let mut loss = 0.0;
    let mut grad = log_p.map(f64::exp); // softmax probabilities
    for (i, &label) in labels.iter().enumerate() {
        loss -= log_p.get(i, label as usize);
        let row = grad.row_mut(i);
        row[label as usize] -= 1.0;
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean KL divergence `KL(softmax(teacher) || softmax(student))` over rows,
/// plus the gradient with respect to the student logits. The teacher is a
/// constant.
pub fn kd_loss(teacher: &Logits, student: &Logits) -> Result<(f64, Matrix)> {
    let (t, s) = (teacher.matrix(), student.matrix());
    if t.rows() != s.rows() || t.cols() != s.cols() {
        return Err(Error::dimension(format!(
            "teacher {}x{} vs student {}x{}",
            t.rows(),
            t.cols(),
            s.rows(),
            s.cols()
        )));
    }
    if t.rows() == 0 {
        return Err(Error::validation("empty batch".to_string()));
    }
    let log_pt = log_softmax(t);
    let log_ps = log_softmax(s);
    let n = t.rows() as f64;

    let mut loss = 0.0;
    let mut grad = Matrix::zeros(s.rows(), s.cols());
    for i in 0..t.rows() {
        let lt = log_pt.row(i);
        let ls = log_ps.row(i);
        let g = grad.row_mut(i);
        for c in 0..lt.len() {
            let pt = lt[c].exp();
            loss += pt * (lt[c] - ls[c]);
            g[c] = (ls[c].exp() - pt) / n;
        }
    }
    // Exact zero when the distributions agree; tiny negatives are rounding.
    Ok((loss.max(0.0) / n, grad))
}

/// Reliability weight for the distillation term: the reciprocal of the global
/// model's cross-entropy on the current batch, capped at `cap`. A perfectly
/// confident teacher (zero CE) gets the cap.
pub fn adaptive_lambda(global_ce: f64, cap: f64) -> f64 {
    debug_assert!(global_ce >= 0.0 && cap > 0.0);
    if global_ce == 0.0 {
        return cap;
    }
    (1.0 / global_ce).min(cap)
}

/// Plain cross-entropy objective (the FedAvg local loss).
pub fn ce_objective(
    mlp: &MlpSpec,
    params: &ModelParams,
    batch: &Matrix,
    labels: &[u16],
) -> Result<LossBreakdown> {
    let logits = mlp.forward(params, batch)?;
    let (ce, d_logits) = ce_loss(&logits, labels)?;
    let grad = mlp.backward(params, batch, &d_logits)?;
    Ok(LossBreakdown {
        ce,
        kd: 0.0,
        lambda: 0.0,
        prox: 0.0,
        total: ce,
        grad,
    })
}

/// Cross-entropy plus `(mu/2)·‖w − w_global‖²`. With `mu == 0` this is the
/// plain CE path, bit for bit.
pub fn fedprox_objective(
    mlp: &MlpSpec,
    params: &ModelParams,
    global: &ModelParams,
    batch: &Matrix,
    labels: &[u16],
    mu: f64,
) -> Result<LossBreakdown> {
    if mu < 0.0 {
        return Err(Error::validation(format!("negative proximal mu {mu}")));
    }
    let mut out = ce_objective(mlp, params, batch, labels)?;
    if mu == 0.0 {
        return Ok(out);
    }
    let diff = params.sub(global)?;
    let prox = 0.5 * mu * diff.values().iter().map(|v| v * v).sum::<f64>();
    out.prox = prox;
    out.total = out.ce + prox;
    out.grad = out.grad.axpy(mu, &diff)?;
    Ok(out)
}

/// The adaptive distillation objective: `ce(student) + λ·kd(global, student)`
/// with `λ = adaptive_lambda(ce of the global model on this batch)`. The
/// global model is frozen; no gradient flows into it.
pub fn fedkper_loss(
    mlp: &MlpSpec,
    student_params: &ModelParams,
    global_params: &ModelParams,
    batch: &Matrix,
    labels: &[u16],
    lambda_cap: f64,
) -> Result<LossBreakdown> {
    if student_params.manifest() != global_params.manifest() {
        return Err(Error::dimension(
            "student and global manifests differ".to_string(),
        ));
    }
    let teacher_logits = mlp.forward(global_params, batch)?;
    let (global_ce, _) = ce_loss(&teacher_logits, labels)?;
    let lambda = adaptive_lambda(global_ce, lambda_cap);

    let student_logits = mlp.forward(student_params, batch)?;
    let (ce, d_ce) = ce_loss(&student_logits, labels)?;
    let (kd, d_kd) = kd_loss(&teacher_logits, &student_logits)?;

    let mut d_logits = d_ce;
    for (g, &k) in d_logits.values_mut().iter_mut().zip(d_kd.values()) {
        *g += lambda * k;
    }
    let grad = mlp.backward(student_params, batch, &d_logits)?;
    Ok(LossBreakdown {
        ce,
        kd,
        lambda,
        prox: 0.0,
        total: ce + lambda * kd,
        grad,
    })
}

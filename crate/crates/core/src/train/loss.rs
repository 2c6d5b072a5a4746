use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicted probabilities are clamped to at least this before the log.
pub const PROB_CLAMP: f64 = 1e-8;

/// How per-example divergences are combined over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

impl Reduction {
    pub(crate) fn scale(self, batch: usize) -> f64 {
        match self {
            Reduction::Mean => 1.0 / batch as f64,
            Reduction::Sum => 1.0,
        }
    }
}

fn check_shapes(y: ArrayView2<f64>, y_hat: ArrayView2<f64>) -> Result<()> {
    if y.dim() != y_hat.dim() {
        return Err(Error::contract(format!(
            "targets {:?} and predictions {:?} differ in shape",
            y.dim(),
            y_hat.dim()
        )));
    }
    Ok(())
}

/// Batch-summed divergence `Σ_n Σ_c y·ln(y / max(ŷ, 1e-8))`, with `0·ln 0 = 0`.
pub fn kl_divergence(y: ArrayView2<f64>, y_hat: ArrayView2<f64>) -> Result<f64> {
    check_shapes(y, y_hat)?;
    let mut total = 0.0;
    Zip::from(y).and(y_hat).for_each(|&t, &p| {
        if t > 0.0 {
            total += t * (t / p.max(PROB_CLAMP)).ln();
        }
    });
    Ok(total)
}

/// Batch-summed KL divergence plus `(lambda_reg / 2)·theta_sq_norm`.
pub fn kl_loss(y: ArrayView2<f64>, y_hat: ArrayView2<f64>, theta_sq_norm: f64, lambda_reg: f64) -> Result<f64> {
    kl_loss_reduced(y, y_hat, theta_sq_norm, lambda_reg, Reduction::Sum)
}

/// [`kl_loss`] with a choice of batch reduction for the divergence term.
pub fn kl_loss_reduced(
    y: ArrayView2<f64>,
    y_hat: ArrayView2<f64>,
    theta_sq_norm: f64,
    lambda_reg: f64,
    reduction: Reduction,
) -> Result<f64> {
    if theta_sq_norm.is_nan() || theta_sq_norm < 0.0 {
        return Err(Error::contract(format!("parameter norm {theta_sq_norm} must be non-negative")));
    }
    let kl = kl_divergence(y, y_hat)? * reduction.scale(y.nrows().max(1));
    Ok(kl + 0.5 * lambda_reg * theta_sq_norm)
}

/// Gradient of the reduced divergence with respect to the logits that
/// produced `y_hat` through a softmax: `scale·(ŷ·Σ_c y − y)` per row.
pub fn kl_logit_gradient(y: ArrayView2<f64>, y_hat: ArrayView2<f64>, reduction: Reduction) -> Result<Array2<f64>> {
    check_shapes(y, y_hat)?;
    let scale = reduction.scale(y.nrows().max(1));
    let mut g = Array2::zeros(y.dim());
    for ((mut g_row, y_row), p_row) in g.rows_mut().into_iter().zip(y.rows()).zip(y_hat.rows()) {
        let mass = y_row.sum();
        Zip::from(&mut g_row)
            .and(&y_row)
            .and(&p_row)
            .for_each(|g, &t, &p| *g = scale * (p * mass - t));
    }
    Ok(g)
}

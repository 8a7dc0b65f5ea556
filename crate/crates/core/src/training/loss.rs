use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamp applied to predictions before taking logarithms.
pub const XENT_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(1/K) Σ (p − y)²`.
    #[default]
    SquaredError,
    /// `−(1/K) Σ [y ln p + (1 − y) ln(1 − p)]` on values in `[0, 1]`.
    NormalizedCrossEntropy,
}

/// Mean-reduced loss over the `K` outputs and its gradient with respect to `pred`.
pub fn loss_and_grad(pred: &[f64], target: &[f64], kind: LossKind) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension {
            context: "loss_and_grad",
            expected: target.len(),
            actual: pred.len(),
        });
    }
    let k = pred.len() as f64;
    match kind {
        LossKind::SquaredError => {
            let mut loss = 0.0;
            let grad = pred
                .iter()
                .zip(target)
                .map(|(p, y)| {
                    let r = p - y;
                    loss += r * r;
                    2.0 * r / k
                })
                .collect();
            Ok((loss / k, grad))
        }
        LossKind::NormalizedCrossEntropy => {
            if let Some(y) = target.iter().find(|y| !(0.0..=1.0).contains(*y)) {
                return Err(Error::InvalidInput(format!("cross-entropy target {y} outside [0, 1]")));
            }
            let mut loss = 0.0;
            let grad = pred
                .iter()
                .zip(target)
                .map(|(&p, &y)| {
                    let clamped = p.clamp(XENT_CLAMP, 1.0 - XENT_CLAMP);
                    loss -= y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln();
                    if clamped != p {
                        0.0
                    } else {
                        (p - y) / (p * (1.0 - p) * k)
                    }
                })
                .collect();
            Ok((loss / k, grad))
        }
    }
}

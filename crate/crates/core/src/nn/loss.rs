use super::NnError;

/// Probabilities never drop below this inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln(p[label])` with `p` clamped at 1e-12.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64, NnError> {
    let p = probs.get(label).ok_or(NnError::Label {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Gradient of cross-entropy-after-softmax with respect to the logits:
/// `p - onehot(label)`.
pub fn softmax_cross_entropy_grad(probs: &[f64], label: usize) -> Result<Vec<f64>, NnError> {
    if label >= probs.len() {
        return Err(NnError::Label {
            label,
            classes: probs.len(),
        });
    }
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    Ok(g)
}

//! Training objectives: per-option translation NLL, the weighted
//! combination under routing weights, the diversity and uniformity terms
//! over option probabilities, the masked-token loss, and their total.
//!
//! Everything here is value-level arithmetic; the trainer mirrors these
//! formulas on the tape. Keeping an independent plain implementation gives
//! the gradient path something to be checked against.

use crate::error::{Error, Result};

pub const PI_FLOOR: f64 = 1e-8;

/// Coefficients of the auxiliary terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { beta1: 0.5, beta2: 0.2, beta3: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2), ("beta3", self.beta3)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Every term of one training step's objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub per_option_nll: Vec<f64>,
    pub lambda_: Vec<f64>,
    pub l_mt: f64,
    pub l_div: f64,
    pub l_uni: f64,
    pub l_mask: f64,
    pub total: f64,
}

/// Mean negative log-probability of the gold ids over scored positions.
/// `log_probs` holds rows of log-softmaxed logits.
pub fn nll(log_probs: &[Vec<f64>], targets: &[usize], scored: &[bool]) -> Result<f64> {
    if log_probs.len() != targets.len() || targets.len() != scored.len() {
        return Err(Error::LengthMismatch {
            what: "nll rows vs targets",
            left: log_probs.len(),
            right: targets.len().min(scored.len()),
        });
    }
    let mut acc = 0.0;
    let mut k = 0usize;
    for ((row, &t), &s) in log_probs.iter().zip(targets).zip(scored) {
        if !s {
            continue;
        }
        let lp = *row.get(t).ok_or(Error::VocabId { id: t, vocab: row.len() })?;
        acc -= lp;
        k += 1;
    }
    if k == 0 {
        return Err(Error::EmptyTarget);
    }
    Ok(acc / k as f64)
}

/// Routing-weighted translation loss: sum of lambda_i times the
/// per-option loss.
pub fn weighted_mt_loss(per_option_nll: &[f64], lambda_: &[f64]) -> Result<f64> {
    if per_option_nll.len() != lambda_.len() {
        return Err(Error::LengthMismatch {
            what: "per-option losses vs lambda",
            left: per_option_nll.len(),
            right: lambda_.len(),
        });
    }
    Ok(per_option_nll.iter().zip(lambda_).map(|(l, w)| l * w).sum())
}

/// Elementwise batch mean of the option distributions.
pub fn mean_pi(batch_pis: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = batch_pis.first().ok_or_else(|| Error::EmptyInput("empty batch".into()))?;
    let n = first.len();
    let mut mean = vec![0.0; n];
    for pi in batch_pis {
        if pi.len() != n {
            return Err(Error::LengthMismatch {
                what: "pi lengths in batch",
                left: n,
                right: pi.len(),
            });
        }
        for (m, &p) in mean.iter_mut().zip(pi) {
            *m += p;
        }
    }
    for m in &mut mean {
        *m /= batch_pis.len() as f64;
    }
    Ok(mean)
}

/// Diversity loss: KL from uniform to the batch-mean distribution,
/// with the mean clamped away from zero before the log.
pub fn diversity_loss(batch_pis: &[Vec<f64>]) -> Result<f64> {
    let mean = mean_pi(batch_pis)?;
    let n = mean.len() as f64;
    let sum_log: f64 = mean.iter().map(|&m| m.max(PI_FLOOR).ln()).sum();
    Ok(-sum_log / n - n.ln())
}

/// Uniformity loss: negated batch mean of KL from uniform to each
/// instance distribution; zero when every pi is uniform, negative
/// otherwise.
pub fn uniformity_loss(batch_pis: &[Vec<f64>]) -> Result<f64> {
    let first = batch_pis.first().ok_or_else(|| Error::EmptyInput("empty batch".into()))?;
    let n = first.len() as f64;
    let mut acc = 0.0;
    for pi in batch_pis {
        let sum_log: f64 = pi.iter().map(|&p| p.max(PI_FLOOR).ln()).sum();
        acc += sum_log / n + n.ln();
    }
    Ok(acc / batch_pis.len() as f64)
}

/// Full objective: translation loss plus the weighted auxiliary terms.
pub fn total_loss(l_mt: f64, l_div: f64, l_uni: f64, l_mask: f64, w: &LossWeights) -> f64 {
    l_mt + w.beta1 * l_div + w.beta2 * l_uni + w.beta3 * l_mask
}

/// Gradient of `beta1 * diversity_loss` with respect to each pi entry of
/// each batch element. Entries whose batch mean sits at the clamp floor
/// get zero, matching the clamped forward value.
pub fn diversity_grad(batch_pis: &[Vec<f64>], beta1: f64) -> Result<Vec<Vec<f64>>> {
    let mean = mean_pi(batch_pis)?;
    let b = batch_pis.len() as f64;
    let n = mean.len() as f64;
    let row: Vec<f64> = mean
        .iter()
        .map(|&m| if m > PI_FLOOR { -beta1 / (n * b * m) } else { 0.0 })
        .collect();
    Ok(batch_pis.iter().map(|_| row.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn nll_oracle_values() {
        // uniform over vocab 8: loss = ln 8
        let row = vec![-(8f64.ln()); 8];
        let lp = vec![row.clone(), row];
        let l = nll(&lp, &[3, 5], &[true, true]).unwrap();
        assert!((l - 8f64.ln()).abs() < 1e-12);
        // probability 1 on gold: loss 0
        let mut sure = vec![-1e9; 4];
        sure[2] = 0.0;
        assert_eq!(nll(&[sure], &[2], &[true]).unwrap(), 0.0);
        // masking changes the denominator
        let lp = vec![vec![-1.0, -2.0], vec![-3.0, -4.0]];
        let all = nll(&lp, &[0, 0], &[true, true]).unwrap();
        let half = nll(&lp, &[0, 0], &[false, true]).unwrap();
        assert!((all - 2.0).abs() < 1e-12);
        assert!((half - 3.0).abs() < 1e-12);
        assert!(matches!(nll(&lp, &[0, 0], &[false, false]), Err(Error::EmptyTarget)));
    }

    #[test]
    fn weighted_mt_oracles() {
        let losses = [1.0, 2.0, 3.0, 4.0];
        let uniform = [0.25; 4];
        assert!((weighted_mt_loss(&losses, &uniform).unwrap() - 2.5).abs() < 1e-12);
        let onehot = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(weighted_mt_loss(&losses, &onehot).unwrap(), 3.0);
        let equal = [7.0; 4];
        let lam = [0.1, 0.2, 0.3, 0.4];
        assert!((weighted_mt_loss(&equal, &lam).unwrap() - 7.0).abs() < 1e-12);
        assert!(weighted_mt_loss(&losses, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn diversity_oracles() {
        // uniform mean: zero
        let l = diversity_loss(&[vec![0.25; 4], vec![0.25; 4]]).unwrap();
        assert!(l.abs() < 1e-12);
        // two-option batch mean (0.75, 0.25):
        // -(ln 0.75 + ln 0.25)/2 - ln 2 = 0.1438410362258904
        let l = diversity_loss(&[vec![0.75, 0.25]]).unwrap();
        assert!((l - 0.143_841_036_225_890_4).abs() < 1e-12);
        // collapsed mass is clamped, stays finite and positive
        let l = diversity_loss(&[vec![1.0, 0.0]]).unwrap();
        assert!(l.is_finite() && l > 0.0);
    }

    #[test]
    fn uniformity_oracles() {
        let l = uniformity_loss(&[vec![0.25; 4]]).unwrap();
        assert!(l.abs() < 1e-12);
        // -KL(U || (0.75, 0.25)) = (ln 0.75 + ln 0.25)/2 + ln 2
        let l = uniformity_loss(&[vec![0.75, 0.25]]).unwrap();
        let want = (0.75f64.ln() + 0.25f64.ln()) / 2.0 + 2f64.ln();
        assert!((l - want).abs() < 1e-12);
        assert!(l < 0.0);
    }

    #[test]
    fn total_is_exact_composition() {
        let w = LossWeights { beta1: 1.0, beta2: 1.0, beta3: 1.0 };
        let t = total_loss(1.0, 0.2, -0.1, 0.5, &w);
        assert!((t - 1.6).abs() < 1e-15);
        let w = LossWeights::default();
        let t = total_loss(2.0, 0.4, -0.2, 0.6, &w);
        assert!((t - (2.0 + 0.5 * 0.4 + 0.2 * -0.2 + 0.5 * 0.6)).abs() < 1e-15);
    }

    #[test]
    fn randomized_sign_invariants() {
        let mut rng = crate::rng::stream(99, "losstest");
        for _ in 0..50 {
            let b = rng.gen_range(1..6);
            let n = rng.gen_range(2..5);
            let batch: Vec<Vec<f64>> = (0..b)
                .map(|_| {
                    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|v| v / s).collect()
                })
                .collect();
            assert!(diversity_loss(&batch).unwrap() >= -1e-12);
            assert!(uniformity_loss(&batch).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn diversity_grad_matches_finite_differences() {
        let beta1 = 0.7;
        let batch = vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3]];
        let grads = diversity_grad(&batch, beta1).unwrap();
        let eps = 1e-7;
        for s in 0..batch.len() {
            for i in 0..batch[s].len() {
                let mut plus = batch.clone();
                plus[s][i] += eps;
                let mut minus = batch.clone();
                minus[s][i] -= eps;
                let want = beta1 * (diversity_loss(&plus).unwrap() - diversity_loss(&minus).unwrap())
                    / (2.0 * eps);
                assert!(
                    (grads[s][i] - want).abs() < 1e-6,
                    "batch {s} option {i}: {} vs {want}",
                    grads[s][i]
                );
            }
        }
    }
}

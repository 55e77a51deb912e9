//! The context predictor: pooled encoder state to option probabilities,
//! Gumbel-softmax training weights, and hard argmax selection at inference.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::encoder::EncoderOutput;
use crate::model::params::TapeParams;
use crate::rng;
use crate::tape::Var;
use crate::tensor::Tensor;

/// Projection head over context options.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorHead {
    /// `[d_model × N]`.
    pub w: Tensor,
    /// `[N]`.
    pub b: Tensor,
    /// Constant Gumbel-softmax temperature, positive.
    pub tau: f64,
}

impl PredictorHead {
    pub fn new(w: Tensor, b: Tensor, tau: f64) -> Result<PredictorHead> {
        if w.cols() != b.len() {
            return Err(Error::LengthMismatch {
                what: "predictor weight vs bias",
                left: w.cols(),
                right: b.len(),
            });
        }
        if !(tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        Ok(PredictorHead { w, b, tau })
    }

    pub fn n_options(&self) -> usize {
        self.b.len()
    }
}

/// One sentence's routing state: probabilities, sampled weights, noise.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionDistribution {
    pub pi: Vec<f64>,
    pub lambda_: Vec<f64>,
    pub gumbel_noise: Vec<f64>,
}

/// Mean of the non-pad hidden rows.
pub fn pool(encoder_out: &EncoderOutput) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..encoder_out.hidden.rows())
        .filter(|&r| !encoder_out.is_pad[r])
        .collect();
    if live.is_empty() {
        return Err(Error::EmptyInput("pooling over all-pad encoding".into()));
    }
    let d = encoder_out.hidden.cols();
    let mut out = vec![0.0; d];
    for &r in &live {
        for (o, &v) in out.iter_mut().zip(encoder_out.hidden.row(r)) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= live.len() as f64;
    }
    Ok(out)
}

fn logits(pooled: &[f64], head: &PredictorHead) -> Result<Vec<f64>> {
    if pooled.len() != head.w.rows() {
        return Err(Error::LengthMismatch {
            what: "pooled state vs predictor weight",
            left: pooled.len(),
            right: head.w.rows(),
        });
    }
    let n = head.n_options();
    let mut out = head.b.data().to_vec();
    for (k, &x) in pooled.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(head.w.row(k)) {
            *o += x * w;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictor logits".into()));
    }
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

/// Numerically stabilized softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Option probabilities of one pooled encoding.
pub fn option_probs(pooled: &[f64], head: &PredictorHead) -> Result<Vec<f64>> {
    Ok(softmax(&logits(pooled, head)?))
}

/// One Gumbel(0,1) draw per option.
pub fn sample_gumbel(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng::gumbel(rng)).collect()
}

/// Gumbel-softmax weights for fixed noise:
/// lambda_i proportional to exp((log pi_i + g_i) / tau).
pub fn gumbel_weights_fixed(pi: &[f64], g: &[f64], tau: f64) -> Vec<f64> {
    assert_eq!(pi.len(), g.len());
    let scores: Vec<f64> = pi
        .iter()
        .zip(g)
        .map(|(&p, &gi)| (p.ln() + gi) / tau)
        .collect();
    softmax(&scores)
}

/// Samples noise and weights for one sentence.
pub fn gumbel_weights(pi: &[f64], tau: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let g = sample_gumbel(pi.len(), rng);
    (gumbel_weights_fixed(pi, &g, tau), g)
}

/// Hard argmax over predictor logits; ties break to the lowest index.
pub fn select_option(pooled: &[f64], head: &PredictorHead) -> Result<usize> {
    let ls = logits(pooled, head)?;
    Ok(argmax(&ls))
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Tape-side predictor: pooled encoding to (pi, lambda) nodes so the
/// routing stays differentiable during training. Gumbel noise enters as a
/// constant; gradients flow to the head and the encoder through `pooled`.
pub struct RoutingNodes {
    pub logits: Var,
    pub pi: Var,
    pub log_pi: Var,
    pub lambda_: Var,
}

pub fn route_on(
    tp: &mut TapeParams,
    pooled: Var,
    gumbel: &[f64],
    tau: f64,
) -> RoutingNodes {
    let w = tp.var("predictor.w");
    let b = tp.var("predictor.b");
    let scores = tp.tape.matmul(pooled, w);
    let logits = tp.tape.add_row(scores, b);
    let pi = tp.tape.softmax_vec(logits);
    // log pi via log-softmax keeps the exp/log pair stable
    let log_pi = tp.tape.log_softmax(logits);
    let g = Tensor::from_vec(&[1, gumbel.len()], gumbel.to_vec());
    let noised = tp.tape.add_const(log_pi, g);
    let scaled = tp.tape.scale_const(noised, 1.0 / tau);
    let lambda_ = tp.tape.softmax_vec(scaled);
    RoutingNodes { logits, pi, log_pi, lambda_ }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn head(n: usize, d: usize) -> PredictorHead {
        PredictorHead::new(Tensor::zeros(&[d, n]), Tensor::zeros(&[n]), 1.0).unwrap()
    }

    #[test]
    fn pool_means_live_rows() {
        let enc = EncoderOutput {
            hidden: Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]),
            is_pad: vec![false, false],
        };
        assert_eq!(pool(&enc).unwrap(), vec![0.5, 0.5]);
        let single = EncoderOutput {
            hidden: Tensor::from_vec(&[2, 2], vec![3.0, 4.0, 9.0, 9.0]),
            is_pad: vec![false, true],
        };
        assert_eq!(pool(&single).unwrap(), vec![3.0, 4.0]);
        let all_pad = EncoderOutput {
            hidden: Tensor::from_vec(&[1, 2], vec![1.0, 2.0]),
            is_pad: vec![true],
        };
        assert!(pool(&all_pad).is_err());
    }

    #[test]
    fn uniform_logits_give_uniform_pi() {
        let h = head(4, 3);
        let pi = option_probs(&[0.3, -0.2, 0.9], &h).unwrap();
        for p in pi {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariance_and_oracle_value() {
        let pi = softmax(&[3f64.ln(), 0.0]);
        assert!((pi[0] - 0.75).abs() < 1e-12);
        assert!((pi[1] - 0.25).abs() < 1e-12);
        let shifted = softmax(&[3f64.ln() + 10.0, 10.0]);
        for (a, b) in pi.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_tau_one_is_identity() {
        let pi = [0.1, 0.2, 0.3, 0.4];
        let lam = gumbel_weights_fixed(&pi, &[0.0; 4], 1.0);
        for (l, p) in lam.iter().zip(&pi) {
            assert!((l - p).abs() < 1e-12);
        }
    }

    #[test]
    fn small_tau_approaches_one_hot() {
        let pi = [0.1, 0.6, 0.3];
        let lam = gumbel_weights_fixed(&pi, &[0.0; 3], 1e-4);
        assert!(lam[1] > 0.999999);
    }

    #[test]
    fn lambda_is_a_distribution() {
        let mut r = rng::stream(3, "gumtest");
        for _ in 0..200 {
            let pi = [0.25, 0.5, 0.25];
            let (lam, g) = gumbel_weights(&pi, 0.7, &mut r);
            assert_eq!(g.len(), 3);
            let sum: f64 = lam.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(lam.iter().all(|&l| (0.0..1.0).contains(&l)));
        }
    }

    #[test]
    fn select_option_matches_argmax_and_shift_scale_invariance() {
        let mut h = head(3, 2);
        h.b = Tensor::from_vec(&[3], vec![0.1, 2.0, -1.0]);
        assert_eq!(select_option(&[0.0, 0.0], &h).unwrap(), 1);
        let probs = option_probs(&[0.0, 0.0], &h).unwrap();
        assert_eq!(argmax(&probs), 1);
        // shift
        let mut shifted = h.clone();
        shifted.b = Tensor::from_vec(&[3], vec![5.1, 7.0, 4.0]);
        assert_eq!(select_option(&[0.0, 0.0], &shifted).unwrap(), 1);
        // positive rescale
        let mut scaled = h.clone();
        scaled.b = Tensor::from_vec(&[3], vec![0.3, 6.0, -3.0]);
        assert_eq!(select_option(&[0.0, 0.0], &scaled).unwrap(), 1);
    }

    #[test]
    fn argmax_ties_break_low() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
    }

    #[test]
    fn fixed_seed_reproduces_noise_sequence() {
        let a: Vec<f64> = {
            let mut r = rng::stream(11, "gumrepro");
            (0..5).map(|_| rng::gumbel(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = rng::stream(11, "gumrepro");
            (0..5).map(|_| rng::gumbel(&mut r)).collect()
        };
        assert_eq!(a, b);
    }
}

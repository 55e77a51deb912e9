//! Central finite differences against the backward pass.
//!
//! The probe noise (Gumbel draws, mask choices, batch order) is keyed by
//! the step index, so the objective is a fixed deterministic function of
//! the parameters and the difference quotient is well defined.

use rand::Rng;

use crate::corpus::io::DocumentCorpus;
use crate::error::Result;
use crate::model::config::ModelConfig;
use crate::model::params::Params;
use crate::rng;
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::trainer::step::batch_step;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel: f64,
    pub mean_rel: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compares backward gradients of the full batch objective against central
/// finite differences on `samples` parameter coordinates, drawn uniformly
/// over parameter names and then uniformly within each tensor.
pub fn grad_check(
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    corpus: &DocumentCorpus,
    batch: &[(usize, usize)],
    samples: usize,
    epsilon: f64,
    probe_seed: u64,
) -> Result<GradCheckReport> {
    assert!(samples > 0 && epsilon > 0.0);
    let mut params = Params::init(mcfg, tcfg.seed);
    let analytic = batch_step(&params, mcfg, tcfg, corpus, batch, 0, true)?.grads;
    let total_at = |params: &Params| -> Result<f64> {
        Ok(batch_step(params, mcfg, tcfg, corpus, batch, 0, false)?.breakdown.total)
    };

    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut probes = rng::stream(probe_seed, "gradcheck.probes");
    let mut report = GradCheckReport {
        checked: 0,
        max_rel: 0.0,
        mean_rel: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    let mut rel_sum = 0.0;
    for _ in 0..samples {
        let name = &names[probes.gen_range(0..names.len())];
        let idx = probes.gen_range(0..params.get(name).len());
        let a = analytic.get(name).map_or(0.0, |t| t.data()[idx]);

        let orig = params.get(name).data()[idx];
        params.get_mut(name).data_mut()[idx] = orig + epsilon;
        let plus = total_at(&params)?;
        params.get_mut(name).data_mut()[idx] = orig - epsilon;
        let minus = total_at(&params)?;
        params.get_mut(name).data_mut()[idx] = orig;
        let n = (plus - minus) / (2.0 * epsilon);

        let rel = rel_err(a, n);
        rel_sum += rel;
        report.checked += 1;
        if rel >= report.max_rel {
            report.max_rel = rel;
            report.worst_param = name.clone();
            report.worst_index = idx;
            report.worst_analytic = a;
            report.worst_numeric = n;
        }
    }
    report.mean_rel = rel_sum / report.checked as f64;
    Ok(report)
}

/// Same comparison on a purely linear graph (matrix product then sum),
/// where central differences are exact up to rounding.
pub fn linear_head_check(epsilon: f64) -> f64 {
    let (m, k, n) = (3, 4, 2);
    let mut init = rng::stream(17, "gradcheck.linear");
    let xv = Tensor::from_vec(&[m, k], (0..m * k).map(|_| init.gen_range(-1.0..1.0)).collect());
    let wv0: Vec<f64> = (0..k * n).map(|_| init.gen_range(-1.0..1.0)).collect();

    let loss_at = |wv: &[f64]| -> f64 {
        let mut tape = Tape::new();
        let x = tape.constant(xv.clone());
        let w = tape.leaf(Tensor::from_vec(&[k, n], wv.to_vec()));
        let y = tape.matmul(x, w);
        let loss = tape.sum(y);
        tape.value(loss).item()
    };

    let mut tape = Tape::new();
    let x = tape.constant(xv.clone());
    let w = tape.leaf(Tensor::from_vec(&[k, n], wv0.clone()));
    let y = tape.matmul(x, w);
    let loss = tape.sum(y);
    let grads = tape.backward_seeded(&[(loss, Tensor::scalar(1.0))]);
    let gw = grads.get(w).expect("weight gradient");

    let mut max_rel = 0.0f64;
    for idx in 0..k * n {
        let mut wv = wv0.clone();
        wv[idx] += epsilon;
        let plus = loss_at(&wv);
        wv[idx] = wv0[idx] - epsilon;
        let minus = loss_at(&wv);
        let numeric = (plus - minus) / (2.0 * epsilon);
        max_rel = max_rel.max(rel_err(gw.data()[idx], numeric));
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synth::{self, SynthConfig};
    use crate::model::config::Variant;
    use crate::trainer::Stage;

    fn fixture(variant: Variant) -> (ModelConfig, TrainConfig, DocumentCorpus) {
        let scfg = SynthConfig { n_docs: 2, doc_len: 3, vocab_size: 24, ..SynthConfig::default() };
        let (_, corpus, _) = synth::generate(5, &scfg).unwrap();
        let mcfg = ModelConfig {
            variant,
            vocab_size: 24,
            d_model: 16,
            n_heads: 2,
            d_ff: 16,
            enc_layers: 1,
            dec_layers: if variant == Variant::Concatenate { 3 } else { 1 },
            max_len: 64,
            dropout: 0.0,
        };
        let tcfg = TrainConfig { stage: Stage::DocFinetune, seed: 9, ..TrainConfig::default() };
        (mcfg, tcfg, corpus)
    }

    #[test]
    fn linear_head_is_exact() {
        assert!(linear_head_check(1e-5) < 1e-8);
    }

    #[test]
    fn full_objective_matches_finite_differences() {
        for variant in [Variant::ContextUnit, Variant::Concatenate] {
            let (mcfg, tcfg, corpus) = fixture(variant);
            let batch = [(0, 0), (0, 1), (1, 2)];
            let report = grad_check(&mcfg, &tcfg, &corpus, &batch, 120, 1e-5, 23).unwrap();
            assert_eq!(report.checked, 120);
            assert!(
                report.max_rel < 1e-4,
                "{variant:?} worst {} [{}]: analytic {} vs numeric {} (rel {})",
                report.worst_param,
                report.worst_index,
                report.worst_analytic,
                report.worst_numeric,
                report.max_rel
            );
        }
    }

    #[test]
    fn halving_epsilon_does_not_grow_error() {
        let (mcfg, tcfg, corpus) = fixture(Variant::ContextUnit);
        let batch = [(0, 0), (0, 1)];
        let coarse = grad_check(&mcfg, &tcfg, &corpus, &batch, 40, 1e-5, 31).unwrap();
        let fine = grad_check(&mcfg, &tcfg, &corpus, &batch, 40, 5e-6, 31).unwrap();
        assert!(fine.max_rel <= (coarse.max_rel * 1.1).max(1e-8));
    }
}

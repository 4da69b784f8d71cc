//! End-to-end finite-difference check of the model on tiny random instances.

use std::sync::Arc;

use rand::{Rng, RngCore};

use super::config::ModelConfig;
use super::network::{batch_loss, register, ForwardInput};
use super::params::Params;
use super::ModelError;
use crate::corpus::NUM_TAGS;
use crate::ndcore::{finite_diff_check, GradCheckReport, Mode, Tape, Tensor, DEFAULT_STEP};
use crate::rng::{stream, uniform};

/// A random stacked input of one or more sequences, targets and a parameter
/// set in `f64`.
#[derive(Clone, Debug)]
pub struct GradCheckCase {
    pub config: ModelConfig,
    pub params: Params<f64>,
    pub input: ForwardInput<f64>,
    pub lengths: Vec<usize>,
    pub targets: Vec<usize>,
    pub dropout_seed: u64,
}

/// Small dimensions for gradient checks: `d_bert`, graph hidden width and
/// graph output width (also the BiLSTM output).
pub fn tiny_config(d_bert: usize, gnn_hidden: usize, d_gnn: usize) -> ModelConfig {
    ModelConfig {
        d_bert,
        d_pos: 3,
        gnn_hidden,
        d_gnn,
        bilstm_out: d_gnn + d_gnn % 2,
        ..ModelConfig::default()
    }
}

pub fn random_case(config: &ModelConfig, seed: u64, max_tokens: usize) -> GradCheckCase {
    let mut rng = stream(seed, "gradcheck");
    let n = rng.random_range(1..=max_tokens.max(1));
    let data = (0..n * config.d_bert).map(|_| uniform(&mut rng, -1.0, 1.0)).collect();
    let embeddings = Tensor::matrix(n, config.d_bert, data).expect("length computed from shape");
    let pos = (0..n)
        .map(|_| rng.random_bool(0.8).then(|| rng.random_range(0..config.d_pos.max(1))))
        .collect();
    let mut lengths = Vec::new();
    let mut left = n;
    while left > 0 {
        let len = rng.random_range(1..=left);
        lengths.push(len);
        left -= len;
    }
    // random head for every node but one root per sequence, as a parse would give
    let mut lists = vec![Vec::new(); n];
    let mut start = 0;
    for &len in &lengths {
        let root = start + rng.random_range(0..len);
        for (v, list) in lists.iter_mut().enumerate().skip(start).take(len) {
            if v != root {
                let mut h = start + rng.random_range(0..len - 1);
                if h >= v {
                    h += 1;
                }
                list.push(h);
            }
        }
        start += len;
    }
    let targets = (0..n).map(|_| rng.random_range(0..NUM_TAGS)).collect();

    let mut params = Params::<f64>::init(config, seed);
    for t in params.tensors_mut() {
        // biases start at zero; move everything off the initial point
        for v in t.data_mut() {
            *v += uniform(&mut rng, -0.3, 0.3);
        }
    }
    GradCheckCase {
        config: config.clone(),
        params,
        input: ForwardInput {
            embeddings,
            pos,
            neighbors: Arc::new(lists),
        },
        lengths,
        targets,
        dropout_seed: rng.next_u64(),
    }
}

impl GradCheckCase {
    fn loss(&self, params: &Params<f64>) -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let vars = register(&mut tape, params);
        // same dropout mask on every evaluation
        let mut rng = stream(self.dropout_seed, "dropout");
        let l = batch_loss(
            &mut tape,
            &vars,
            &self.config,
            &self.input,
            &self.lengths,
            &self.targets,
            Mode::Train,
            &mut rng,
        )?;
        Ok(tape.value(l).data()[0])
    }

    pub fn analytic(&self) -> Result<Vec<Tensor<f64>>, ModelError> {
        let mut tape = Tape::new();
        let vars = register(&mut tape, &self.params);
        let mut rng = stream(self.dropout_seed, "dropout");
        let l = batch_loss(
            &mut tape,
            &vars,
            &self.config,
            &self.input,
            &self.lengths,
            &self.targets,
            Mode::Train,
            &mut rng,
        )?;
        let g = tape.backward(l)?;
        let mut out = Vec::new();
        let mut shapes = Vec::new();
        self.params.visit(|_, t| shapes.push(t.shape().to_vec()));
        let mut i = 0;
        vars.visit(|_, v| {
            out.push(g.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(&shapes[i])));
            i += 1;
        });
        Ok(out)
    }

    /// Compares analytic and numeric gradients of every parameter entry.
    /// `corrupt` perturbs one analytic entry as a negative control.
    pub fn check(&self, corrupt: bool) -> Result<GradCheckReport, ModelError> {
        let mut analytic = self.analytic()?;
        if corrupt {
            let last = analytic.len() - 2;
            let v = analytic[last].data()[0];
            analytic[last].data_mut()[0] = v + 1e-2 * v.abs().max(1.0);
        }
        let mut values: Vec<Tensor<f64>> = self.params.tensors().into_iter().cloned().collect();
        let mut failure = None;
        let report = finite_diff_check(
            |vals| match self.loss(&self.params.replaced(vals)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            &mut values,
            &analytic,
            DEFAULT_STEP,
            usize::MAX,
            &mut stream(self.dropout_seed, "sample"),
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(report),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ablation;
    use crate::ndcore::DEFAULT_TOLERANCE;

    #[test]
    fn every_variant_passes() {
        for a in Ablation::ALL {
            let c = tiny_config(5, 4, 3).with_ablation(a);
            let case = random_case(&c, 3, 4);
            let r = case.check(false).unwrap();
            assert!(r.passed(DEFAULT_TOLERANCE), "{a}: {r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn stacked_sequences_pass() {
        let c = tiny_config(4, 3, 2);
        let case = (0..)
            .map(|seed| random_case(&c, seed, 6))
            .find(|k| k.lengths.len() > 1)
            .unwrap();
        let r = case.check(false).unwrap();
        assert!(r.passed(DEFAULT_TOLERANCE), "{:?}: {r:?}", case.lengths);
    }

    #[test]
    fn corruption_is_caught() {
        let case = random_case(&tiny_config(5, 4, 4), 4, 4);
        assert!(!case.check(true).unwrap().passed(DEFAULT_TOLERANCE));
    }
}

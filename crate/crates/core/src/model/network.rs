//! The forward computation on an autodiff tape.

use rand::RngCore;

use super::config::{DropoutPlacement, ModelConfig, NodeFeatures};
use super::params::{LstmParams, ModelParams, Params, SageParams};
use super::ModelError;
use crate::ndcore::{dropout, Mode, NeighborLists, Scalar, Tape, Tensor, Var};

/// Per-example inputs, all indexed by retained token.
#[derive(Clone, Debug)]
pub struct ForwardInput<T: Scalar> {
    /// `n x d_bert` frozen embeddings.
    pub embeddings: Tensor<T>,
    /// POS one-hot index per token; `None` is the zero vector.
    pub pos: Vec<Option<usize>>,
    /// Source nodes aggregated into each node.
    pub neighbors: NeighborLists,
}

impl<T: Scalar> ForwardInput<T> {
    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Scalar>(&self) -> ForwardInput<U> {
        ForwardInput {
            embeddings: self.embeddings.cast(),
            pos: self.pos.clone(),
            neighbors: self.neighbors.clone(),
        }
    }
}

/// Concatenates inputs row-wise with neighbor indices shifted into place.
/// Returns the stacked input and the row count of each part.
pub fn stack_inputs<T: Scalar>(inputs: &[&ForwardInput<T>]) -> Result<(ForwardInput<T>, Vec<usize>), ModelError> {
    let cols = inputs.first().map_or(0, |i| i.embeddings.cols());
    let total: usize = inputs.iter().map(|i| i.len()).sum();
    let mut data = Vec::with_capacity(total * cols);
    let mut pos = Vec::with_capacity(total);
    let mut lists = Vec::with_capacity(total);
    let mut lengths = Vec::with_capacity(inputs.len());
    for input in inputs {
        if input.embeddings.cols() != cols {
            return Err(ModelError::Input(format!(
                "cannot stack embeddings of width {} and {cols}",
                input.embeddings.cols()
            )));
        }
        let offset = pos.len();
        data.extend_from_slice(input.embeddings.data());
        pos.extend_from_slice(&input.pos);
        lists.extend(input.neighbors.iter().map(|l| l.iter().map(|&s| s + offset).collect::<Vec<_>>()));
        lengths.push(input.len());
    }
    let stacked = ForwardInput {
        embeddings: Tensor::matrix(total, cols, data)?,
        pos,
        neighbors: std::sync::Arc::new(lists),
    };
    Ok((stacked, lengths))
}

/// Puts every parameter on the tape by reference.
pub fn register<'a, T: Scalar>(tape: &mut Tape<'a, T>, params: &'a Params<T>) -> ModelParams<Var> {
    params.map(|_, t| tape.param(t))
}

/// `n x d_pos` rows of one-hot vectors; unknown tags stay zero.
pub fn pos_onehot<T: Scalar>(pos: &[Option<usize>], d_pos: usize) -> Result<Tensor<T>, ModelError> {
    let mut out = Tensor::zeros(&[pos.len(), d_pos]);
    for (r, p) in pos.iter().enumerate() {
        if let Some(i) = *p {
            if i >= d_pos {
                return Err(ModelError::Input(format!("POS index {i} outside one-hot width {d_pos}")));
            }
            out.set(r, i, T::one());
        }
    }
    Ok(out)
}

/// `x W_self + mean(in-neighbors of x) W_neigh + bias`.
pub fn sage_layer<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    neighbors: &NeighborLists,
    p: &SageParams<Var>,
) -> Result<Var, ModelError> {
    let own = tape.matmul(x, p.w_self)?;
    let mean = tape.neighbor_mean(x, neighbors.clone())?;
    let agg = tape.matmul(mean, p.w_neigh)?;
    let sum = tape.add(own, agg)?;
    Ok(tape.add_bias(sum, p.bias)?)
}

fn lstm_direction<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    p: &LstmParams<Var>,
    lengths: &[usize],
    reverse: bool,
) -> Result<Var, ModelError> {
    let hidden = tape.value(p.w_hh).rows();
    let xw = tape.matmul(x, p.w_ih)?;
    let xw = tape.add_bias(xw, p.bias)?;
    let mut starts = Vec::with_capacity(lengths.len());
    let mut total = 0;
    for &len in lengths {
        starts.push(total);
        total += len;
    }
    // longest first, so the sequences still running are always a prefix
    let mut by_len: Vec<usize> = (0..lengths.len()).collect();
    by_len.sort_by_key(|&s| std::cmp::Reverse(lengths[s]));
    let longest = by_len.first().map_or(0, |&s| lengths[s]);

    let mut steps = Vec::with_capacity(longest);
    let mut placed = vec![0; total];
    let mut state: Option<(Var, Var)> = None;
    let mut emitted = 0;
    for t in 0..longest {
        let active = by_len.iter().take_while(|&&s| lengths[s] > t).count();
        let rows: Vec<usize> = by_len[..active]
            .iter()
            .map(|&s| if reverse { starts[s] + lengths[s] - 1 - t } else { starts[s] + t })
            .collect();
        let mut pre = tape.gather_rows(xw, &rows)?;
        let mut c_prev = None;
        if let Some((h, c)) = state {
            let (h, c) = if tape.value(h).rows() > active {
                let keep: Vec<usize> = (0..active).collect();
                (tape.gather_rows(h, &keep)?, tape.gather_rows(c, &keep)?)
            } else {
                (h, c)
            };
            let rec = tape.matmul(h, p.w_hh)?;
            pre = tape.add(pre, rec)?;
            c_prev = Some(c);
        }
        let gate = |tape: &mut Tape<'_, T>, k: usize| tape.slice_cols(pre, k * hidden, (k + 1) * hidden);
        let i = gate(tape, 0)?;
        let i = tape.sigmoid(i);
        let f = gate(tape, 1)?;
        let f = tape.sigmoid(f);
        let g = gate(tape, 2)?;
        let g = tape.tanh(g);
        let o = gate(tape, 3)?;
        let o = tape.sigmoid(o);
        let mut c = tape.mul(i, g)?;
        if let Some(c_prev) = c_prev {
            let keep = tape.mul(f, c_prev)?;
            c = tape.add(keep, c)?;
        }
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        for (k, &r) in rows.iter().enumerate() {
            placed[r] = emitted + k;
        }
        emitted += active;
        steps.push(h);
        state = Some((h, c));
    }
    let stacked = tape.concat_rows(&steps)?;
    Ok(tape.gather_rows(stacked, &placed)?)
}

/// Left-to-right and right-to-left LSTMs from zero state, outputs
/// concatenated forward then backward. `x` holds the sequences of `lengths`
/// one after another; each runs independently.
pub fn bilstm<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    forward: &LstmParams<Var>,
    backward: &LstmParams<Var>,
    lengths: &[usize],
) -> Result<Var, ModelError> {
    let n = tape.value(x).rows();
    if lengths.iter().sum::<usize>() != n || lengths.contains(&0) {
        return Err(ModelError::Input(format!("sequence lengths {lengths:?} do not cover {n} rows")));
    }
    let fw = lstm_direction(tape, x, forward, lengths, false)?;
    let bw = lstm_direction(tape, x, backward, lengths, true)?;
    Ok(tape.concat_cols(&[fw, bw])?)
}

/// `n x 5` logits.
pub fn forward<T: Scalar>(
    tape: &mut Tape<'_, T>,
    vars: &ModelParams<Var>,
    config: &ModelConfig,
    input: &ForwardInput<T>,
    mode: Mode,
    rng: &mut impl RngCore,
) -> Result<Var, ModelError> {
    forward_batch(tape, vars, config, input, &[input.len()], mode, rng)
}

/// Logits for several examples stacked by [`stack_inputs`]. The graph is
/// block diagonal and the BiLSTM restarts at every example boundary, so each
/// row matches what [`forward`] gives for its example alone.
pub fn forward_batch<T: Scalar>(
    tape: &mut Tape<'_, T>,
    vars: &ModelParams<Var>,
    config: &ModelConfig,
    input: &ForwardInput<T>,
    lengths: &[usize],
    mode: Mode,
    rng: &mut impl RngCore,
) -> Result<Var, ModelError> {
    let n = input.len();
    if input.embeddings.cols() != config.d_bert {
        return Err(ModelError::Input(format!(
            "embedding width {} does not match d_bert {}",
            input.embeddings.cols(),
            config.d_bert
        )));
    }
    if input.pos.len() != n || input.neighbors.len() != n {
        return Err(ModelError::Input(format!(
            "{n} embedding rows, {} POS entries, {} graph nodes",
            input.pos.len(),
            input.neighbors.len()
        )));
    }
    let rho = config.dropout;
    let everywhere = config.dropout_placement == DropoutPlacement::All;

    let r = tape.constant(input.embeddings.clone());
    let mut r = dropout(tape, r, rho, mode, rng)?;
    if let Some(p) = vars.projection {
        r = tape.matmul(r, p)?;
    }
    let r2 = if config.use_pos {
        let onehot = tape.constant(pos_onehot(&input.pos, config.d_pos)?);
        tape.concat_cols(&[r, onehot])?
    } else {
        r
    };

    let r4 = match (&vars.sage1, &vars.sage2) {
        (Some(s1), Some(s2)) => {
            let x = match config.node_features {
                NodeFeatures::Full => r2,
                NodeFeatures::ConstantOne => tape.constant(Tensor::full(&[n, 1], T::one())),
            };
            let h = sage_layer(tape, x, &input.neighbors, s1)?;
            let mut h = tape.relu(h);
            if everywhere {
                h = dropout(tape, h, rho, mode, rng)?;
            }
            let mut g = sage_layer(tape, h, &input.neighbors, s2)?;
            if let Some(b) = &vars.bilstm {
                if everywhere {
                    g = dropout(tape, g, rho, mode, rng)?;
                }
                g = bilstm(tape, g, &b.forward, &b.backward, lengths)?;
            }
            if everywhere {
                g = dropout(tape, g, rho, mode, rng)?;
            }
            tape.concat_cols(&[r2, g])?
        }
        _ => r2,
    };
    let logits = tape.matmul(r4, vars.head.w)?;
    Ok(tape.add_bias(logits, vars.head.b)?)
}

/// Mean token cross entropy of one example.
pub fn example_loss<T: Scalar>(
    tape: &mut Tape<'_, T>,
    vars: &ModelParams<Var>,
    config: &ModelConfig,
    input: &ForwardInput<T>,
    targets: &[usize],
    mode: Mode,
    rng: &mut impl RngCore,
) -> Result<Var, ModelError> {
    batch_loss(tape, vars, config, input, &[input.len()], targets, mode, rng)
}

/// Mean token cross entropy over every row of a stacked batch, so longer
/// examples weigh more.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss<T: Scalar>(
    tape: &mut Tape<'_, T>,
    vars: &ModelParams<Var>,
    config: &ModelConfig,
    input: &ForwardInput<T>,
    lengths: &[usize],
    targets: &[usize],
    mode: Mode,
    rng: &mut impl RngCore,
) -> Result<Var, ModelError> {
    let logits = forward_batch(tape, vars, config, input, lengths, mode, rng)?;
    let mask = vec![true; targets.len()];
    Ok(tape.cross_entropy(logits, targets, &mask)?)
}

/// Eval-mode logits without gradient bookkeeping beyond the tape itself.
pub fn infer_logits<T: Scalar>(
    params: &Params<T>,
    config: &ModelConfig,
    input: &ForwardInput<T>,
) -> Result<Tensor<T>, ModelError> {
    if input.is_empty() {
        return Ok(Tensor::zeros(&[0, config.num_classes]));
    }
    let mut tape = Tape::new();
    let vars = register(&mut tape, params);
    let logits = forward(&mut tape, &vars, config, input, Mode::Eval, &mut crate::rng::stream(0, "eval"))?;
    Ok(tape.value(logits).clone())
}

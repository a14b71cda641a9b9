//! Bidirectional LSTM over token embeddings.
//!
//! All sequences of a batch run through the recurrence together, one
//! `N x 4H` gate matrix per time step. The backward direction reads each
//! sequence reversed within its own length, so padding only ever trails the
//! real tokens and never feeds a position that is read back out.

use rand::Rng;

use super::params::{uniform, ParamId, ParameterStore};
use super::tape::{NodeId, Tape};
use crate::error::Result;

/// Parameters of one LSTM direction. Gate order in the `4H` axis is input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
}

impl LstmParams {
    pub fn register(
        store: &mut ParameterStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let bound = 1.0 / (hidden as f64).sqrt();
        Ok(LstmParams {
            w_x: store.insert(
                &format!("{prefix}.w_x"),
                uniform(input, 4 * hidden, bound, rng),
            )?,
            w_h: store.insert(
                &format!("{prefix}.w_h"),
                uniform(hidden, 4 * hidden, bound, rng),
            )?,
            bias: store.insert(&format!("{prefix}.bias"), uniform(1, 4 * hidden, bound, rng))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub embedding: ParamId,
    pub forward: LstmParams,
    pub backward: LstmParams,
    /// Learned `1 x 2H` stand-in for messages with no tokens.
    pub empty: ParamId,
    pub hidden: usize,
}

impl BiLstm {
    /// Encodes each id sequence into a `len x 2H` node (`1 x 2H` for an empty
    /// sequence). Row `k` is the forward state at `k` followed by the
    /// backward state at `k`. Ids must index rows of the embedding table.
    pub fn encode(&self, tape: &mut Tape, store: &ParameterStore, seqs: &[Vec<usize>]) -> Vec<NodeId> {
        let live: Vec<usize> = (0..seqs.len()).filter(|&i| !seqs[i].is_empty()).collect();
        let mut out: Vec<Option<NodeId>> = vec![None; seqs.len()];

        if !live.is_empty() {
            let fwd_states = self.run_direction(tape, store, &self.forward, seqs, &live, false);
            let bwd_states = self.run_direction(tape, store, &self.backward, seqs, &live, true);
            for (r, &s) in live.iter().enumerate() {
                let len = seqs[s].len();
                let f: Vec<(NodeId, usize)> = (0..len).map(|k| (fwd_states[k], r)).collect();
                let b: Vec<(NodeId, usize)> =
                    (0..len).map(|k| (bwd_states[len - 1 - k], r)).collect();
                let f = tape.gather_rows(&f);
                let b = tape.gather_rows(&b);
                out[s] = Some(tape.concat_cols(&[f, b]));
            }
        }

        if live.len() < seqs.len() {
            let empty = tape.param(store, self.empty);
            for slot in out.iter_mut().filter(|o| o.is_none()) {
                *slot = Some(empty);
            }
        }
        out.into_iter().map(|o| o.expect("every sequence encoded")).collect()
    }

    /// Hidden-state nodes (`N x H`) for each time step of one direction.
    fn run_direction(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        p: &LstmParams,
        seqs: &[Vec<usize>],
        live: &[usize],
        reversed: bool,
    ) -> Vec<NodeId> {
        const PAD: usize = crate::corpus::vocab::PAD;
        let h = self.hidden;
        let n = live.len();
        let steps = live.iter().map(|&s| seqs[s].len()).max().unwrap_or(0);

        // Time-major ids: row t*n + r holds token t of sequence r.
        let mut ids = Vec::with_capacity(steps * n);
        for t in 0..steps {
            for &s in live {
                let seq = &seqs[s];
                let tok = if t < seq.len() {
                    if reversed {
                        seq[seq.len() - 1 - t]
                    } else {
                        seq[t]
                    }
                } else {
                    PAD
                };
                ids.push(tok);
            }
        }
        let x = tape.embed(store, self.embedding, &ids);
        let w_x = tape.param(store, p.w_x);
        let w_h = tape.param(store, p.w_h);
        let bias = tape.param(store, p.bias);
        let xw = tape.matmul(x, w_x);

        let mut states = Vec::with_capacity(steps);
        let mut prev: Option<(NodeId, NodeId)> = None;
        for t in 0..steps {
            let xt = tape.slice_rows(xw, t * n, n);
            let mut gates = tape.add(xt, bias);
            if let Some((h_prev, _)) = prev {
                let rec = tape.matmul(h_prev, w_h);
                gates = tape.add(gates, rec);
            }
            let i_lin = tape.slice_cols(gates, 0, h);
            let f_lin = tape.slice_cols(gates, h, h);
            let g_lin = tape.slice_cols(gates, 2 * h, h);
            let o_lin = tape.slice_cols(gates, 3 * h, h);
            let i = tape.sigmoid(i_lin);
            let f = tape.sigmoid(f_lin);
            let g = tape.tanh(g_lin);
            let o = tape.sigmoid(o_lin);
            let ig = tape.mul(i, g);
            let c = match prev {
                Some((_, c_prev)) => {
                    let fc = tape.mul(f, c_prev);
                    tape.add(fc, ig)
                }
                None => ig,
            };
            let tc = tape.tanh(c);
            let h_t = tape.mul(o, tc);
            states.push(h_t);
            prev = Some((h_t, c));
        }
        states
    }
}

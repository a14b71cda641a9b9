//! Interaction features between an utterance and its candidate parents,
//! link scores and the pointing distribution over the window.

use std::ops::RangeInclusive;

use crate::corpus::vocab::UNK;
use crate::encoder::{EncodedUtterance, UtteranceFeatures};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::tape::softmax;
use crate::nn::align::soft_align;
use crate::nn::{NodeId, Tape, Tensor};

/// Time difference (2), mention both ways (2), memory both ways (2).
pub const STRUCT_DIM: usize = 6;

/// Cumulative mention counts between speaker ids, growing on demand.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentionMemory {
    size: usize,
    counts: Vec<u64>,
}

impl MentionMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Side length of the table.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, a: usize, b: usize) -> u64 {
        if a < self.size && b < self.size {
            self.counts[a * self.size + b]
        } else {
            0
        }
    }

    fn grow(&mut self, needed: usize) {
        if needed <= self.size {
            return;
        }
        let new_size = needed.max(self.size * 2);
        let mut counts = vec![0; new_size * new_size];
        for a in 0..self.size {
            counts[a * new_size..a * new_size + self.size]
                .copy_from_slice(&self.counts[a * self.size..(a + 1) * self.size]);
        }
        self.size = new_size;
        self.counts = counts;
    }

    pub fn add(&mut self, a: usize, b: usize, k: u64) {
        if k == 0 {
            return;
        }
        self.grow(a.max(b) + 1);
        self.counts[a * self.size + b] += k;
    }

    /// Records the mentions exchanged by `child` and the parent it was linked to.
    pub fn record_link(&mut self, child: &UtteranceFeatures, parent: &UtteranceFeatures) {
        let m_cp = mention_count(&child.token_ids, parent.speaker_id);
        let m_pc = mention_count(&parent.token_ids, child.speaker_id);
        update_mention_memory(self, child.speaker_id, parent.speaker_id, m_cp, m_pc);
    }
}

pub fn update_mention_memory(memory: &mut MentionMemory, s_i: usize, s_j: usize, m_ij: u64, m_ji: u64) {
    memory.add(s_i, s_j, m_ij);
    memory.add(s_j, s_i, m_ji);
}

/// `t_i - t_j`, adding a day to the hour when the difference would be negative.
pub fn time_difference(t_i: [f64; 2], t_j: [f64; 2]) -> [f64; 2] {
    let mut d = [t_i[0] - t_j[0], t_i[1] - t_j[1]];
    if 60.0 * d[0] + d[1] < 0.0 {
        d[0] += 24.0;
    }
    d
}

/// Tokens of a message whose id is the speaker's id. The unknown id never matches.
pub fn mention_count(token_ids: &[usize], speaker_id: usize) -> u64 {
    if speaker_id == UNK {
        return 0;
    }
    token_ids.iter().filter(|&&t| t == speaker_id).count() as u64
}

/// The non-text part of the feature vector, reading memory as it stands.
pub fn structural_features(
    u_i: &UtteranceFeatures,
    u_j: &UtteranceFeatures,
    memory: &MentionMemory,
) -> [f64; STRUCT_DIM] {
    let (s_i, s_j) = (u_i.speaker_id, u_j.speaker_id);
    let t = if u_i.index == u_j.index {
        [0.0, 0.0]
    } else {
        time_difference(u_i.time_vec, u_j.time_vec)
    };
    [
        t[0],
        t[1],
        mention_count(&u_i.token_ids, s_j) as f64,
        mention_count(&u_j.token_ids, s_i) as f64,
        memory.get(s_i, s_j) as f64,
        memory.get(s_j, s_i) as f64,
    ]
}

/// Fused feature vector of one utterance pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionFeature {
    pub time_diff: [f64; 2],
    pub mention_ij: f64,
    pub mention_ji: f64,
    pub memory_ij: f64,
    pub memory_ji: f64,
    pub coherence: Vec<f64>,
}

impl InteractionFeature {
    pub fn from_parts(s: [f64; STRUCT_DIM], coherence: Vec<f64>) -> Self {
        InteractionFeature {
            time_diff: [s[0], s[1]],
            mention_ij: s[2],
            mention_ji: s[3],
            memory_ij: s[4],
            memory_ji: s[5],
            coherence,
        }
    }

    pub fn structural(&self) -> [f64; STRUCT_DIM] {
        [
            self.time_diff[0],
            self.time_diff[1],
            self.mention_ij,
            self.mention_ji,
            self.memory_ij,
            self.memory_ji,
        ]
    }

    pub fn dim(&self) -> usize {
        STRUCT_DIM + self.coherence.len()
    }

    /// Components in feature order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.structural().to_vec();
        v.extend_from_slice(&self.coherence);
        v
    }
}

/// Soft-alignment coherence of two token sequences as a `1 x 16D` node,
/// where `D` is the width of a token vector.
pub fn coherence_node(tape: &mut Tape, h_i: NodeId, h_j: NodeId) -> NodeId {
    tape.soft_align(h_i, h_j)
}

pub fn topic_coherence(h_i: &Tensor, h_j: &Tensor) -> Result<Vec<f64>> {
    if h_i.cols() != h_j.cols() || h_i.rows() == 0 || h_j.rows() == 0 {
        return Err(Error::Contract(format!(
            "coherence of {:?} and {:?} token matrices",
            h_i.shape(),
            h_j.shape()
        )));
    }
    Ok(soft_align(h_i, h_j).into_vec())
}

fn text_block(enc_i: &EncodedUtterance, enc_j: &EncodedUtterance, model: &Model) -> Result<Vec<f64>> {
    if model.config.use_text {
        topic_coherence(&enc_i.token_reprs, &enc_j.token_reprs)
    } else {
        Ok(vec![0.0; model.config.coherence_dim()])
    }
}

pub fn interaction_features(
    enc_i: &EncodedUtterance,
    enc_j: &EncodedUtterance,
    memory: &MentionMemory,
    model: &Model,
) -> Result<InteractionFeature> {
    if enc_j.index() > enc_i.index() {
        return Err(Error::Contract(format!(
            "candidate {} follows utterance {}",
            enc_j.index(),
            enc_i.index()
        )));
    }
    let s = structural_features(&enc_i.features, &enc_j.features, memory);
    Ok(InteractionFeature::from_parts(s, text_block(enc_i, enc_j, model)?))
}

/// Indices eligible as parents of `i`, self included and last.
pub fn candidate_window(i: usize, window: usize) -> RangeInclusive<usize> {
    i.saturating_sub(window)..=i
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Text half of a link score: `w[6..] · h_ij`.
pub fn coherence_dot(w: &[f64], coherence: &[f64]) -> f64 {
    dot(&w[STRUCT_DIM..], coherence)
}

/// `tanh(w[..6] · s + text)`; every inference path scores through here.
pub fn score_from_parts(w: &[f64], structural: &[f64; STRUCT_DIM], text: f64) -> f64 {
    (dot(&w[..STRUCT_DIM], structural) + text).tanh()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointingDistribution {
    pub child_index: usize,
    /// Ascending, ending with the child itself.
    pub candidate_indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub probs: Vec<f64>,
}

impl PointingDistribution {
    pub fn from_scores(child_index: usize, candidate_indices: Vec<usize>, scores: Vec<f64>) -> Self {
        let probs = softmax(&scores);
        PointingDistribution {
            child_index,
            candidate_indices,
            scores,
            probs,
        }
    }

    pub fn prob_of(&self, index: usize) -> Option<f64> {
        self.candidate_indices
            .iter()
            .position(|&c| c == index)
            .map(|k| self.probs[k])
    }
}

/// Scores every candidate in `window`, which must end with `enc_i`.
pub fn pointing_distribution(
    enc_i: &EncodedUtterance,
    window: &[EncodedUtterance],
    memory: &MentionMemory,
    model: &Model,
) -> Result<PointingDistribution> {
    let Some(last) = window.last() else {
        return Err(Error::Contract("empty candidate window".into()));
    };
    if last.index() != enc_i.index() {
        return Err(Error::Contract("window must end with the scored utterance".into()));
    }
    let w = model.w_link();
    let mut indices = Vec::with_capacity(window.len());
    let mut scores = Vec::with_capacity(window.len());
    for enc_j in window {
        let s = structural_features(&enc_i.features, &enc_j.features, memory);
        let text = coherence_dot(w, &text_block(enc_i, enc_j, model)?);
        indices.push(enc_j.index());
        scores.push(score_from_parts(w, &s, text));
    }
    Ok(PointingDistribution::from_scores(enc_i.index(), indices, scores))
}

/// `-Σ log p(gold)` over gold parents inside the window; `None` when none is.
pub fn link_loss(dist: &PointingDistribution, gold_parents: &[usize]) -> Option<f64> {
    let mut loss = 0.0;
    let mut any = false;
    for &g in gold_parents {
        if let Some(p) = dist.prob_of(g) {
            loss -= p.ln();
            any = true;
        }
    }
    any.then_some(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(index: usize, time: [f64; 2], speaker: usize, tokens: &[usize]) -> UtteranceFeatures {
        UtteranceFeatures {
            index,
            time_vec: time,
            speaker_id: speaker,
            token_ids: tokens.to_vec(),
            is_system: false,
        }
    }

    #[test]
    fn time_difference_examples() {
        assert_eq!(time_difference([2.0, 27.0], [2.0, 26.0]), [0.0, 1.0]);
        assert_eq!(time_difference([5.0, 5.0], [5.0, 5.0]), [0.0, 0.0]);
        assert_eq!(time_difference([0.0, 5.0], [23.0, 58.0]), [1.0, -53.0]);
        assert_eq!(time_difference([3.0, 0.0], [2.0, 59.0]), [1.0, -59.0]);
    }

    #[test]
    fn mention_counting() {
        assert_eq!(mention_count(&[7, 3, 9, 2], 7), 1);
        assert_eq!(mention_count(&[3, 4], 7), 0);
        assert_eq!(mention_count(&[5, 5, 8], 5), 2);
        assert_eq!(mention_count(&[UNK, UNK], UNK), 0);
    }

    #[test]
    fn memory_updates() {
        let mut m = MentionMemory::new();
        update_mention_memory(&mut m, 3, 4, 1, 0);
        assert_eq!((m.get(3, 4), m.get(4, 3)), (1, 0));
        update_mention_memory(&mut m, 3, 4, 1, 0);
        assert_eq!(m.get(3, 4), 2);
        update_mention_memory(&mut m, 6, 6, 1, 1);
        assert_eq!(m.get(6, 6), 2);
        assert_eq!(m.get(100, 3), 0);
        update_mention_memory(&mut m, 40, 2, 5, 0);
        assert_eq!((m.get(3, 4), m.get(40, 2)), (2, 5));
    }

    #[test]
    fn self_candidate_features() {
        let u = feats(4, [1.0, 2.0], 9, &[9, 3]);
        let mut mem = MentionMemory::new();
        mem.add(9, 9, 3);
        assert_eq!(structural_features(&u, &u, &mem), [0.0, 0.0, 1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn fresh_memory_reads_zero() {
        let a = feats(0, [1.0, 0.0], 2, &[]);
        let b = feats(1, [1.0, 1.0], 3, &[2]);
        let s = structural_features(&b, &a, &MentionMemory::new());
        assert_eq!(s, [0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn coherence_of_a_single_identical_vector() {
        let v = Tensor::row_vector(vec![0.5, -1.0, 2.0]);
        let h = topic_coherence(&v, &v).unwrap();
        assert_eq!(h.len(), 16 * 3);
        // mean block then max block, each [h; h'; h - h'; h * h'].
        let side = [0.5, -1.0, 2.0, 0.5, -1.0, 2.0, 0.0, 0.0, 0.0, 0.25, 1.0, 4.0];
        for block in h.chunks(12) {
            assert_eq!(block, side);
        }
    }

    #[test]
    fn coherence_width_and_dimension_checks() {
        let a = Tensor::from_vec(3, 4, (0..12).map(|x| x as f64 * 0.1).collect());
        let b = Tensor::from_vec(2, 4, (0..8).map(|x| 1.0 - x as f64 * 0.2).collect());
        assert_eq!(topic_coherence(&a, &b).unwrap().len(), 64);
        let c = Tensor::zeros(2, 3);
        assert!(matches!(topic_coherence(&a, &c), Err(Error::Contract(_))));
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let a = Tensor::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, 0.0]);
        let b = Tensor::from_vec(4, 2, vec![0.1, 0.2, 0.3, -0.4, 1.0, 1.0, -2.0, 0.0]);
        let mut t = Tape::new();
        let (x, y) = (t.constant(a), t.constant(b));
        let s = t.matmul_t(x, false, y, true);
        let p = t.softmax_rows(s);
        for r in 0..3 {
            let sum: f64 = t.value(p).row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn windows() {
        assert_eq!(candidate_window(0, 50), 0..=0);
        let w = candidate_window(120, 50);
        assert_eq!((*w.start(), *w.end(), w.count()), (70, 120, 51));
    }

    #[test]
    fn link_loss_examples() {
        let d = PointingDistribution::from_scores(3, vec![0, 1, 2, 3], vec![0.0; 4]);
        assert!((link_loss(&d, &[1]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(link_loss(&d, &[9]), None);
        let sure = PointingDistribution {
            child_index: 0,
            candidate_indices: vec![0],
            scores: vec![0.3],
            probs: vec![1.0],
        };
        assert_eq!(link_loss(&sure, &[0]), Some(0.0));
        let p = PointingDistribution::from_scores(1, vec![0, 1], vec![0.2, -0.4]);
        assert!((link_loss(&p, &[0]).unwrap() + p.probs[0].ln()).abs() < 1e-15);
    }
}

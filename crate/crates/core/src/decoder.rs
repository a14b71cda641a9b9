//! Online parent prediction and thread assembly.

use std::collections::VecDeque;

use crate::corpus::vocab::Vocabulary;
use crate::corpus::{LinkAnnotation, Utterance};
use crate::encoder::{encode_features, prepare_utterance, EncodedUtterance, UtteranceFeatures};
use crate::error::{Error, Result};
use crate::linker::{
    candidate_window, coherence_dot, pointing_distribution, score_from_parts, structural_features,
    topic_coherence, MentionMemory, PointingDistribution,
};
use crate::metrics::Clustering;
use crate::model::Model;
use crate::nn::tape::softmax;
use crate::union_find::UnionFind;

/// Position of the largest value, later positions winning ties. `skip` is never chosen.
fn argmax_recent(values: &[f64], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        if best.map_or(true, |b| v >= values[b]) {
            best = Some(k);
        }
    }
    best
}

/// Position of the predicted parent among `probs`, whose last entry is the
/// self candidate. Self is kept only when its probability reaches `threshold`;
/// otherwise the runner-up wins.
pub fn predict_position(probs: &[f64], threshold: f64) -> usize {
    let self_pos = probs.len() - 1;
    let top = argmax_recent(probs, None).expect("non-empty distribution");
    if top == self_pos && probs[top] < threshold {
        argmax_recent(probs, Some(self_pos)).unwrap_or(self_pos)
    } else {
        top
    }
}

pub fn predict_parent(dist: &PointingDistribution, threshold: f64) -> usize {
    dist.candidate_indices[predict_position(&dist.probs, threshold)]
}

/// Connected components of `links` over `0..n`. Every index needs a link as child.
pub fn build_threads(links: &[LinkAnnotation], n: usize) -> Result<Clustering> {
    let mut covered = vec![false; n];
    for l in links {
        if l.child >= n || l.parent > l.child {
            return Err(Error::Integrity(format!(
                "link {} -> {} outside 0..{n}",
                l.child, l.parent
            )));
        }
        covered[l.child] = true;
    }
    if let Some(missing) = covered.iter().position(|&c| !c) {
        return Err(Error::Integrity(format!("no link for utterance {missing}")));
    }
    let items: Vec<usize> = (0..n).collect();
    Ok(Clustering::from_links(&items, links))
}

/// Each utterance replies to the one before it.
pub fn baseline_previous(n: usize) -> Vec<LinkAnnotation> {
    (0..n)
        .map(|i| LinkAnnotation::new(i, i.saturating_sub(1)))
        .collect()
}

/// Thread bookkeeping of one stream.
#[derive(Debug, Clone, Default)]
pub struct ThreadState {
    uf: UnionFind,
    labels: Vec<usize>,
    links: Vec<LinkAnnotation>,
    threads: usize,
    pub memory: MentionMemory,
}

impl ThreadState {
    pub fn new() -> Self {
        ThreadState {
            uf: UnionFind::new(0),
            ..Default::default()
        }
    }

    /// Attaches the next index to `parent` and returns its thread label.
    pub fn attach(&mut self, parent: usize) -> usize {
        let child = self.uf.push();
        let label = if parent == child {
            self.threads += 1;
            self.threads - 1
        } else {
            self.uf.union(child, parent);
            self.labels[parent]
        };
        self.labels.push(label);
        self.links.push(LinkAnnotation::new(child, parent));
        label
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn links(&self) -> &[LinkAnnotation] {
        &self.links
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn clustering(&mut self) -> Clustering {
        let items: Vec<usize> = (0..self.len()).collect();
        Clustering::from_blocks(self.uf.blocks_of(&items)).expect("union-find blocks")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub index: usize,
    pub parent: usize,
    pub thread: usize,
    pub distribution: PointingDistribution,
}

/// One live stream over frozen parameters. The vocabulary copy grows with new speakers.
#[derive(Debug)]
pub struct Session<'m> {
    model: &'m Model,
    vocab: Vocabulary,
    state: ThreadState,
    buffer: VecDeque<EncodedUtterance>,
    threshold: f64,
}

impl<'m> Session<'m> {
    pub fn new(model: &'m Model, threshold: f64) -> Self {
        Session {
            model,
            vocab: model.vocab.clone(),
            state: ThreadState::new(),
            buffer: VecDeque::with_capacity(model.config.window + 1),
            threshold,
        }
    }

    pub fn next_index(&self) -> usize {
        self.state.len()
    }

    pub fn state(&self) -> &ThreadState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ThreadState {
        &mut self.state
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Buffered encodings, oldest first; never more than `window + 1`.
    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn step(&mut self, u: &Utterance) -> Result<Step> {
        if u.index != self.next_index() {
            return Err(Error::Contract(format!(
                "utterance {} arrived, expected {}",
                u.index,
                self.next_index()
            )));
        }
        let features = prepare_utterance(u, &mut self.vocab, true)?;
        self.buffer.push_back(encode_features(features, self.model));
        while self.buffer.len() > self.model.config.window + 1 {
            self.buffer.pop_front();
        }
        let window = self.buffer.make_contiguous();
        let enc_i = window.last().expect("just pushed");
        let dist = pointing_distribution(enc_i, window, &self.state.memory, self.model)?;
        let pos = predict_position(&dist.probs, self.threshold);
        let parent = dist.candidate_indices[pos];
        self.state
            .memory
            .record_link(&enc_i.features, &window[pos].features);
        let thread = self.state.attach(parent);
        Ok(Step {
            index: u.index,
            parent,
            thread,
            distribution: dist,
        })
    }
}

/// Parameter-dependent parts of decoding a file, computed once so that many
/// thresholds can be tried cheaply.
#[derive(Debug, Clone)]
pub struct PreparedDecode {
    pub features: Vec<UtteranceFeatures>,
    /// Text half of each candidate's score, one row per utterance over its window.
    pub text_scores: Vec<Vec<f64>>,
    pub window: usize,
}

pub fn prepare_decode(model: &Model, utterances: &[Utterance]) -> Result<PreparedDecode> {
    let mut vocab = model.vocab.clone();
    let w = model.w_link();
    let mut encoded: Vec<EncodedUtterance> = Vec::with_capacity(utterances.len());
    let mut text_scores = Vec::with_capacity(utterances.len());
    for (i, u) in utterances.iter().enumerate() {
        if u.index != i {
            return Err(Error::Contract(format!("utterance {} at position {i}", u.index)));
        }
        let enc = encode_features(prepare_utterance(u, &mut vocab, true)?, model);
        let mut row = Vec::new();
        for j in candidate_window(i, model.config.window) {
            let h_j = if j == i { &enc.token_reprs } else { &encoded[j].token_reprs };
            let text = if model.config.use_text {
                coherence_dot(w, &topic_coherence(&enc.token_reprs, h_j)?)
            } else {
                coherence_dot(w, &vec![0.0; model.config.coherence_dim()])
            };
            row.push(text);
        }
        text_scores.push(row);
        encoded.push(enc);
    }
    Ok(PreparedDecode {
        features: encoded.into_iter().map(|e| e.features).collect(),
        text_scores,
        window: model.config.window,
    })
}

/// Sequential pass over a prepared file; identical to stepping a [`Session`].
pub fn decode_prepared(w_link: &[f64], prep: &PreparedDecode, threshold: f64) -> Vec<LinkAnnotation> {
    let mut memory = MentionMemory::new();
    let mut links = Vec::with_capacity(prep.features.len());
    let mut scores = Vec::new();
    for (i, u_i) in prep.features.iter().enumerate() {
        let cands = candidate_window(i, prep.window);
        let lo = *cands.start();
        scores.clear();
        for (k, j) in cands.enumerate() {
            let s = structural_features(u_i, &prep.features[j], &memory);
            scores.push(score_from_parts(w_link, &s, prep.text_scores[i][k]));
        }
        let parent = lo + predict_position(&softmax(&scores), threshold);
        memory.record_link(u_i, &prep.features[parent]);
        links.push(LinkAnnotation::new(i, parent));
    }
    links
}

pub fn decode_file(model: &Model, utterances: &[Utterance], threshold: f64) -> Result<Vec<LinkAnnotation>> {
    let prep = prepare_decode(model, utterances)?;
    Ok(decode_prepared(model.w_link(), &prep, threshold))
}

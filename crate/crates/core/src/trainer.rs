//! Training loop, evaluation and self-link threshold tuning.
//!
//! A batch is a run of consecutive link targets from one file. Its encoder
//! pass is one tape over every utterance the batch can point at; each target
//! then gets its own small tape for features, scores and losses, and the
//! gradients it sends back into the token states are replayed through the
//! encoder tape at the end of the batch.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::vocab::Vocabulary;
use crate::corpus::ChatFile;
use crate::decoder::{decode_file, decode_prepared, prepare_decode, PreparedDecode};
use crate::encoder::{prepare_utterance, UtteranceFeatures};
use crate::error::{Error, Result};
use crate::linker::{candidate_window, coherence_node, structural_features, MentionMemory, STRUCT_DIM};
use crate::metrics::{score, Clustering, FileResult, MetricBundle};
use crate::model::{Model, ModelConfig};
use crate::nn::{adam_step, AdamConfig, Gradients, NodeId, OptimizerState, Tape, Tensor};
use crate::objectives::sample_pairs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub l2: f64,
    pub hidden: usize,
    pub embed_dim: usize,
    pub window: usize,
    pub lambda: f64,
    pub epochs: usize,
    /// Link targets per optimizer step.
    pub batch_utterances: usize,
    pub seed: u64,
    pub embedding_file: Option<PathBuf>,
    pub self_link_threshold_grid: Vec<f64>,
    /// Minimum count for a word to get its own id.
    pub min_count: usize,
    /// Negative pairs per positive pair.
    pub neg_ratio: f64,
    /// Global gradient norm cap.
    pub grad_clip: f64,
    pub use_text: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-5,
            dropout: 0.2,
            l2: 1e-7,
            hidden: 256,
            embed_dim: 128,
            window: 50,
            lambda: 1.0,
            epochs: 20,
            batch_utterances: 32,
            seed: 1,
            embedding_file: None,
            self_link_threshold_grid: default_grid(),
            min_count: 1,
            neg_ratio: 1.0,
            grad_clip: 5.0,
            use_text: true,
        }
    }
}

/// `{0.00, 0.05, ..., 0.95}`.
pub fn default_grid() -> Vec<f64> {
    (0..20).map(|k| k as f64 / 20.0).collect()
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        TrainConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let rates = [self.learning_rate, self.dropout, self.l2, self.lambda, self.grad_clip];
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return bad("rates, lambda and grad_clip must be finite and non-negative");
        }
        if self.dropout >= 1.0 {
            return bad("dropout must be below 1");
        }
        if self.window < 1 || self.batch_utterances < 1 || self.hidden < 1 || self.embed_dim < 1 {
            return bad("window, batch_utterances, hidden and embed_dim must be at least 1");
        }
        if !(self.neg_ratio > 0.0) {
            return bad("neg_ratio must be positive");
        }
        if self.self_link_threshold_grid.is_empty()
            || self
                .self_link_threshold_grid
                .iter()
                .any(|t| !(0.0..=1.0).contains(t))
        {
            return bad("self_link_threshold_grid must be a non-empty list of values in [0, 1]");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden,
            embed_dim: self.embed_dim,
            window: self.window,
            use_text: self.use_text,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            l2: self.l2,
            ..AdamConfig::default()
        }
    }
}

/// One utterance whose parent the model is trained to point at.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTarget {
    pub child: usize,
    /// First candidate index; candidates run `lo..=child`.
    pub lo: usize,
    /// Positions of gold parents among the candidates.
    pub gold: Vec<usize>,
    /// Structural features per candidate, read from the gold-driven memory.
    pub structural: Vec<[f64; STRUCT_DIM]>,
}

/// A file with everything that does not depend on parameters precomputed.
#[derive(Debug, Clone)]
pub struct TrainingFile {
    pub name: String,
    pub features: Vec<UtteranceFeatures>,
    /// Embedding rows per utterance.
    pub embed_ids: Vec<Vec<usize>>,
    pub targets: Vec<LinkTarget>,
    /// Annotated children with no gold parent inside the window.
    pub skipped: usize,
    /// Gold threads over the annotated children.
    pub gold: Clustering,
}

/// Runs the mention memory through the file with gold parents (the lowest
/// one when there are several) and records the features each target sees.
pub fn prepare_training_file(model: &Model, file: &ChatFile) -> Result<TrainingFile> {
    let mut vocab = model.vocab.clone();
    let features = file
        .utterances
        .iter()
        .map(|u| prepare_utterance(u, &mut vocab, false))
        .collect::<Result<Vec<_>>>()?;
    let embed_ids = features.iter().map(|f| model.embedding_ids(&f.token_ids)).collect();
    let gold_parents = file.gold_parents();
    let window = model.config.window;
    let mut memory = MentionMemory::new();
    let mut targets = Vec::new();
    let mut skipped = 0;
    for (i, u_i) in features.iter().enumerate() {
        let Some(parents) = gold_parents.get(&i) else { continue };
        let cands = candidate_window(i, window);
        let lo = *cands.start();
        let gold: Vec<usize> = parents.iter().filter(|&&p| p >= lo).map(|&p| p - lo).collect();
        if gold.is_empty() {
            skipped += 1;
        } else {
            let structural = cands
                .map(|j| structural_features(u_i, &features[j], &memory))
                .collect();
            targets.push(LinkTarget {
                child: i,
                lo,
                gold,
                structural,
            });
        }
        memory.record_link(u_i, &features[parents[0]]);
    }
    let items: Vec<usize> = gold_parents.keys().copied().collect();
    Ok(TrainingFile {
        name: file.name.clone(),
        features,
        embed_ids,
        targets,
        skipped,
        gold: Clustering::from_links(&items, &file.links),
    })
}

/// Sampled pairs keyed by their later utterance: `(earlier, same thread)`.
pub type PairMap = HashMap<usize, Vec<(usize, bool)>>;

pub fn pair_map(file: &TrainingFile, window: usize, ratio: f64, rng: &mut impl Rng) -> Result<PairMap> {
    let mut map: PairMap = HashMap::new();
    for p in sample_pairs(&file.gold, window, ratio, rng)? {
        map.entry(p.index_i).or_default().push((p.index_j, p.same));
    }
    Ok(map)
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// `(Σ link + λ Σ pair) / targets`.
    pub loss: f64,
    pub link_loss: f64,
    pub pair_loss: f64,
    pub targets: usize,
    pub pairs: usize,
    pub grads: Gradients,
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut impl Rng) -> Tensor {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    // keep an entry when a uniform 32-bit draw falls below `keep * 2^32`
    let cut = (keep * 4_294_967_296.0) as u64;
    let mut data = vec![0.0; rows * cols];
    for pair in data.chunks_mut(2) {
        let bits = rng.gen::<u64>();
        for (k, x) in pair.iter_mut().enumerate() {
            if (bits >> (32 * k)) & 0xffff_ffff < cut {
                *x = scale;
            }
        }
    }
    Tensor::from_vec(rows, cols, data)
}

/// Loss and gradients of one batch of targets from `file`.
pub fn batch_gradients(
    model: &Model,
    file: &TrainingFile,
    targets: &[LinkTarget],
    pairs: &PairMap,
    lambda: f64,
    dropout: f64,
    rng: &mut impl Rng,
) -> Result<BatchResult> {
    let mut grads = model.params.zero_grads();
    if targets.is_empty() {
        return Ok(BatchResult {
            loss: 0.0,
            link_loss: 0.0,
            pair_loss: 0.0,
            targets: 0,
            pairs: 0,
            grads,
        });
    }
    let cfg = &model.config;
    let span_lo = targets.iter().map(|t| t.lo).min().expect("non-empty");
    let span_hi = targets.iter().map(|t| t.child).max().expect("non-empty");

    // Encoder over the whole span.
    let mut enc = Tape::new();
    let mut h_nodes: Vec<NodeId> = Vec::new();
    if cfg.use_text {
        let seqs: Vec<Vec<usize>> = file.embed_ids[span_lo..=span_hi].to_vec();
        h_nodes = model.lstm.encode(&mut enc, &model.params, &seqs);
        if dropout > 0.0 {
            for h in &mut h_nodes {
                let [r, c] = enc.shape(*h);
                let mask = enc.constant(dropout_mask(r, c, dropout, rng));
                *h = enc.mul(*h, mask);
            }
        }
    }
    let mut dh: Vec<Option<Tensor>> = vec![None; h_nodes.len()];

    let scale = 1.0 / targets.len() as f64;
    let (mut link_sum, mut pair_sum, mut pair_count) = (0.0, 0.0, 0usize);
    let f_dim = cfg.feature_dim();
    for t in targets {
        let mut tape = Tape::new();
        let k = t.child - t.lo + 1;
        let inputs: Vec<NodeId> = if cfg.use_text {
            (t.lo..=t.child)
                .map(|j| tape.input(enc.value(h_nodes[j - span_lo]).clone()))
                .collect()
        } else {
            Vec::new()
        };
        let stacked = if cfg.use_text {
            let h_i = *inputs.last().expect("self candidate");
            let rows: Vec<NodeId> = (0..k)
                .map(|c| {
                    let s = tape.constant(Tensor::row_vector(t.structural[c].to_vec()));
                    let coh = coherence_node(&mut tape, h_i, inputs[c]);
                    tape.concat_cols(&[s, coh])
                })
                .collect();
            tape.concat_rows(&rows)
        } else {
            let mut m = Tensor::zeros(k, f_dim);
            for c in 0..k {
                m.row_mut(c)[..STRUCT_DIM].copy_from_slice(&t.structural[c]);
            }
            tape.constant(m)
        };
        let features = if dropout > 0.0 {
            let mask = tape.constant(dropout_mask(k, f_dim, dropout, rng));
            tape.mul(stacked, mask)
        } else {
            stacked
        };

        let w_link = tape.param(&model.params, model.w_link);
        let z = tape.matmul_t(features, false, w_link, true);
        let scores = tape.tanh(z);
        let row = tape.transpose(scores);
        let log_probs = tape.log_softmax_rows(row);
        let positions: Vec<(usize, usize)> = t.gold.iter().map(|&g| (0, g)).collect();
        let picked = tape.select_sum(log_probs, &positions);
        let link = tape.scale(picked, -1.0);
        link_sum += tape.value(link).item();

        let mut total = link;
        let child_pairs = pairs.get(&t.child).map(Vec::as_slice).unwrap_or(&[]);
        if lambda > 0.0 && !child_pairs.is_empty() {
            let w_pair = tape.param(&model.params, model.w_pair);
            let zp = tape.matmul_t(features, false, w_pair, true);
            let probs = tape.sigmoid(zp);
            let mut terms = Vec::with_capacity(child_pairs.len());
            for &(j, same) in child_pairs {
                let p = tape.slice_rows(probs, j - t.lo, 1);
                terms.push(tape.bce(p, if same { 1.0 } else { 0.0 }));
            }
            let stacked_terms = tape.concat_rows(&terms);
            let pair = tape.sum(stacked_terms);
            pair_sum += tape.value(pair).item();
            pair_count += child_pairs.len();
            let weighted = tape.scale(pair, lambda);
            total = tape.add(link, weighted);
        }
        let loss = tape.scale(total, scale);
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "{}: non-finite loss {value} at utterance {} (candidates {}..={}, gold positions {:?})",
                file.name, t.child, t.lo, t.child, t.gold
            )));
        }
        let back = tape.backward(loss);
        back.accumulate_params(&tape, &mut grads);
        for (c, &node) in inputs.iter().enumerate() {
            if let Some(g) = back.grad(node) {
                let slot = &mut dh[t.lo + c - span_lo];
                match slot {
                    Some(acc) => acc.add_assign(g),
                    None => *slot = Some(g.clone()),
                }
            }
        }
    }

    if cfg.use_text {
        let seeds: Vec<(NodeId, Tensor)> = h_nodes
            .iter()
            .zip(dh)
            .filter_map(|(&n, g)| g.map(|g| (n, g)))
            .collect();
        let back = enc.backward_seeded(seeds);
        back.accumulate_params(&enc, &mut grads);
    }

    Ok(BatchResult {
        loss: (link_sum + lambda * pair_sum) * scale,
        link_loss: link_sum * scale,
        pair_loss: pair_sum * scale,
        targets: targets.len(),
        pairs: pair_count,
        grads,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Mean joint loss per link target.
    pub train_loss: f64,
    pub link_loss: f64,
    pub pair_loss: f64,
    pub targets: usize,
    pub pairs: usize,
    pub skipped: usize,
    pub steps: usize,
    pub dev_link_f1: Option<f64>,
    pub dev_cluster_f1: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub parameters: usize,
    pub vocabulary: usize,
    pub total_seconds: f64,
}

/// Owns the model and optimizer during training.
#[derive(Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    optimizer: OptimizerState,
    rng: ChaCha8Rng,
    files: Vec<TrainingFile>,
    epoch: usize,
}

impl Trainer {
    /// Builds the vocabulary from `train`, initialises a model and prepares the files.
    pub fn new(config: TrainConfig, train: &[ChatFile]) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let vocab = Vocabulary::build(train.iter().flat_map(|f| &f.utterances), config.min_count);
        let mut model = Model::new(config.model_config(), vocab, &mut rng)?;
        if let Some(path) = &config.embedding_file {
            let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
            model.load_embeddings(&text)?;
        }
        Trainer::with_model(config, model, train, rng)
    }

    pub fn with_model(config: TrainConfig, model: Model, train: &[ChatFile], rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let files = train
            .iter()
            .map(|f| prepare_training_file(&model, f))
            .collect::<Result<Vec<_>>>()?;
        let optimizer = OptimizerState::new(&model.params, config.adam());
        Ok(Trainer {
            config,
            model,
            optimizer,
            rng,
            files,
            epoch: 0,
        })
    }

    pub fn files(&self) -> &[TrainingFile] {
        &self.files
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One pass over every file, files in shuffled order.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..self.files.len()).collect();
        order.shuffle(&mut self.rng);
        let mut rep = EpochReport {
            epoch: self.epoch + 1,
            train_loss: 0.0,
            link_loss: 0.0,
            pair_loss: 0.0,
            targets: 0,
            pairs: 0,
            skipped: 0,
            steps: 0,
            dev_link_f1: None,
            dev_cluster_f1: None,
            wall_seconds: 0.0,
        };
        for f in order {
            let file = &self.files[f];
            rep.skipped += file.skipped;
            let pairs = pair_map(file, self.config.window, self.config.neg_ratio, &mut self.rng)?;
            for batch in file.targets.chunks(self.config.batch_utterances) {
                let mut out = batch_gradients(
                    &self.model,
                    file,
                    batch,
                    &pairs,
                    self.config.lambda,
                    self.config.dropout,
                    &mut self.rng,
                )?;
                out.grads.clip_global_norm(self.config.grad_clip);
                if !out.grads.is_finite() {
                    return Err(Error::Numeric(format!(
                        "{}: non-finite gradient in batch ending at utterance {}",
                        file.name,
                        batch.last().map_or(0, |t| t.child)
                    )));
                }
                adam_step(&mut self.model.params, &out.grads, &mut self.optimizer)?;
                let n = out.targets as f64;
                rep.train_loss += out.loss * n;
                rep.link_loss += out.link_loss * n;
                rep.pair_loss += out.pair_loss * n;
                rep.targets += out.targets;
                rep.pairs += out.pairs;
                rep.steps += 1;
            }
        }
        if rep.targets > 0 {
            let n = rep.targets as f64;
            rep.train_loss /= n;
            rep.link_loss /= n;
            rep.pair_loss /= n;
        }
        self.epoch += 1;
        rep.wall_seconds = start.elapsed().as_secs_f64();
        Ok(rep)
    }

    fn extra(&self) -> serde_json::Value {
        serde_json::json!({ "train": self.config, "epoch": self.epoch })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.model.save(path, self.extra())
    }

    /// Trains for `config.epochs`, scoring `dev` after each epoch and keeping
    /// the parameters with the best dev cluster F1 (the last epoch without dev).
    /// With `checkpoint_dir` set, `last.ckpt` and `best.ckpt` are written there.
    pub fn train(
        &mut self,
        dev: Option<&[ChatFile]>,
        checkpoint_dir: Option<&Path>,
        mut on_epoch: impl FnMut(&EpochReport),
    ) -> Result<TrainReport> {
        let start = Instant::now();
        if let Some(dir) = checkpoint_dir {
            fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        }
        let mut report = TrainReport {
            parameters: self.model.params.num_scalars(),
            vocabulary: self.model.vocab.len(),
            ..TrainReport::default()
        };
        let mut best: Option<(f64, Model)> = None;
        for _ in 0..self.config.epochs {
            let mut rep = self.run_epoch()?;
            let dev_f1 = match dev {
                Some(files) => {
                    let m = evaluate(&self.model, files, self.model.threshold)?;
                    rep.dev_link_f1 = Some(m.link.f1);
                    rep.dev_cluster_f1 = Some(m.exact_match.f1);
                    m.exact_match.f1
                }
                None => f64::NEG_INFINITY,
            };
            let improved = match &best {
                None => true,
                Some((b, _)) => dev.is_none() || dev_f1 > *b,
            };
            if let Some(dir) = checkpoint_dir {
                self.save(&dir.join("last.ckpt"))?;
                if improved {
                    self.save(&dir.join("best.ckpt"))?;
                }
            }
            if improved {
                best = Some((dev_f1, self.model.clone()));
                report.best_epoch = rep.epoch;
            }
            on_epoch(&rep);
            report.epochs.push(rep);
        }
        if let Some((_, m)) = best {
            self.model = m;
        }
        report.total_seconds = start.elapsed().as_secs_f64();
        Ok(report)
    }
}

fn is_system(file: &ChatFile) -> Vec<bool> {
    file.utterances.iter().map(|u| u.is_system).collect()
}

/// Decodes every file online and scores it against its gold links.
pub fn evaluate(model: &Model, files: &[ChatFile], threshold: f64) -> Result<MetricBundle> {
    let predicted = files
        .iter()
        .map(|f| decode_file(model, &f.utterances, threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok(score_files(model.config.window, files, &predicted))
}

pub fn score_files(window: usize, files: &[ChatFile], predicted: &[Vec<crate::corpus::LinkAnnotation>]) -> MetricBundle {
    let systems: Vec<Vec<bool>> = files.iter().map(is_system).collect();
    let results: Vec<FileResult<'_>> = files
        .iter()
        .zip(predicted)
        .zip(&systems)
        .map(|((f, p), s)| FileResult {
            predicted: p,
            gold: &f.links,
            is_system: s,
            window,
        })
        .collect();
    score(&results)
}

/// Fraction of annotated utterances whose predicted parent is a gold parent.
pub fn link_accuracy(model: &Model, files: &[ChatFile], threshold: f64) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for f in files {
        let pred = decode_file(model, &f.utterances, threshold)?;
        for (child, parents) in f.gold_parents() {
            total += 1;
            if parents.contains(&pred[child].parent) {
                hit += 1;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub best: f64,
    pub best_cluster_f1: f64,
    /// `(threshold, cluster F1)` in grid order.
    pub results: Vec<(f64, f64)>,
}

/// Picks the grid value with the highest dev cluster F1, smaller values winning ties.
pub fn tune_self_link_threshold(model: &Model, dev: &[ChatFile], grid: &[f64]) -> Result<ThresholdSweep> {
    if grid.is_empty() || grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Contract(
            "threshold grid must be non-empty with values in [0, 1]".into(),
        ));
    }
    let prepared = dev
        .iter()
        .map(|f| prepare_decode(model, &f.utterances))
        .collect::<Result<Vec<PreparedDecode>>>()?;
    let mut results = Vec::with_capacity(grid.len());
    for &tau in grid {
        let predicted: Vec<_> = prepared
            .iter()
            .map(|p| decode_prepared(model.w_link(), p, tau))
            .collect();
        let f1 = score_files(model.config.window, dev, &predicted).exact_match.f1;
        results.push((tau, f1));
    }
    let mut order: Vec<&(f64, f64)> = results.iter().collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = *order[0];
    for &&(tau, f1) in &order[1..] {
        if f1 > best.1 {
            best = (tau, f1);
        }
    }
    Ok(ThresholdSweep {
        best: best.0,
        best_cluster_f1: best.1,
        results,
    })
}

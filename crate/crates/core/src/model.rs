//! The parameter set of the reply linker and its checkpoint form.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::vocab::{Vocabulary, UNK};
use crate::error::{Error, Result};
use crate::linker::STRUCT_DIM;
use crate::nn::checkpoint::{read_checkpoint, write_checkpoint};
use crate::nn::params::{uniform, ParamId, ParameterStore};
use crate::nn::{BiLstm, LstmParams, Tensor};

/// Bound of the uniform initialisation of word embeddings.
pub const EMBED_INIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Bi-LSTM state size per direction.
    pub hidden: usize,
    pub embed_dim: usize,
    /// Number of predecessors eligible as parents.
    pub window: usize,
    /// When false the text block of every feature vector is zero.
    #[serde(default = "default_true")]
    pub use_text: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 256,
            embed_dim: 128,
            window: 50,
            use_text: true,
        }
    }
}

impl ModelConfig {
    /// Width of the pooled text block: two sides, mean and max, four enhanced blocks of `2H`.
    pub fn coherence_dim(&self) -> usize {
        32 * self.hidden
    }

    pub fn feature_dim(&self) -> usize {
        STRUCT_DIM + self.coherence_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed_dim == 0 || self.window == 0 {
            return Err(Error::Config(
                "hidden, embed_dim and window must all be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParameterStore,
    pub lstm: BiLstm,
    pub w_link: ParamId,
    pub w_pair: ParamId,
    /// Self-link threshold used when decoding.
    pub threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
    threshold: f64,
    vocab: Vocabulary,
    #[serde(default)]
    extra: Value,
}

impl Model {
    /// Fresh parameters: embeddings uniform in `±0.05`, LSTM weights and
    /// output vectors uniform in `±1/sqrt(fan)`.
    pub fn new(config: ModelConfig, vocab: Vocabulary, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let (h, e, f) = (config.hidden, config.embed_dim, config.feature_dim());
        let mut store = ParameterStore::new();
        store.insert("embedding", uniform(vocab.len(), e, EMBED_INIT, rng))?;
        LstmParams::register(&mut store, "lstm.fwd", e, h, rng)?;
        LstmParams::register(&mut store, "lstm.bwd", e, h, rng)?;
        store.insert("empty", uniform(1, 2 * h, 1.0 / (h as f64).sqrt(), rng))?;
        let bound = 1.0 / (f as f64).sqrt();
        store.insert("w_link", uniform(1, f, bound, rng))?;
        store.insert("w_pair", uniform(1, f, bound, rng))?;
        Model::from_params(config, vocab, store, 0.0)
    }

    /// Binds a store by parameter name and checks every shape.
    pub fn from_params(
        config: ModelConfig,
        vocab: Vocabulary,
        params: ParameterStore,
        threshold: f64,
    ) -> Result<Self> {
        config.validate()?;
        let (h, e, f) = (config.hidden, config.embed_dim, config.feature_dim());
        let expect = |name: &str, rows: usize, cols: usize| -> Result<ParamId> {
            let id = params.expect_id(name)?;
            let shape = params.get(id).shape();
            if shape != [rows, cols] {
                return Err(Error::Checkpoint(format!(
                    "`{name}` has shape {shape:?}, expected [{rows}, {cols}]"
                )));
            }
            Ok(id)
        };
        let embedding = expect("embedding", vocab.len(), e)?;
        let lstm_dir = |prefix: &str| -> Result<LstmParams> {
            Ok(LstmParams {
                w_x: expect(&format!("{prefix}.w_x"), e, 4 * h)?,
                w_h: expect(&format!("{prefix}.w_h"), h, 4 * h)?,
                bias: expect(&format!("{prefix}.bias"), 1, 4 * h)?,
            })
        };
        let lstm = BiLstm {
            embedding,
            forward: lstm_dir("lstm.fwd")?,
            backward: lstm_dir("lstm.bwd")?,
            empty: expect("empty", 1, 2 * h)?,
            hidden: h,
        };
        let w_link = expect("w_link", 1, f)?;
        let w_pair = expect("w_pair", 1, f)?;
        if params.len() != 10 {
            return Err(Error::Checkpoint(format!(
                "expected 10 parameters, found {}",
                params.len()
            )));
        }
        Ok(Model {
            config,
            vocab,
            params,
            lstm,
            w_link,
            w_pair,
            threshold,
        })
    }

    /// Rows of the embedding table. Vocabulary ids past it fall back to unknown.
    pub fn embedding_rows(&self) -> usize {
        self.params.get(self.lstm.embedding).rows()
    }

    /// Maps vocabulary ids onto embedding rows.
    pub fn embedding_ids(&self, ids: &[usize]) -> Vec<usize> {
        let rows = self.embedding_rows();
        ids.iter().map(|&i| if i < rows { i } else { UNK }).collect()
    }

    pub fn w_link(&self) -> &[f64] {
        self.params.get(self.w_link).data()
    }

    pub fn w_pair(&self) -> &[f64] {
        self.params.get(self.w_pair).data()
    }

    /// Overwrites embedding rows of vocabulary tokens found in a vector file.
    /// Returns how many rows were set.
    pub fn load_embeddings(&mut self, text: &str) -> Result<usize> {
        let dim = self.config.embed_dim;
        let table = self.params.get_mut(self.lstm.embedding);
        let mut set = 0;
        for (n, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Vec<f64> = fields
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format {
                    line: n + 1,
                    message: format!("bad vector component: {e}"),
                })?;
            if values.len() != dim {
                return Err(Error::Format {
                    line: n + 1,
                    message: format!("vector has {} components, expected {dim}", values.len()),
                });
            }
            if let Some(id) = self.vocab.get(token) {
                if id < table.rows() {
                    table.row_mut(id).copy_from_slice(&values);
                    set += 1;
                }
            }
        }
        Ok(set)
    }

    /// Serializes the model; `extra` is stored verbatim (e.g. the training config).
    pub fn to_bytes(&self, extra: Value) -> Result<Vec<u8>> {
        let meta = Meta {
            model: self.config,
            threshold: self.threshold,
            vocab: self.vocab.clone(),
            extra,
        };
        let mut out = Vec::new();
        write_checkpoint(&mut out, serde_json::to_value(meta)?, &self.params)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, Value)> {
        let (meta, params) = read_checkpoint(bytes)?;
        let meta: Meta = serde_json::from_value(meta)
            .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        let model = Model::from_params(meta.model, meta.vocab, params, meta.threshold)?;
        Ok((model, meta.extra))
    }

    pub fn save(&self, path: &Path, extra: Value) -> Result<()> {
        let bytes = self.to_bytes(extra)?;
        let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        std::io::Write::write_all(&mut w, &bytes).map_err(|e| Error::file(path, e))?;
        std::io::Write::flush(&mut w).map_err(|e| Error::file(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, Value)> {
        let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
        Model::from_bytes(&bytes)
    }

    pub fn embedding(&self) -> &Tensor {
        self.params.get(self.lstm.embedding)
    }
}

//! Timestamp, speaker and text encoding of single utterances.

use crate::corpus::vocab::Vocabulary;
use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nn::{Tape, Tensor};

/// `[hour, minute]` as reals, unscaled.
pub fn encode_timestamp(hour: u32, minute: u32) -> Result<[f64; 2]> {
    if hour > 23 || minute > 59 {
        return Err(Error::Contract(format!(
            "timestamp {hour}:{minute} out of range"
        )));
    }
    Ok([hour as f64, minute as f64])
}

/// Vocabulary id of a speaker, appending unseen names when `allow_grow` is set.
pub fn encode_speaker(name: &str, vocab: &mut Vocabulary, allow_grow: bool) -> Result<usize> {
    if name.is_empty() {
        return Err(Error::Contract("empty speaker name".into()));
    }
    Ok(vocab.speaker_id(name, allow_grow))
}

/// Everything about an utterance the linker needs except the text encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFeatures {
    pub index: usize,
    pub time_vec: [f64; 2],
    pub speaker_id: usize,
    /// Vocabulary ids of the message tokens. May exceed the embedding table
    /// for speakers added during a session.
    pub token_ids: Vec<usize>,
    pub is_system: bool,
}

/// Resolves speaker and token ids. The speaker is looked up first, so a
/// message naming its own new speaker sees the fresh id.
pub fn prepare_utterance(
    u: &Utterance,
    vocab: &mut Vocabulary,
    allow_grow: bool,
) -> Result<UtteranceFeatures> {
    let time_vec = encode_timestamp(u.time.hour.into(), u.time.minute.into())?;
    let speaker_id = encode_speaker(&u.speaker, vocab, allow_grow)?;
    Ok(UtteranceFeatures {
        index: u.index,
        time_vec,
        speaker_id,
        token_ids: vocab.ids(&u.tokens),
        is_system: u.is_system,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedUtterance {
    pub features: UtteranceFeatures,
    /// `len x 2H` Bi-LSTM states, or the single empty-message row.
    pub token_reprs: Tensor,
}

impl EncodedUtterance {
    pub fn index(&self) -> usize {
        self.features.index
    }
}

/// Bi-LSTM states of one id sequence, without dropout.
pub fn encode_tokens(model: &Model, token_ids: &[usize]) -> Tensor {
    let mut tape = Tape::new();
    let ids = model.embedding_ids(token_ids);
    let out = model.lstm.encode(&mut tape, &model.params, &[ids]);
    tape.value(out[0]).clone()
}

/// Full encoding of one utterance. Each utterance is encoded on its own, so
/// identical messages get identical representations.
pub fn encode_utterance(
    u: &Utterance,
    vocab: &mut Vocabulary,
    allow_grow: bool,
    model: &Model,
) -> Result<EncodedUtterance> {
    let features = prepare_utterance(u, vocab, allow_grow)?;
    Ok(encode_features(features, model))
}

pub fn encode_features(features: UtteranceFeatures, model: &Model) -> EncodedUtterance {
    let token_reprs = if model.config.use_text {
        encode_tokens(model, &features.token_ids)
    } else {
        Tensor::zeros(features.token_ids.len().max(1), 2 * model.config.hidden)
    };
    EncodedUtterance {
        features,
        token_reprs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_log, vocab::UNK};
    use crate::model::ModelConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(log: &str) -> Model {
        let vocab = Vocabulary::build(&parse_log(log).unwrap(), 1);
        let config = ModelConfig {
            hidden: 4,
            embed_dim: 3,
            window: 5,
            use_text: true,
        };
        Model::new(config, vocab, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn timestamps_are_raw() {
        assert_eq!(encode_timestamp(2, 26).unwrap(), [2.0, 26.0]);
        assert_eq!(encode_timestamp(0, 0).unwrap(), [0.0, 0.0]);
        assert_eq!(encode_timestamp(23, 59).unwrap(), [23.0, 59.0]);
        assert!(matches!(encode_timestamp(24, 0), Err(Error::Contract(_))));
        assert!(matches!(encode_timestamp(0, 60), Err(Error::Contract(_))));
    }

    #[test]
    fn speaker_ids() {
        let mut v = Vocabulary::build(&parse_log("[00:00] <zelot> hi").unwrap(), 1);
        let z = v.id("zelot");
        assert_eq!(encode_speaker("zelot", &mut v, false).unwrap(), z);
        assert_eq!(encode_speaker("ghost", &mut v, false).unwrap(), UNK);
        let n = v.len();
        assert_eq!(encode_speaker("ghost", &mut v, true).unwrap(), n);
        assert_eq!(v.len(), n + 1);
    }

    #[test]
    fn figure_line_encoding() {
        let log = "[02:26] <zelot> hi, where can i get some help in regards to issues with mount?";
        let m = model(log);
        let u = &parse_log(log).unwrap()[0];
        let mut v = m.vocab.clone();
        let e = encode_utterance(u, &mut v, false, &m).unwrap();
        assert_eq!(e.features.time_vec, [2.0, 26.0]);
        assert_eq!(e.features.speaker_id, m.vocab.id("zelot"));
        assert_eq!(e.token_reprs.shape(), [u.tokens.len(), 8]);
    }

    #[test]
    fn system_and_punctuation_only_messages() {
        let log = "[02:26] === zelot joined the channel\n[02:27] <a> ?!\n[02:28] <b> \n";
        let m = model(log);
        let us = parse_log(log).unwrap();
        let mut v = m.vocab.clone();
        let sys = encode_utterance(&us[0], &mut v, false, &m).unwrap();
        assert!(sys.features.is_system);
        assert_eq!(sys.features.speaker_id, m.vocab.id("==="));
        let empty = encode_utterance(&us[2], &mut v, false, &m).unwrap();
        assert_eq!(&empty.token_reprs, m.params.get(m.lstm.empty));
    }

    #[test]
    fn identical_messages_encode_identically() {
        let log = "[00:00] <a> same words here\n[00:05] <b> same words here";
        let m = model(log);
        let us = parse_log(log).unwrap();
        let mut v = m.vocab.clone();
        let x = encode_utterance(&us[0], &mut v, false, &m).unwrap();
        let y = encode_utterance(&us[1], &mut v, false, &m).unwrap();
        assert_eq!(x.token_reprs, y.token_reprs);
    }
}

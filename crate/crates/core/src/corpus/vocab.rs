//! Shared word and speaker vocabulary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Utterance;

pub const UNK: usize = 0;
pub const PAD: usize = 1;
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";

/// Words and case-folded speaker names in one id space.
///
/// Serializes as the token list in id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Only the two reserved entries.
    pub fn empty() -> Self {
        Vocabulary::from_ordered(Vec::new()).expect("reserved tokens are distinct")
    }

    /// Builds a vocabulary from `tokens`, which must not contain the reserved entries.
    fn from_ordered(tokens: Vec<String>) -> Result<Self, String> {
        let mut all = vec![UNK_TOKEN.to_string(), PAD_TOKEN.to_string()];
        all.extend(tokens);
        Vocabulary::try_from(all)
    }

    /// Counts message tokens and speaker names (case-folded), keeps tokens
    /// seen at least `min_count` times plus every speaker, and orders ids by
    /// descending count then lexicographically.
    pub fn build<'a>(utterances: impl IntoIterator<Item = &'a Utterance>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut speakers: Vec<String> = Vec::new();
        for u in utterances {
            for t in &u.tokens {
                *counts.entry(t.clone()).or_default() += 1;
            }
            let s = u.speaker.to_lowercase();
            *counts.entry(s.clone()).or_default() += 1;
            speakers.push(s);
        }
        speakers.sort_unstable();
        speakers.dedup();
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| {
                t != UNK_TOKEN
                    && t != PAD_TOKEN
                    && (*c >= min_count.max(1) || speakers.binary_search(t).is_ok())
            })
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Vocabulary::from_ordered(kept.into_iter().map(|(t, _)| t).collect())
            .expect("counted tokens are distinct")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// Id of a speaker name after case folding, appending it when `allow_grow` is set.
    pub fn speaker_id(&mut self, name: &str, allow_grow: bool) -> usize {
        let folded = name.to_lowercase();
        match self.get(&folded) {
            Some(id) => id,
            None if allow_grow => self.push(folded),
            None => UNK,
        }
    }

    /// Read-only speaker lookup.
    pub fn lookup_speaker(&self, name: &str) -> usize {
        self.id(&name.to_lowercase())
    }

    fn push(&mut self, token: String) -> usize {
        let id = self.tokens.len();
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = String;

    fn try_from(tokens: Vec<String>) -> Result<Self, String> {
        if tokens.len() < 2 || tokens[UNK] != UNK_TOKEN || tokens[PAD] != PAD_TOKEN {
            return Err("vocabulary must start with the reserved tokens".into());
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(format!("duplicate vocabulary entry `{t}`"));
            }
        }
        Ok(Vocabulary { tokens, index })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

//! Same-conversation classifier and the joint objective.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Clustering;
use crate::nn::tape::{sigmoid, BCE_CLAMP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairSample {
    /// The later utterance.
    pub index_i: usize,
    pub index_j: usize,
    pub same: bool,
}

/// `sigmoid(w_pair · f)`.
pub fn pair_probability(feature: &[f64], w_pair: &[f64]) -> f64 {
    sigmoid(feature.iter().zip(w_pair).map(|(a, b)| a * b).sum())
}

/// Binary cross entropy with the probability clamped away from 0 and 1.
pub fn pair_loss(prob: f64, same: bool) -> f64 {
    let p = prob.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if same {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Every same-thread pair within `window` of each other, plus `ratio`
/// uniformly drawn cross-thread pairs per positive. Sorted by `(i, j)`.
pub fn sample_pairs(gold: &Clustering, window: usize, ratio: f64, rng: &mut impl Rng) -> Result<Vec<PairSample>> {
    if !(ratio > 0.0) {
        return Err(Error::Contract(format!("pair ratio {ratio} must be positive")));
    }
    let label = gold.assignment();
    let items = gold.items();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (a, &i) in items.iter().enumerate() {
        for &j in items[..a].iter().rev() {
            if i - j > window {
                break;
            }
            let same = label[&i] == label[&j];
            let s = PairSample {
                index_i: i,
                index_j: j,
                same,
            };
            if same {
                positives.push(s);
            } else {
                negatives.push(s);
            }
        }
    }
    let want = ((positives.len() as f64) * ratio).round() as usize;
    let take = want.min(negatives.len());
    let mut out = positives;
    out.extend(sample(rng, negatives.len(), take).into_iter().map(|k| negatives[k]));
    out.sort_unstable();
    Ok(out)
}

/// `L_link + λ L_pair`.
pub fn joint_loss(link: f64, pair: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("lambda {lambda} must be non-negative")));
    }
    Ok(link + lambda * pair)
}

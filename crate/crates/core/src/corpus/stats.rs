//! Link and conversation statistics of an annotated split.

use serde::{Deserialize, Serialize};

use super::ChatFile;
use crate::error::{Error, Result};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub files: usize,
    pub annotated_utterances: usize,
    pub total_links: usize,
    pub total_conversations: usize,
    pub avg_link_distance: f64,
    pub median_link_distance: usize,
    pub avg_parents_per_utterance: f64,
    pub avg_utterances_per_conversation: f64,
    pub median_utterances_per_conversation: usize,
}

/// Lower median of a non-empty multiset, 0 when empty.
pub fn lower_median(values: &mut [usize]) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Conversations are the connected components of the annotated indices of
/// each file under undirected link union.
pub fn corpus_stats(files: &[ChatFile]) -> Result<CorpusStats> {
    let mut distances = Vec::new();
    let mut sizes = Vec::new();
    let mut children = 0usize;
    for f in files {
        let n = f.utterances.len();
        if let Some(l) = f.links.iter().find(|l| l.child >= n || l.parent > l.child) {
            return Err(Error::Integrity(format!(
                "{}: link {} -> {} does not fit a log of {n} utterances",
                f.name, l.child, l.parent
            )));
        }
        let mut uf = UnionFind::new(n);
        let mut nodes = Vec::with_capacity(2 * f.links.len());
        for l in &f.links {
            distances.push(l.distance());
            uf.union(l.child, l.parent);
            nodes.push(l.child);
            nodes.push(l.parent);
        }
        sizes.extend(uf.blocks_of(&nodes).iter().map(Vec::len));
        children += f.gold_parents().len();
    }

    let total_links = distances.len();
    let mean = |sum: usize, n: usize| if n == 0 { 0.0 } else { sum as f64 / n as f64 };
    Ok(CorpusStats {
        files: files.len(),
        annotated_utterances: children,
        total_links,
        total_conversations: sizes.len(),
        avg_link_distance: mean(distances.iter().sum(), total_links),
        median_link_distance: lower_median(&mut distances),
        avg_parents_per_utterance: mean(total_links, children),
        avg_utterances_per_conversation: mean(sizes.iter().sum(), sizes.len()),
        median_utterances_per_conversation: lower_median(&mut sizes),
    })
}

//! Link-level and cluster-level scores.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::LinkAnnotation;
use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// A partition of a set of item indices into threads.
///
/// Blocks are kept sorted internally and ordered by their smallest member,
/// so two equal partitions compare equal whatever their construction order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    blocks: Vec<Vec<usize>>,
}

impl Clustering {
    /// Fails when an item occurs twice or a block is empty.
    pub fn from_blocks(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut blocks = blocks;
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::Contract("empty block in clustering".into()));
            }
            b.sort_unstable();
            for &x in b.iter() {
                if !seen.insert(x) {
                    return Err(Error::Contract(format!("item {x} occurs in two blocks")));
                }
            }
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Clustering { blocks })
    }

    /// Groups `items` by label.
    pub fn from_labels(items: &[usize], labels: &[usize]) -> Result<Self> {
        if items.len() != labels.len() {
            return Err(Error::Contract("items and labels differ in length".into()));
        }
        let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (&x, &l) in items.iter().zip(labels) {
            by_label.entry(l).or_default().push(x);
        }
        Clustering::from_blocks(by_label.into_values().collect())
    }

    /// Connected components of `links` restricted to `items`.
    ///
    /// Links may reach indices outside `items`; they still connect what they join.
    pub fn from_links(items: &[usize], links: &[LinkAnnotation]) -> Self {
        let n = items
            .iter()
            .copied()
            .chain(links.iter().map(|l| l.child))
            .max()
            .map_or(0, |m| m + 1);
        let mut uf = UnionFind::new(n);
        for l in links {
            uf.union(l.child, l.parent);
        }
        Clustering::from_blocks(uf.blocks_of(items)).expect("union-find blocks are disjoint")
    }

    pub fn singletons(items: &[usize]) -> Self {
        Clustering::from_blocks(items.iter().map(|&x| vec![x]).collect())
            .expect("distinct items")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_items(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn items(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    /// Block position of each item.
    pub fn assignment(&self) -> HashMap<usize, usize> {
        let mut m = HashMap::new();
        for (b, block) in self.blocks.iter().enumerate() {
            for &x in block {
                m.insert(x, b);
            }
        }
        m
    }

    /// Shifts every item by `offset`, used to pool several files into one item space.
    pub fn shifted(&self, offset: usize) -> Self {
        Clustering {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().map(|x| x + offset).collect())
                .collect(),
        }
    }

    /// Disjoint union with `other`, whose items must not overlap.
    pub fn merged(&self, other: &Clustering) -> Result<Self> {
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        Clustering::from_blocks(blocks)
    }
}

/// Contingency counts of two clusterings over the same items.
fn contingency(x: &Clustering, y: &Clustering) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>, usize)> {
    let ay = y.assignment();
    if x.num_items() != y.num_items() {
        return Err(Error::Contract("clusterings cover different items".into()));
    }
    // ordered so float sums over the cells are reproducible
    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (bx, block) in x.blocks.iter().enumerate() {
        for item in block {
            let by = *ay
                .get(item)
                .ok_or_else(|| Error::Contract(format!("item {item} missing from one clustering")))?;
            *cells.entry((bx, by)).or_default() += 1;
        }
    }
    let a: Vec<usize> = x.blocks.iter().map(Vec::len).collect();
    let b: Vec<usize> = y.blocks.iter().map(Vec::len).collect();
    Ok((cells.into_values().collect(), a, b, x.num_items()))
}

/// `1 - VI / ln n` with natural logarithms; 1 when fewer than two items.
pub fn scaled_vi(x: &Clustering, y: &Clustering) -> Result<f64> {
    let (cells, a, b, n) = contingency(x, y)?;
    if n < 2 {
        return Ok(1.0);
    }
    let nf = n as f64;
    // VI = H(X) + H(Y) - 2 I(X;Y) = Σ n_ij/n (ln(a_i/n_ij) + ln(b_j/n_ij)) over the joint cells.
    let h = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let joint = h(&cells);
    let vi = (2.0 * joint - h(&a) - h(&b)).max(0.0);
    Ok(1.0 - vi / nf.ln())
}

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand index. A zero denominator gives 1 for equal clusterings and 0 otherwise.
pub fn ari(x: &Clustering, y: &Clustering) -> Result<f64> {
    let (cells, a, b, n) = contingency(x, y)?;
    let index: f64 = cells.iter().map(|&c| choose2(c)).sum();
    let sa: f64 = a.iter().map(|&c| choose2(c)).sum();
    let sb: f64 = b.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = 0.5 * (sa + sb);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if x == y { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Empty denominators give 0.
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Prf::from_pr(ratio(correct, predicted), ratio(correct, gold))
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Counts behind a [`Prf`], summable across files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.correct, self.predicted, self.gold)
    }

    pub fn add(&mut self, other: Counts) {
        self.correct += other.correct;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }
}

pub fn link_counts(predicted: &[LinkAnnotation], gold: &[LinkAnnotation]) -> Counts {
    let gold_set: HashSet<&LinkAnnotation> = gold.iter().collect();
    let pred_set: HashSet<&LinkAnnotation> = predicted.iter().collect();
    Counts {
        correct: pred_set.iter().filter(|l| gold_set.contains(*l)).count(),
        predicted: pred_set.len(),
        gold: gold_set.len(),
    }
}

pub fn link_prf(predicted: &[LinkAnnotation], gold: &[LinkAnnotation]) -> Prf {
    link_counts(predicted, gold).prf()
}

pub fn self_link_counts(predicted: &[LinkAnnotation], gold: &[LinkAnnotation]) -> Counts {
    let keep = |ls: &[LinkAnnotation]| -> Vec<LinkAnnotation> {
        ls.iter().copied().filter(LinkAnnotation::is_self).collect()
    };
    link_counts(&keep(predicted), &keep(gold))
}

pub fn self_link_prf(predicted: &[LinkAnnotation], gold: &[LinkAnnotation]) -> Prf {
    self_link_counts(predicted, gold).prf()
}

/// Why a gold self-link exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfLinkKind {
    /// A channel notice.
    System,
    /// Opens a conversation that later messages reply to.
    Start,
    /// Nobody replies to it.
    Isolated,
}

/// Classifies each gold self-link of a file.
pub fn self_link_kinds(gold: &[LinkAnnotation], is_system: &[bool]) -> Vec<(usize, SelfLinkKind)> {
    let replied: HashSet<usize> = gold
        .iter()
        .filter(|l| !l.is_self())
        .map(|l| l.parent)
        .collect();
    let mut out: Vec<(usize, SelfLinkKind)> = gold
        .iter()
        .filter(|l| l.is_self())
        .map(|l| {
            let kind = if is_system.get(l.child).copied().unwrap_or(false) {
                SelfLinkKind::System
            } else if replied.contains(&l.child) {
                SelfLinkKind::Start
            } else {
                SelfLinkKind::Isolated
            };
            (l.child, kind)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Perfectly reproduced threads, ignoring single-message threads on both sides.
/// Two all-singleton clusterings score 1.
pub fn exact_match(pred: &Clustering, gold: &Clustering) -> Prf {
    let c = exact_match_counts(pred, gold);
    if c.predicted == 0 && c.gold == 0 {
        return Prf::from_pr(1.0, 1.0);
    }
    c.prf()
}

pub fn exact_match_counts(pred: &Clustering, gold: &Clustering) -> Counts {
    let multi = |c: &Clustering| -> HashSet<Vec<usize>> {
        c.blocks().iter().filter(|b| b.len() > 1).cloned().collect()
    };
    let (p, g) = (multi(pred), multi(gold));
    Counts {
        correct: p.intersection(&g).count(),
        predicted: p.len(),
        gold: g.len(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KindRecall {
    pub gold: usize,
    pub predicted_self: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub link: Prf,
    pub self_link: Prf,
    pub scaled_vi: f64,
    pub ari: f64,
    pub exact_match: Prf,
    /// Recall of gold self-links by kind.
    pub self_link_kinds: BTreeMap<SelfLinkKind, KindRecall>,
    /// Annotated utterances scored.
    pub items: usize,
    /// Gold links no parent choice could reach because they lie beyond the window.
    pub out_of_window_links: usize,
}

impl MetricBundle {
    /// Aligned text table.
    pub fn table(&self) -> String {
        let pct = |x: f64| format!("{:.1}", 100.0 * x);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<34} | {:<20} | {:<20}",
            "cluster (VI, ARI, exact match)", "link", "self-link"
        );
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
            "VI", "ARI", "P", "R", "F1", "P", "R", "F1", "P", "R", "F1"
        );
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}",
            pct(self.scaled_vi),
            pct(self.ari),
            pct(self.exact_match.precision),
            pct(self.exact_match.recall),
            pct(self.exact_match.f1),
            pct(self.link.precision),
            pct(self.link.recall),
            pct(self.link.f1),
            pct(self.self_link.precision),
            pct(self.self_link.recall),
            pct(self.self_link.f1),
        );
        for (kind, r) in &self.self_link_kinds {
            let _ = writeln!(
                s,
                "self-link {:<9} {:>5}/{:<5} recall {}",
                format!("{kind:?}").to_lowercase(),
                r.predicted_self,
                r.gold,
                pct(r.recall)
            );
        }
        let _ = writeln!(
            s,
            "items {}  out-of-window gold links {}",
            self.items, self.out_of_window_links
        );
        s
    }
}

/// Predictions and gold for one file, the unit [`score`] aggregates over.
#[derive(Debug, Clone)]
pub struct FileResult<'a> {
    pub predicted: &'a [LinkAnnotation],
    pub gold: &'a [LinkAnnotation],
    pub is_system: &'a [bool],
    pub window: usize,
}

/// Scores a set of files. Items are the annotated children of every file;
/// clusterings of different files are pooled into one item space.
pub fn score(files: &[FileResult<'_>]) -> MetricBundle {
    let mut link = Counts::default();
    let mut selfc = Counts::default();
    let mut pred_all = Clustering::from_blocks(Vec::new()).expect("empty");
    let mut gold_all = pred_all.clone();
    let mut offset = 0;
    let mut kinds: BTreeMap<SelfLinkKind, KindRecall> = BTreeMap::new();
    let mut out_of_window = 0;
    for f in files {
        let mut items: Vec<usize> = f.gold.iter().map(|l| l.child).collect();
        items.sort_unstable();
        items.dedup();
        let item_set: HashSet<usize> = items.iter().copied().collect();
        let scored: Vec<LinkAnnotation> = f
            .predicted
            .iter()
            .copied()
            .filter(|l| item_set.contains(&l.child))
            .collect();
        link.add(link_counts(&scored, f.gold));
        selfc.add(self_link_counts(&scored, f.gold));
        out_of_window += f.gold.iter().filter(|l| l.distance() > f.window).count();

        let predicted_self: HashSet<usize> =
            scored.iter().filter(|l| l.is_self()).map(|l| l.child).collect();
        for (child, kind) in self_link_kinds(f.gold, f.is_system) {
            let e = kinds.entry(kind).or_default();
            e.gold += 1;
            if predicted_self.contains(&child) {
                e.predicted_self += 1;
            }
        }

        let p = Clustering::from_links(&items, f.predicted).shifted(offset);
        let g = Clustering::from_links(&items, f.gold).shifted(offset);
        pred_all = pred_all.merged(&p).expect("files occupy disjoint ranges");
        gold_all = gold_all.merged(&g).expect("files occupy disjoint ranges");
        offset += items.last().map_or(0, |m| m + 1);
    }
    for r in kinds.values_mut() {
        r.recall = if r.gold == 0 {
            0.0
        } else {
            r.predicted_self as f64 / r.gold as f64
        };
    }
    MetricBundle {
        link: link.prf(),
        self_link: selfc.prf(),
        scaled_vi: scaled_vi(&pred_all, &gold_all).expect("same items"),
        ari: ari(&pred_all, &gold_all).expect("same items"),
        exact_match: exact_match(&pred_all, &gold_all),
        self_link_kinds: kinds,
        items: gold_all.num_items(),
        out_of_window_links: out_of_window,
    }
}

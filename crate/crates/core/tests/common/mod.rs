//! Independent reference implementations and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod grad;

use std::collections::{BTreeSet, HashMap};

use disentangle::corpus::{ChatFile, LinkAnnotation, Timestamp, Utterance, Vocabulary};
use disentangle::model::{Model, ModelConfig};
use disentangle::nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect())
}

/// Random labelling of `n` items into at most `k` groups.
pub fn labels(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..k.max(1))).collect()
}

/// Scaled VI from an explicit contingency table, logs of probabilities.
pub fn oracle_scaled_vi(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut px: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<usize, f64> = HashMap::new();
    let w = 1.0 / n as f64;
    for (&a, &b) in x.iter().zip(y) {
        *table.entry((a, b)).or_default() += w;
        *px.entry(a).or_default() += w;
        *py.entry(b).or_default() += w;
    }
    // H(X|Y) + H(Y|X) = -Σ r_ij [ln(r_ij / q_j) + ln(r_ij / p_i)]
    let mut vi = 0.0;
    for (&(a, b), &r) in &table {
        vi -= r * ((r / py[&b]).ln() + (r / px[&a]).ln());
    }
    1.0 - vi / (n as f64).ln()
}

/// Adjusted Rand index by enumerating every item pair.
pub fn oracle_ari(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len();
    let (mut both, mut only_x, mut only_y, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1.0;
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_x += 1.0,
                (false, true) => only_y += 1.0,
                _ => {}
            }
        }
    }
    let (sx, sy) = (both + only_x, both + only_y);
    let expected = if pairs > 0.0 { sx * sy / pairs } else { 0.0 };
    let max = 0.5 * (sx + sy);
    if max == expected {
        return if same_partition(x, y) { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

pub fn same_partition(x: &[usize], y: &[usize]) -> bool {
    (0..x.len()).all(|i| (0..x.len()).all(|j| (x[i] == x[j]) == (y[i] == y[j])))
}

/// Groups of item positions sharing a label, as sets.
pub fn groups(labels: &[usize]) -> Vec<BTreeSet<usize>> {
    let mut by: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by.entry(l).or_default().insert(i);
    }
    by.into_values().collect()
}

/// Exact-match F1 by comparing every predicted group against every gold group.
pub fn oracle_exact_match_f1(pred: &[usize], gold: &[usize]) -> f64 {
    let p: Vec<_> = groups(pred).into_iter().filter(|g| g.len() > 1).collect();
    let g: Vec<_> = groups(gold).into_iter().filter(|g| g.len() > 1).collect();
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let mut hits = 0;
    for a in &p {
        for b in &g {
            if a == b {
                hits += 1;
            }
        }
    }
    let prec = if p.is_empty() { 0.0 } else { hits as f64 / p.len() as f64 };
    let rec = if g.is_empty() { 0.0 } else { hits as f64 / g.len() as f64 };
    if prec + rec == 0.0 {
        0.0
    } else {
        2.0 * prec * rec / (prec + rec)
    }
}

/// Connected components of an undirected link graph by depth-first search,
/// as sorted item lists ordered by their smallest member.
pub fn components(n: usize, links: &[LinkAnnotation]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for l in links {
        adj[l.child].push(l.parent);
        adj[l.parent].push(l.child);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen[start] = true;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// One link per utterance, each parent within `window` of its child.
pub fn random_links(n: usize, window: usize, self_rate: f64, rng: &mut impl Rng) -> Vec<LinkAnnotation> {
    (0..n)
        .map(|i| {
            let parent = if i == 0 || rng.gen_bool(self_rate) {
                i
            } else {
                rng.gen_range(i.saturating_sub(window)..i)
            };
            LinkAnnotation::new(i, parent)
        })
        .collect()
}

const WORDS: &[&str] = &["grub", "wifi", "boot", "driver", "disk", "apt", "how", "the", "fix", "?"];
const NICKS: &[&str] = &["ana", "bo", "cyd", "dee", "eli"];

/// A random annotated file: messages of 1 to 7 tokens, some mentioning other nicks.
pub fn random_file(name: &str, n: usize, window: usize, rng: &mut impl Rng) -> ChatFile {
    let mut minute = rng.gen_range(0..1440u32);
    let utterances = (0..n)
        .map(|i| {
            minute = (minute + rng.gen_range(0..3)) % 1440;
            let time = Timestamp::new((minute / 60) as u8, (minute % 60) as u8).unwrap();
            let speaker = NICKS[rng.gen_range(0..NICKS.len())];
            let len = rng.gen_range(1..=7);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        NICKS[rng.gen_range(0..NICKS.len())]
                    } else {
                        WORDS[rng.gen_range(0..WORDS.len())]
                    }
                })
                .collect();
            Utterance::new(i, time, speaker, &words.join(" "), false)
        })
        .collect();
    ChatFile::new(name, utterances, random_links(n, window, 0.2, rng)).unwrap()
}

pub fn tiny_model(files: &[ChatFile], hidden: usize, embed_dim: usize, window: usize, seed: u64) -> Model {
    let vocab = Vocabulary::build(files.iter().flat_map(|f| &f.utterances), 1);
    let config = ModelConfig {
        hidden,
        embed_dim,
        window,
        use_text: true,
    };
    Model::new(config, vocab, &mut rng(seed)).unwrap()
}

/// Scales every parameter so that scores leave the near-zero regime.
pub fn scale_params(model: &mut Model, factor: f64) {
    let ids: Vec<_> = model.params.ids().collect();
    for id in ids {
        model.params.get_mut(id).scale_assign(factor);
    }
}

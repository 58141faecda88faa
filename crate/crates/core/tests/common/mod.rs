//! Brute-force references shared by the integration tests.
//!
//! Everything here enumerates segmentations directly from the vocabulary
//! and never goes through the lattice code.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use subreg::vocab::UNK_ID;
use subreg::{NormalizedText, PieceId, Vocabulary, WORD_BOUNDARY};

/// One complete segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub ids: Vec<PieceId>,
    pub log_prob: f64,
}

/// Splits marked text into words at each boundary marker.
fn words(chars: &[char]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=chars.len() {
        if i == chars.len() || chars[i] == WORD_BOUNDARY {
            if i > start {
                spans.push((start, i));
            }
            start = i;
        }
    }
    spans
}

/// Every segmentation of `text`. A position with no single-character piece
/// is covered by a one-character unknown piece.
pub fn enumerate(text: &NormalizedText, vocab: &Vocabulary) -> Vec<Path> {
    let table: HashMap<String, (PieceId, f64)> = vocab
        .iter()
        .filter(|(id, _, _)| !Vocabulary::is_reserved(*id))
        .map(|(id, p, lp)| (p.to_owned(), (id, lp)))
        .collect();
    let chars = text.chars();
    let mut paths = vec![Path {
        ids: Vec::new(),
        log_prob: 0.0,
    }];
    for (b, e) in words(chars) {
        let word_paths = enumerate_word(&chars[b..e], &table, vocab.unk_log_prob());
        paths = paths
            .iter()
            .flat_map(|p| {
                word_paths.iter().map(move |w| Path {
                    ids: p.ids.iter().chain(&w.ids).copied().collect(),
                    log_prob: p.log_prob + w.log_prob,
                })
            })
            .collect();
    }
    paths
}

fn enumerate_word(word: &[char], table: &HashMap<String, (PieceId, f64)>, unk: f64) -> Vec<Path> {
    if word.is_empty() {
        return vec![Path {
            ids: Vec::new(),
            log_prob: 0.0,
        }];
    }
    let mut out = Vec::new();
    let mut has_single = false;
    for len in 1..=word.len() {
        let piece: String = word[..len].iter().collect();
        if let Some(&(id, lp)) = table.get(&piece) {
            has_single |= len == 1;
            for rest in enumerate_word(&word[len..], table, unk) {
                out.push(prepend(id, lp, rest));
            }
        }
    }
    if !has_single {
        for rest in enumerate_word(&word[1..], table, unk) {
            out.push(prepend(UNK_ID, unk, rest));
        }
    }
    out
}

fn prepend(id: PieceId, lp: f64, rest: Path) -> Path {
    let mut ids = Vec::with_capacity(rest.ids.len() + 1);
    ids.push(id);
    ids.extend(rest.ids);
    Path {
        ids,
        log_prob: lp + rest.log_prob,
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_partition(paths: &[Path]) -> f64 {
    log_sum_exp(paths.iter().map(|p| p.log_prob))
}

/// Posterior expected count of each piece.
pub fn expected_counts(paths: &[Path]) -> HashMap<PieceId, f64> {
    let log_z = log_partition(paths);
    let mut counts = HashMap::new();
    for p in paths {
        let w = (p.log_prob - log_z).exp();
        for &id in &p.ids {
            *counts.entry(id).or_insert(0.0) += w;
        }
    }
    counts
}

/// Best path: highest score, then fewer pieces, then smaller ids. Scores
/// within `1e-12` relative count as equal.
pub fn best(paths: &[Path]) -> &Path {
    let top = paths
        .iter()
        .map(|p| p.log_prob)
        .fold(f64::NEG_INFINITY, f64::max);
    paths
        .iter()
        .filter(|p| (p.log_prob - top).abs() <= 1e-12 * top.abs().max(1.0))
        .min_by(|a, b| a.ids.len().cmp(&b.ids.len()).then_with(|| a.ids.cmp(&b.ids)))
        .expect("at least one path")
}

/// Paths sorted by descending score.
pub fn ranked(paths: &[Path]) -> Vec<Path> {
    let mut sorted = paths.to_vec();
    sorted.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.ids.cmp(&b.ids)));
    sorted
}

/// Random vocabulary over `▁abc` with pieces up to four characters.
/// Single characters are sometimes left out to exercise unknown nodes.
pub fn random_vocab<R: Rng>(rng: &mut R) -> Vocabulary {
    let alphabet = ['▁', 'a', 'b', 'c'];
    let mut pieces: HashMap<String, f64> = HashMap::new();
    for &c in &alphabet {
        if rng.random_bool(0.9) {
            pieces.insert(c.to_string(), rng.random_range(0.05..1.0));
        }
    }
    let extra = rng.random_range(1..25);
    for _ in 0..extra {
        let len = rng.random_range(2..=4);
        let piece: String = (0..len).map(|_| alphabet[rng.random_range(0..4)]).collect();
        if piece.chars().skip(1).any(|c| c == WORD_BOUNDARY) {
            continue;
        }
        pieces.insert(piece, rng.random_range(0.01..1.0));
    }
    if pieces.is_empty() {
        pieces.insert("a".into(), 1.0);
    }
    // Uniform weights produce exact ties.
    let uniform = rng.random_bool(0.2);
    let mut pieces: Vec<(String, f64)> = pieces
        .into_iter()
        .map(|(p, w)| (p, if uniform { 1.0 } else { w }))
        .collect();
    pieces.sort_by(|a, b| a.0.cmp(&b.0));
    Vocabulary::from_weights(pieces).unwrap()
}

/// Random raw sentence of letters and spaces whose marked form has at most
/// `max_chars` characters.
pub fn random_sentence<R: Rng>(rng: &mut R, max_chars: usize) -> String {
    loop {
        let len = rng.random_range(1..=max_chars);
        let s: String = (0..len)
            .map(|_| ['a', 'b', 'c', ' '][rng.random_range(0..4)])
            .collect();
        let marked = subreg::normalize(&s).unwrap();
        if !marked.is_empty() && marked.len() <= max_chars {
            return s;
        }
    }
}

/// L∞ distance between an empirical histogram and a distribution.
pub fn linf<K: std::hash::Hash + Eq>(counts: &HashMap<K, usize>, total: usize, probs: &HashMap<K, f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, &p) in probs {
        let got = counts.get(k).copied().unwrap_or(0) as f64 / total as f64;
        worst = worst.max((got - p).abs());
    }
    for k in counts.keys() {
        if !probs.contains_key(k) {
            worst = worst.max(counts[k] as f64 / total as f64);
        }
    }
    worst
}

pub fn corpus_text() -> &'static str {
    include_str!("../data/corpus.txt")
}

/// Lines from the start of the bundled corpus totalling at most `bytes`.
pub fn corpus_prefix(bytes: usize) -> Vec<&'static str> {
    let mut used = 0;
    corpus_text()
        .lines()
        .take_while(|l| {
            used += l.len() + 1;
            used <= bytes
        })
        .collect()
}

//! Segmentation lattice and the dynamic programs run over it.
//!
//! A lattice holds one node per (position, matching piece) pair of a
//! sentence. Paths from the start to the end of the sentence are exactly the
//! segmentations the vocabulary permits, and each path scores the sum of its
//! node log-probabilities. All arithmetic is in natural-log space.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::rc::Rc;

use rand::Rng;

use crate::logmath::{log_add, log_sum_exp, nearly_equal};
use crate::normalizer::NormalizedText;
use crate::vocab::{PieceId, Vocabulary, UNK_ID};

/// A candidate piece covering `begin..end` (character offsets).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub begin: usize,
    pub end: usize,
    pub piece_id: PieceId,
    pub log_prob: f64,
}

/// One segmentation of a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SegPath {
    pub piece_ids: Vec<PieceId>,
    /// Surface strings of the pieces; unknown pieces keep their character.
    pub pieces: Vec<String>,
    pub spans: Vec<(usize, usize)>,
    /// Sum of the member node log-probabilities.
    pub log_prob: f64,
}

impl SegPath {
    pub fn len(&self) -> usize {
        self.piece_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.piece_ids.is_empty()
    }

    /// The marked text the path covers.
    pub fn text(&self) -> String {
        self.pieces.concat()
    }
}

/// Result of the forward-backward pass.
#[derive(Debug, Clone)]
pub struct Marginal {
    /// Log of the summed probability of all paths.
    pub log_z: f64,
    /// Posterior expected occurrences of each piece.
    pub expected_counts: HashMap<PieceId, f64>,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    chars: Vec<char>,
    nodes: Vec<Node>,
    begin_nodes: Vec<Vec<u32>>,
    end_nodes: Vec<Vec<u32>>,
}

impl Lattice {
    /// Builds the lattice of `sentence` under `vocab`.
    ///
    /// Pieces are matched inside word spans only. A position without a
    /// single-character piece gets an unknown node, so the lattice is
    /// always connected.
    pub fn build(sentence: &NormalizedText, vocab: &Vocabulary) -> Self {
        let chars = sentence.chars().to_vec();
        let n = chars.len();
        let mut lattice = Lattice {
            chars,
            nodes: Vec::with_capacity(n * 2),
            begin_nodes: vec![Vec::new(); n + 1],
            end_nodes: vec![Vec::new(); n + 1],
        };
        for &(span_begin, span_end) in sentence.word_spans() {
            for pos in span_begin..span_end {
                let mut has_single = false;
                let mut matched = Vec::new();
                vocab.for_each_prefix(&lattice.chars[pos..span_end], |len, id| {
                    has_single |= len == 1;
                    matched.push((len, id));
                });
                if !has_single {
                    lattice.push(pos, pos + 1, UNK_ID, vocab.unk_log_prob());
                }
                for (len, id) in matched {
                    lattice.push(pos, pos + len, id, vocab.log_prob(id));
                }
            }
        }
        lattice
    }

    fn push(&mut self, begin: usize, end: usize, piece_id: PieceId, log_prob: f64) {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node {
            begin,
            end,
            piece_id,
            log_prob,
        });
        self.begin_nodes[begin].push(idx);
        self.end_nodes[end].push(idx);
    }

    /// Sentence length in characters.
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn nodes_ending_at(&self, pos: usize) -> impl Iterator<Item = &Node> + '_ {
        self.end_nodes[pos].iter().map(move |&i| &self.nodes[i as usize])
    }

    pub fn nodes_beginning_at(&self, pos: usize) -> impl Iterator<Item = &Node> + '_ {
        self.begin_nodes[pos].iter().map(move |&i| &self.nodes[i as usize])
    }

    fn make_path(&self, node_indices: impl IntoIterator<Item = u32>) -> SegPath {
        let mut path = SegPath {
            piece_ids: Vec::new(),
            pieces: Vec::new(),
            spans: Vec::new(),
            log_prob: 0.0,
        };
        for i in node_indices {
            let node = &self.nodes[i as usize];
            path.piece_ids.push(node.piece_id);
            path.pieces.push(self.chars[node.begin..node.end].iter().collect());
            path.spans.push((node.begin, node.end));
            path.log_prob += node.log_prob;
        }
        path
    }

    /// Best path ending at each position: (score, piece count, last node).
    fn viterbi_table(&self) -> Vec<(f64, usize, u32)> {
        const START: u32 = u32::MAX;
        let n = self.len();
        let mut best = vec![(f64::NEG_INFINITY, 0usize, START); n + 1];
        best[0] = (0.0, 0, START);
        let prefix = |best: &[(f64, usize, u32)], mut pos: usize, last: PieceId| {
            let mut seq = vec![last];
            while pos > 0 {
                let node = &self.nodes[best[pos].2 as usize];
                seq.push(node.piece_id);
                pos = node.begin;
            }
            seq.reverse();
            seq
        };
        for end in 1..=n {
            for &idx in &self.end_nodes[end] {
                let node = &self.nodes[idx as usize];
                let (prev_score, prev_count, _) = best[node.begin];
                if prev_score == f64::NEG_INFINITY {
                    continue;
                }
                let score = prev_score + node.log_prob;
                let count = prev_count + 1;
                let current = best[end];
                let take = if current.2 == START {
                    true
                } else if !nearly_equal(score, current.0) {
                    score > current.0
                } else if count != current.1 {
                    count < current.1
                } else {
                    let held = &self.nodes[current.2 as usize];
                    prefix(&best, node.begin, node.piece_id) < prefix(&best, held.begin, held.piece_id)
                };
                if take {
                    best[end] = (score, count, idx);
                }
            }
        }
        best
    }

    /// The most probable segmentation.
    ///
    /// Ties (up to rounding) go to the path with fewer pieces, then to the
    /// lexicographically smaller piece-id sequence.
    pub fn viterbi(&self) -> SegPath {
        let best = self.viterbi_table();
        let mut indices = Vec::new();
        let mut pos = self.len();
        while pos > 0 {
            let idx = best[pos].2;
            indices.push(idx);
            pos = self.nodes[idx as usize].begin;
        }
        indices.reverse();
        self.make_path(indices)
    }

    /// The `n` most probable distinct segmentations, best first.
    ///
    /// Forward Viterbi scores serve as an exact A* heuristic for a search
    /// that grows partial paths backward from the end of the sentence, so
    /// complete paths come off the queue in score order.
    pub fn nbest(&self, n: usize) -> Vec<SegPath> {
        if n == 0 {
            return Vec::new();
        }
        let len = self.len();
        let forward: Vec<f64> = self.viterbi_table().into_iter().map(|b| b.0).collect();

        let mut queue = BinaryHeap::new();
        let mut serial = 0u64;
        queue.push(Hypothesis {
            priority: forward[len],
            suffix_score: 0.0,
            pos: len,
            chain: None,
            serial,
        });
        let mut found: Vec<(f64, Option<Rc<Link>>)> = Vec::new();
        while let Some(top) = queue.peek() {
            if found.len() >= n {
                let cutoff = found[n - 1].0;
                if top.priority < cutoff && !nearly_equal(top.priority, cutoff) {
                    break;
                }
            }
            let hyp = queue.pop().expect("peeked");
            if hyp.pos == 0 {
                found.push((hyp.suffix_score, hyp.chain));
                continue;
            }
            for &idx in &self.end_nodes[hyp.pos] {
                let node = &self.nodes[idx as usize];
                let prev_best = forward[node.begin];
                if prev_best == f64::NEG_INFINITY {
                    continue;
                }
                let suffix_score = hyp.suffix_score + node.log_prob;
                serial += 1;
                queue.push(Hypothesis {
                    priority: suffix_score + prev_best,
                    suffix_score,
                    pos: node.begin,
                    chain: Some(Rc::new(Link {
                        node: idx,
                        next: hyp.chain.clone(),
                    })),
                    serial,
                });
            }
        }

        let mut paths: Vec<SegPath> = found
            .into_iter()
            .map(|(_, chain)| {
                let mut indices = Vec::new();
                let mut link = chain.as_deref();
                while let Some(l) = link {
                    indices.push(l.node);
                    link = l.next.as_deref();
                }
                self.make_path(indices)
            })
            .collect();

        // Paths arrive in score order; reorder runs of tied scores by the
        // same rule viterbi() applies.
        let mut start = 0;
        while start < paths.len() {
            let head = paths[start].log_prob;
            let mut end = start + 1;
            while end < paths.len() && nearly_equal(paths[end].log_prob, head) {
                end += 1;
            }
            paths[start..end].sort_by(|a, b| {
                a.len()
                    .cmp(&b.len())
                    .then_with(|| a.piece_ids.cmp(&b.piece_ids))
            });
            start = end;
        }
        paths.truncate(n);
        paths
    }

    /// Forward log-probabilities per position with node scores scaled by
    /// `scale`.
    fn forward(&self, scale: f64) -> Vec<f64> {
        let n = self.len();
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        for end in 1..=n {
            let mut acc = f64::NEG_INFINITY;
            for &idx in &self.end_nodes[end] {
                let node = &self.nodes[idx as usize];
                acc = log_add(acc, alpha[node.begin] + scale * node.log_prob);
            }
            alpha[end] = acc;
        }
        alpha
    }

    fn backward(&self) -> Vec<f64> {
        let n = self.len();
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        beta[n] = 0.0;
        for begin in (0..n).rev() {
            let mut acc = f64::NEG_INFINITY;
            for &idx in &self.begin_nodes[begin] {
                let node = &self.nodes[idx as usize];
                acc = log_add(acc, node.log_prob + beta[node.end]);
            }
            beta[begin] = acc;
        }
        beta
    }

    /// Log of the summed probability of every path.
    pub fn log_partition(&self) -> f64 {
        self.forward(1.0)[self.len()]
    }

    /// Log partition over paths that avoid `piece` entirely.
    pub(crate) fn log_partition_without(&self, piece: PieceId) -> f64 {
        let n = self.len();
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        for end in 1..=n {
            let mut acc = f64::NEG_INFINITY;
            for &idx in &self.end_nodes[end] {
                let node = &self.nodes[idx as usize];
                if node.piece_id != piece {
                    acc = log_add(acc, alpha[node.begin] + node.log_prob);
                }
            }
            alpha[end] = acc;
        }
        alpha[n]
    }

    /// Adds `weight` times each piece's posterior expected count into
    /// `counts` (indexed by piece id) and returns log Z.
    pub(crate) fn accumulate_counts(&self, weight: f64, counts: &mut [f64]) -> f64 {
        let alpha = self.forward(1.0);
        let beta = self.backward();
        let log_z = alpha[self.len()];
        for node in &self.nodes {
            let posterior = (alpha[node.begin] + node.log_prob + beta[node.end] - log_z).exp();
            counts[node.piece_id as usize] += weight * posterior;
        }
        log_z
    }

    /// Forward-backward: log Z and posterior expected piece counts.
    pub fn marginal(&self) -> Marginal {
        let alpha = self.forward(1.0);
        let beta = self.backward();
        let log_z = alpha[self.len()];
        let mut expected_counts = HashMap::new();
        for node in &self.nodes {
            let posterior = (alpha[node.begin] + node.log_prob + beta[node.end] - log_z).exp();
            *expected_counts.entry(node.piece_id).or_insert(0.0) += posterior;
        }
        Marginal {
            log_z,
            expected_counts,
        }
    }

    /// Draws one path with probability P(path) / Z (forward filtering,
    /// backward sampling).
    pub fn ffbs_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SegPath {
        self.sample_annealed(1.0, rng)
    }

    /// Draws one path with probability proportional to P(path)^alpha.
    ///
    /// Node scores are multiplied by `alpha` before forward filtering; the
    /// returned path still carries its unscaled log-probability.
    pub fn sample_annealed<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> SegPath {
        let forward = self.forward(alpha);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        let mut pos = self.len();
        while pos > 0 {
            let candidates = &self.end_nodes[pos];
            weights.clear();
            weights.extend(candidates.iter().map(|&idx| {
                let node = &self.nodes[idx as usize];
                forward[node.begin] + alpha * node.log_prob
            }));
            let total = log_sum_exp(&weights);
            let mut u: f64 = rng.random();
            let mut chosen = *candidates.last().expect("lattice is connected");
            for (&idx, &w) in candidates.iter().zip(&weights) {
                let p = (w - total).exp();
                if u < p {
                    chosen = idx;
                    break;
                }
                u -= p;
            }
            indices.push(chosen);
            pos = self.nodes[chosen as usize].begin;
        }
        indices.reverse();
        self.make_path(indices)
    }
}

#[derive(Debug)]
struct Link {
    node: u32,
    next: Option<Rc<Link>>,
}

#[derive(Debug)]
struct Hypothesis {
    priority: f64,
    suffix_score: f64,
    pos: usize,
    chain: Option<Rc<Link>>,
    serial: u64,
}

impl PartialEq for Hypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Hypothesis {}

impl PartialOrd for Hypothesis {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hypothesis {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.serial.cmp(&self.serial))
    }
}

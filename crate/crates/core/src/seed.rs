//! Seed vocabulary: every corpus character plus the highest-scoring
//! within-word substrings, enumerated from a suffix array.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::normalizer::NormalizedText;
use crate::suffix_array::{lcp_array, suffix_array};
use crate::vocab::{Vocabulary, RESERVED_PIECES};

/// A distinct within-word substring and its corpus statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedCandidate {
    pub piece: String,
    /// Occurrences across all word spans.
    pub count: u64,
    /// `count * length in characters`.
    pub score: u64,
}

/// Largest seed we build unless asked otherwise.
pub const MAX_DEFAULT_SEED_SIZE: usize = 1_000_000;

/// Default seed size for a target vocabulary size.
pub fn default_seed_size(target_vocab_size: usize) -> usize {
    MAX_DEFAULT_SEED_SIZE.min(25 * target_vocab_size)
}

/// Suffix array over all words of a corpus, each followed by a separator.
struct SubstringIndex {
    /// Symbols: 0 separates words, `r > 0` is `alphabet[r - 1]`.
    text: Vec<u32>,
    alphabet: Vec<char>,
    sa: Vec<usize>,
    lcp: Vec<usize>,
    /// Characters left before the next separator, per position.
    remaining: Vec<u32>,
}

impl SubstringIndex {
    fn new(corpus: &[NormalizedText]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Config("corpus is empty".into()));
        }
        let mut alphabet: Vec<char> = corpus.iter().flat_map(|s| s.chars().iter().copied()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        if alphabet.is_empty() {
            return Err(Error::Config("corpus contains no characters".into()));
        }
        let rank = |c: char| alphabet.binary_search(&c).expect("in alphabet") as u32 + 1;

        let mut text = Vec::new();
        for sentence in corpus {
            for word in sentence.words() {
                text.extend(word.iter().map(|&c| rank(c)));
                text.push(0);
            }
        }
        let mut remaining = vec![0u32; text.len()];
        let mut run = 0u32;
        for i in (0..text.len()).rev() {
            run = if text[i] == 0 { 0 } else { run + 1 };
            remaining[i] = run;
        }
        let sa = suffix_array(&text, alphabet.len() as u32);
        let lcp = lcp_array(&text, &sa);
        Ok(Self {
            text,
            alphabet,
            sa,
            lcp,
            remaining,
        })
    }

    /// Calls `f(position, length, count)` once per distinct substring of
    /// length `1..=max_len` that lies inside a word.
    ///
    /// Suffixes sharing a length-`len` prefix are adjacent in the suffix
    /// array and separated from others by an LCP below `len`.
    fn for_each_substring(&self, max_len: usize, mut f: impl FnMut(usize, usize, u64)) {
        for len in 1..=max_len {
            let mut group: Option<(usize, u64)> = None;
            for (i, &pos) in self.sa.iter().enumerate() {
                if i == 0 || self.lcp[i] < len {
                    if let Some((p, count)) = group.take() {
                        f(p, len, count);
                    }
                }
                if self.remaining[pos] as usize >= len {
                    match &mut group {
                        Some((_, count)) => *count += 1,
                        None => group = Some((pos, 1)),
                    }
                }
            }
            if let Some((p, count)) = group {
                f(p, len, count);
            }
        }
    }

    fn piece(&self, pos: usize, len: usize) -> String {
        self.text[pos..pos + len]
            .iter()
            .map(|&r| self.alphabet[r as usize - 1])
            .collect()
    }

    fn slice(&self, pos: usize, len: usize) -> &[u32] {
        &self.text[pos..pos + len]
    }
}

fn check_max_len(max_piece_length: usize) -> Result<()> {
    if max_piece_length == 0 {
        return Err(Error::Config("max piece length must be at least 1".into()));
    }
    Ok(())
}

/// Every distinct within-word substring up to `max_piece_length`
/// characters, ordered by descending score then piece.
pub fn enumerate_substrings(
    corpus: &[NormalizedText],
    max_piece_length: usize,
) -> Result<Vec<SeedCandidate>> {
    check_max_len(max_piece_length)?;
    let index = SubstringIndex::new(corpus)?;
    let mut out = Vec::new();
    index.for_each_substring(max_piece_length, |pos, len, count| {
        out.push(SeedCandidate {
            piece: index.piece(pos, len),
            count,
            score: count * len as u64,
        });
    });
    out.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.piece.cmp(&b.piece)));
    Ok(out)
}

/// Heap entry ordered so the weakest candidate sits on top.
struct Ranked<'a> {
    score: u64,
    piece: &'a [u32],
    pos: usize,
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .cmp(&self.score)
            .then_with(|| self.piece.cmp(other.piece))
    }
}

/// Builds the seed vocabulary: all characters, then the best multi-character
/// substrings until `seed_size` pieces. Probabilities are proportional to
/// scores.
pub fn make_seed(
    corpus: &[NormalizedText],
    seed_size: usize,
    max_piece_length: usize,
) -> Result<Vocabulary> {
    check_max_len(max_piece_length)?;
    let index = SubstringIndex::new(corpus)?;
    let num_chars = index.alphabet.len();
    if seed_size < num_chars {
        return Err(Error::Config(format!(
            "seed size {seed_size} is below the {num_chars} distinct characters in the corpus"
        )));
    }
    let budget = seed_size - num_chars;

    let mut chars: Vec<(String, u64)> = Vec::with_capacity(num_chars);
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(budget + 1);
    index.for_each_substring(max_piece_length, |pos, len, count| {
        if len == 1 {
            chars.push((index.piece(pos, 1), count));
            return;
        }
        if budget == 0 {
            return;
        }
        let candidate = Ranked {
            score: count * len as u64,
            piece: index.slice(pos, len),
            pos,
        };
        if heap.len() == budget && heap.peek().is_some_and(|worst| candidate >= *worst) {
            return;
        }
        if (3..=5).contains(&len) && RESERVED_PIECES.contains(&index.piece(pos, len).as_str()) {
            return;
        }
        heap.push(candidate);
        if heap.len() > budget {
            heap.pop();
        }
    });

    let mut scored: Vec<(String, u64)> = chars;
    scored.extend(heap.into_iter().map(|r| (index.piece(r.pos, r.piece.len()), r.score)));
    scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_weights(scored.into_iter().map(|(p, s)| (p, s as f64)).collect())
}

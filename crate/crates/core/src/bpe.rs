//! Byte-pair encoding baseline over characters.
//!
//! Training starts from single characters and repeatedly merges the most
//! frequent adjacent symbol pair inside words, until the alphabet plus the
//! merges reaches the requested size. Encoding replays the merges in training
//! order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::rc::Rc;

use log::warn;

use crate::error::{Error, Result};
use crate::normalizer::{denormalize, normalize};
use crate::vocab::{PieceId, NUM_RESERVED, RESERVED_PIECES, UNK_ID, UNK_SURFACE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    alphabet: Vec<char>,
    merges: Vec<(String, String)>,
    /// Alphabet strings, then each new merge result; index = symbol id.
    symbols: Vec<String>,
    symbol_ids: HashMap<String, u32>,
    /// (left, right) -> (rank, merged symbol).
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

impl BpeModel {
    /// Assembles a model, checking that every merge operand is a character
    /// or the result of an earlier merge.
    pub fn new(mut alphabet: Vec<char>, merges: Vec<(String, String)>) -> Result<Self> {
        alphabet.sort_unstable();
        alphabet.dedup();
        let mut symbols: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
        let mut symbol_ids: HashMap<String, u32> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (left, right)) in merges.iter().enumerate() {
            let operand = |s: &String| {
                symbol_ids.get(s).copied().ok_or_else(|| {
                    Error::Config(format!(
                        "merge {rank} uses {s:?}, which is neither a character nor an earlier merge"
                    ))
                })
            };
            let pair = (operand(left)?, operand(right)?);
            let merged = format!("{left}{right}");
            let next = symbols.len() as u32;
            let id = *symbol_ids.entry(merged.clone()).or_insert(next);
            if id == next {
                symbols.push(merged);
            }
            ranks.entry(pair).or_insert((rank, id));
        }
        Ok(Self {
            alphabet,
            merges,
            symbols,
            symbol_ids,
            ranks,
        })
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Characters plus merges.
    pub fn vocab_size(&self) -> usize {
        self.alphabet.len() + self.merges.len()
    }

    /// Number of ids, reserved ones included.
    pub fn num_ids(&self) -> usize {
        self.symbols.len() + NUM_RESERVED
    }

    pub fn piece(&self, id: PieceId) -> Option<&str> {
        let id = id as usize;
        if id < NUM_RESERVED {
            Some(RESERVED_PIECES[id])
        } else {
            self.symbols.get(id - NUM_RESERVED).map(String::as_str)
        }
    }

    pub fn id_of(&self, piece: &str) -> Option<PieceId> {
        if let Some(i) = RESERVED_PIECES.iter().position(|&r| r == piece) {
            return Some(i as PieceId);
        }
        self.symbol_ids
            .get(piece)
            .map(|&s| s + NUM_RESERVED as PieceId)
    }

    /// Applies the merges to one word. Unknown characters stay as single
    /// symbols with no id.
    fn encode_word(&self, word: &[char]) -> Vec<(Option<u32>, String)> {
        let mut symbols: Vec<(Option<u32>, String)> = word
            .iter()
            .map(|&c| {
                let s = c.to_string();
                (self.symbol_ids.get(&s).copied(), s)
            })
            .collect();
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| match (w[0].0, w[1].0) {
                    (Some(l), Some(r)) => self.ranks.get(&(l, r)).map(|&(rank, _)| (rank, (l, r))),
                    _ => None,
                })
                .min();
            let Some((_, pair)) = best else { break };
            let merged_id = self.ranks[&pair].1;
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && (symbols[i].0, symbols[i + 1].0) == (Some(pair.0), Some(pair.1)) {
                    out.push((Some(merged_id), self.symbols[merged_id as usize].clone()));
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = out;
        }
        symbols
    }

    fn encode_symbols(&self, raw: &str) -> Result<Vec<(Option<u32>, String)>> {
        let sentence = normalize(raw)?;
        Ok(sentence.words().flat_map(|w| self.encode_word(w)).collect())
    }

    /// Segments a raw sentence into pieces.
    pub fn encode(&self, raw: &str) -> Result<Vec<String>> {
        Ok(self.encode_symbols(raw)?.into_iter().map(|(_, s)| s).collect())
    }

    /// Segments a raw sentence into ids; unknown characters map to `<unk>`.
    pub fn encode_ids(&self, raw: &str) -> Result<Vec<PieceId>> {
        Ok(self
            .encode_symbols(raw)?
            .into_iter()
            .map(|(id, _)| id.map_or(UNK_ID, |s| s + NUM_RESERVED as PieceId))
            .collect())
    }

    pub fn decode(&self, ids: &[PieceId]) -> Result<String> {
        let mut joined = String::new();
        for &id in ids {
            if id == UNK_ID {
                joined.push_str(UNK_SURFACE);
            } else if (id as usize) >= NUM_RESERVED {
                joined.push_str(self.piece(id).ok_or(Error::UnknownId(id))?);
            }
        }
        Ok(denormalize(&joined))
    }
}

#[derive(Debug)]
struct Candidate {
    count: u64,
    left: Rc<str>,
    right: Rc<str>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| Reverse((&self.left, &self.right)).cmp(&Reverse((&other.left, &other.right))))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct BpeTrainer {
    /// Characters plus merges; reserved ids are not counted.
    pub target_vocab_size: usize,
}

impl BpeTrainer {
    pub fn new(target_vocab_size: usize) -> Self {
        Self { target_vocab_size }
    }

    /// Learns merges from raw lines.
    ///
    /// Pair counts are weighted by word frequency and ties go to the
    /// lexicographically smaller `(left, right)`. Training stops early, with
    /// a warning, once no pair occurs at least twice.
    pub fn train<I, S>(&self, lines: I) -> Result<BpeModel>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut word_counts: HashMap<Vec<char>, u64> = HashMap::new();
        for line in lines {
            for word in normalize(line.as_ref())?.words() {
                *word_counts.entry(word.to_vec()).or_insert(0) += 1;
            }
        }
        let mut word_list: Vec<(Vec<char>, u64)> = word_counts.into_iter().collect();
        word_list.sort_unstable();

        let mut alphabet: Vec<char> = word_list.iter().flat_map(|(w, _)| w.iter().copied()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        if alphabet.is_empty() {
            return Err(Error::Config("training corpus has no text".into()));
        }
        if self.target_vocab_size < alphabet.len() {
            return Err(Error::Config(format!(
                "target vocabulary size {} is below the {} distinct characters",
                self.target_vocab_size,
                alphabet.len()
            )));
        }

        let mut names: Vec<Rc<str>> = alphabet.iter().map(|c| Rc::from(c.to_string())).collect();
        let mut ids: HashMap<Rc<str>, u32> =
            names.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        let mut words: Vec<Vec<u32>> = word_list
            .iter()
            .map(|(w, _)| w.iter().map(|c| alphabet.binary_search(c).unwrap() as u32).collect())
            .collect();
        let freqs: Vec<u64> = word_list.iter().map(|&(_, f)| f).collect();

        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
        for (wi, word) in words.iter().enumerate() {
            for w in word.windows(2) {
                let pair = (w[0], w[1]);
                *pair_counts.entry(pair).or_insert(0) += freqs[wi];
                pair_words.entry(pair).or_default().insert(wi);
            }
        }
        let candidate = |pair: (u32, u32), count: u64, names: &[Rc<str>]| Candidate {
            count,
            left: names[pair.0 as usize].clone(),
            right: names[pair.1 as usize].clone(),
            pair,
        };
        let mut heap: BinaryHeap<Candidate> = pair_counts
            .iter()
            .map(|(&pair, &count)| candidate(pair, count, &names))
            .collect();

        let mut merges = Vec::new();
        while alphabet.len() + merges.len() < self.target_vocab_size {
            let Some(best) = heap.pop() else {
                warn!("no symbol pairs left; stopping after {} merges", merges.len());
                break;
            };
            if pair_counts.get(&best.pair).copied().unwrap_or(0) != best.count {
                continue;
            }
            if best.count < 2 {
                warn!(
                    "no pair occurs at least twice; stopping after {} merges (vocabulary {} of {})",
                    merges.len(),
                    alphabet.len() + merges.len(),
                    self.target_vocab_size
                );
                break;
            }
            let (left, right) = best.pair;
            let merged: Rc<str> = Rc::from(format!("{}{}", best.left, best.right));
            let merged_id = match ids.get(&merged) {
                Some(&id) => id,
                None => {
                    let id = names.len() as u32;
                    names.push(merged.clone());
                    ids.insert(merged, id);
                    id
                }
            };
            merges.push((best.left.to_string(), best.right.to_string()));

            let mut affected: Vec<usize> = pair_words
                .get(&best.pair)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
            affected.sort_unstable();
            let mut touched: HashSet<(u32, u32)> = HashSet::new();
            for wi in affected {
                let word = &words[wi];
                if !word.windows(2).any(|w| (w[0], w[1]) == (left, right)) {
                    continue;
                }
                let freq = freqs[wi];
                for w in word.windows(2) {
                    let pair = (w[0], w[1]);
                    *pair_counts.get_mut(&pair).expect("counted") -= freq;
                    touched.insert(pair);
                }
                let mut merged_word = Vec::with_capacity(word.len());
                let mut i = 0;
                while i < word.len() {
                    if i + 1 < word.len() && (word[i], word[i + 1]) == (left, right) {
                        merged_word.push(merged_id);
                        i += 2;
                    } else {
                        merged_word.push(word[i]);
                        i += 1;
                    }
                }
                for w in merged_word.windows(2) {
                    let pair = (w[0], w[1]);
                    *pair_counts.entry(pair).or_insert(0) += freq;
                    pair_words.entry(pair).or_default().insert(wi);
                    touched.insert(pair);
                }
                words[wi] = merged_word;
            }
            let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
            touched.sort_unstable();
            for pair in touched {
                let count = pair_counts[&pair];
                if count > 0 {
                    heap.push(candidate(pair, count, &names));
                }
            }
        }
        BpeModel::new(alphabet, merges)
    }
}

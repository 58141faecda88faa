//! Piece inventory with log-probabilities.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type PieceId = u32;

pub const UNK_ID: PieceId = 0;
pub const BOS_ID: PieceId = 1;
pub const EOS_ID: PieceId = 2;

/// Surface forms of the reserved ids, in id order.
pub const RESERVED_PIECES: [&str; 3] = ["<unk>", "<s>", "</s>"];
pub const NUM_RESERVED: usize = RESERVED_PIECES.len();

/// What an unknown piece decodes to.
pub const UNK_SURFACE: &str = "\u{2047}";

/// Penalty below the least likely piece assigned to unknown characters.
pub const UNK_PENALTY: f64 = 10.0;

/// Character trie over piece strings.
#[derive(Debug, Default)]
struct Trie {
    edges: HashMap<(u32, char), u32>,
    terminal: Vec<Option<PieceId>>,
}

impl Trie {
    fn build<'a>(pieces: impl Iterator<Item = (&'a str, PieceId)>) -> Self {
        let mut trie = Trie {
            edges: HashMap::new(),
            terminal: vec![None],
        };
        for (piece, id) in pieces {
            let mut node = 0u32;
            for c in piece.chars() {
                let next = trie.terminal.len() as u32;
                node = *trie.edges.entry((node, c)).or_insert(next);
                if node == next {
                    trie.terminal.push(None);
                }
            }
            trie.terminal[node as usize] = Some(id);
        }
        trie
    }
}

/// An ordered set of pieces with log-probabilities.
///
/// Ids 0, 1 and 2 are the reserved `<unk>`, `<s>` and `</s>` entries, which
/// carry no probability mass. Ordinary pieces follow in list order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pieces: Vec<(String, f64)>,
    index: HashMap<String, PieceId>,
    trie: Arc<Trie>,
    unk_log_prob: f64,
}

impl Vocabulary {
    /// Builds a vocabulary from ordinary (non-reserved) pieces.
    pub fn new(pieces: Vec<(String, f64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, (piece, log_prob)) in pieces.iter().enumerate() {
            if piece.is_empty() {
                return Err(Error::Config("empty piece".into()));
            }
            if RESERVED_PIECES.contains(&piece.as_str()) {
                return Err(Error::Config(format!("piece {piece:?} is reserved")));
            }
            if log_prob.is_nan() || *log_prob == f64::INFINITY {
                return Err(Error::Config(format!(
                    "piece {piece:?} has invalid log-probability {log_prob}"
                )));
            }
            let id = (i + NUM_RESERVED) as PieceId;
            if index.insert(piece.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate piece {piece:?}")));
            }
        }
        let trie = Trie::build(
            pieces
                .iter()
                .enumerate()
                .map(|(i, (p, _))| (p.as_str(), (i + NUM_RESERVED) as PieceId)),
        );
        let min = pieces
            .iter()
            .map(|&(_, lp)| lp)
            .filter(|lp| lp.is_finite())
            .fold(f64::INFINITY, f64::min);
        let unk_log_prob = if min.is_finite() { min } else { 0.0 } - UNK_PENALTY;
        Ok(Self {
            pieces,
            index,
            trie: Arc::new(trie),
            unk_log_prob,
        })
    }

    /// Builds a vocabulary from non-negative weights, normalized to sum to one.
    pub fn from_weights(pieces: Vec<(String, f64)>) -> Result<Self> {
        let total: f64 = pieces.iter().map(|&(_, w)| w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Config("piece weights must have a positive finite sum".into()));
        }
        let log_total = total.ln();
        Self::new(
            pieces
                .into_iter()
                .map(|(p, w)| (p, w.ln() - log_total))
                .collect(),
        )
    }

    /// Same pieces and ids with new log-probabilities.
    pub fn with_log_probs(&self, log_probs: &[f64]) -> Self {
        assert_eq!(log_probs.len(), self.pieces.len());
        let pieces: Vec<(String, f64)> = self
            .pieces
            .iter()
            .zip(log_probs)
            .map(|((p, _), &lp)| (p.clone(), lp))
            .collect();
        let min = log_probs
            .iter()
            .copied()
            .filter(|lp| lp.is_finite())
            .fold(f64::INFINITY, f64::min);
        Self {
            pieces,
            index: self.index.clone(),
            trie: Arc::clone(&self.trie),
            unk_log_prob: if min.is_finite() { min } else { 0.0 } - UNK_PENALTY,
        }
    }

    /// Total size, reserved ids included.
    pub fn len(&self) -> usize {
        self.pieces.len() + NUM_RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Number of ordinary pieces.
    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_reserved(id: PieceId) -> bool {
        (id as usize) < NUM_RESERVED
    }

    pub fn piece(&self, id: PieceId) -> Option<&str> {
        let id = id as usize;
        if id < NUM_RESERVED {
            Some(RESERVED_PIECES[id])
        } else {
            self.pieces.get(id - NUM_RESERVED).map(|(p, _)| p.as_str())
        }
    }

    /// Log-probability of a piece; NaN for reserved ids.
    pub fn log_prob(&self, id: PieceId) -> f64 {
        let id = id as usize;
        if id < NUM_RESERVED {
            f64::NAN
        } else {
            self.pieces[id - NUM_RESERVED].1
        }
    }

    pub fn id_of(&self, piece: &str) -> Option<PieceId> {
        if let Some(i) = RESERVED_PIECES.iter().position(|&r| r == piece) {
            return Some(i as PieceId);
        }
        self.index.get(piece).copied()
    }

    /// Ordinary pieces with their ids.
    pub fn iter(&self) -> impl Iterator<Item = (PieceId, &str, f64)> + '_ {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, (p, lp))| ((i + NUM_RESERVED) as PieceId, p.as_str(), *lp))
    }

    /// Log-probability given to characters no piece covers.
    pub fn unk_log_prob(&self) -> f64 {
        self.unk_log_prob
    }

    /// Σ p(x) over ordinary pieces.
    pub fn total_probability(&self) -> f64 {
        self.pieces.iter().map(|&(_, lp)| lp.exp()).sum()
    }

    /// Calls `f(len, id)` for every piece that is a prefix of `chars`, in
    /// increasing length order.
    pub fn for_each_prefix(&self, chars: &[char], mut f: impl FnMut(usize, PieceId)) {
        let mut node = 0u32;
        for (i, &c) in chars.iter().enumerate() {
            match self.trie.edges.get(&(node, c)) {
                Some(&next) => node = next,
                None => return,
            }
            if let Some(id) = self.trie.terminal[node as usize] {
                f(i + 1, id);
            }
        }
    }
}

//! Unigram language model: EM estimation of piece probabilities and the
//! pruning loop that shrinks a seed vocabulary to the target size.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, SegPath};
use crate::normalizer::{denormalize, normalize, NormalizedText};
use crate::seed::{default_seed_size, make_seed};
use crate::vocab::{PieceId, Vocabulary, NUM_RESERVED, UNK_ID, UNK_SURFACE};

/// Probability kept by single-character pieces whose expected count drops
/// to zero.
pub const ZERO_COUNT_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Final vocabulary size, reserved ids included.
    pub target_vocab_size: usize,
    /// Ordinary pieces in the seed; defaults to
    /// `min(1_000_000, 25 * target_vocab_size)`.
    pub seed_size: Option<usize>,
    /// Fraction of removable pieces kept per pruning round.
    pub shrink_ratio: f64,
    pub em_subiterations: usize,
    pub max_piece_length: usize,
}

impl TrainerConfig {
    pub fn new(target_vocab_size: usize) -> Self {
        Self {
            target_vocab_size,
            seed_size: None,
            shrink_ratio: 0.8,
            em_subiterations: 2,
            max_piece_length: 16,
        }
    }

    pub fn seed_size(&self) -> usize {
        self.seed_size
            .unwrap_or_else(|| default_seed_size(self.target_vocab_size))
    }

    fn validate(&self) -> Result<()> {
        if !(self.shrink_ratio > 0.0 && self.shrink_ratio < 1.0) {
            return Err(Error::Config(format!(
                "shrink ratio must lie in (0, 1), got {}",
                self.shrink_ratio
            )));
        }
        if self.em_subiterations == 0 {
            return Err(Error::Config("at least one EM sub-iteration is required".into()));
        }
        if self.max_piece_length == 0 {
            return Err(Error::Config("max piece length must be at least 1".into()));
        }
        if self.target_vocab_size <= NUM_RESERVED {
            return Err(Error::Config(format!(
                "target vocabulary size must exceed the {NUM_RESERVED} reserved ids"
            )));
        }
        Ok(())
    }
}

/// Distinct words of a corpus with their multiplicities.
///
/// Pieces never cross word boundaries, so a sentence's lattice is the
/// concatenation of its words' lattices and its log-likelihood is the sum of
/// theirs. Working per distinct word gives the same EM and pruning results
/// as working per sentence.
#[derive(Debug)]
pub(crate) struct WordTable {
    words: Vec<(NormalizedText, f64)>,
    num_sentences: usize,
}

impl WordTable {
    pub(crate) fn new(corpus: &[NormalizedText]) -> Self {
        let mut counts: HashMap<&[char], u64> = HashMap::new();
        let mut num_sentences = 0;
        for sentence in corpus {
            if !sentence.is_empty() {
                num_sentences += 1;
            }
            for word in sentence.words() {
                *counts.entry(word).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(&[char], u64)> = counts.into_iter().collect();
        words.sort_unstable();
        Self {
            words: words
                .into_iter()
                .map(|(w, n)| (NormalizedText::from_marked(&w.iter().collect::<String>()), n as f64))
                .collect(),
            num_sentences,
        }
    }

    fn num_sentences(&self) -> usize {
        self.num_sentences
    }
}

fn is_single_char(piece: &str) -> bool {
    let mut chars = piece.chars();
    chars.next().is_some() && chars.next().is_none()
}

/// One EM iteration on the corpus.
///
/// Returns the re-estimated vocabulary and the marginal log-likelihood of
/// the corpus under the probabilities passed in.
pub fn em_step(corpus: &[NormalizedText], vocab: &Vocabulary) -> Result<(Vocabulary, f64)> {
    em_step_words(&WordTable::new(corpus), vocab)
}

fn em_step_words(words: &WordTable, vocab: &Vocabulary) -> Result<(Vocabulary, f64)> {
    let mut counts = vec![0.0; vocab.len()];
    let mut log_likelihood = 0.0;
    for (word, freq) in &words.words {
        let lattice = Lattice::build(word, vocab);
        log_likelihood += freq * lattice.accumulate_counts(*freq, &mut counts);
    }
    if !log_likelihood.is_finite() {
        return Err(Error::NonFinite(format!(
            "marginal log-likelihood is {log_likelihood}"
        )));
    }

    let total: f64 = counts[NUM_RESERVED..].iter().sum();
    let mut weights = Vec::with_capacity(vocab.num_pieces());
    for (id, piece, _) in vocab.iter() {
        let count = counts[id as usize];
        if count > 0.0 {
            weights.push((piece.to_owned(), count));
        } else if is_single_char(piece) {
            weights.push((piece.to_owned(), ZERO_COUNT_FLOOR * total));
        }
    }
    Ok((Vocabulary::from_weights(weights)?, log_likelihood))
}

/// Number of removable pieces that survive one pruning round.
fn pieces_to_keep(removable: usize, min_keep: usize, shrink_ratio: f64) -> usize {
    let shrunk = (shrink_ratio * removable as f64 - 1e-9).ceil() as usize;
    min_keep.max(shrunk.min(removable.saturating_sub(1)))
}

/// Likelihood loss of removing each piece, indexed by piece id.
///
/// `loss[i]` is the drop in corpus log-likelihood when piece `i` disappears
/// and every other probability stays as it is.
fn removal_losses(words: &WordTable, vocab: &Vocabulary) -> Vec<f64> {
    let mut losses = vec![0.0; vocab.len()];
    let multi_char: Vec<bool> = (0..vocab.len() as PieceId)
        .map(|id| {
            !Vocabulary::is_reserved(id) && !is_single_char(vocab.piece(id).expect("in range"))
        })
        .collect();
    let mut present = Vec::new();
    for (word, freq) in &words.words {
        let lattice = Lattice::build(word, vocab);
        present.clear();
        present.extend(
            lattice
                .nodes()
                .iter()
                .map(|n| n.piece_id)
                .filter(|&id| multi_char[id as usize]),
        );
        if present.is_empty() {
            continue;
        }
        present.sort_unstable();
        present.dedup();
        let log_z = lattice.log_partition();
        for &id in &present {
            losses[id as usize] += freq * (log_z - lattice.log_partition_without(id));
        }
    }
    losses
}

/// One pruning round.
///
/// Single-character pieces always stay. Of the rest, the
/// `ceil(shrink_ratio * n)` with the largest loss are kept, but never so few
/// that the vocabulary drops below the target. Survivors keep their
/// probabilities, renormalized.
pub fn prune(corpus: &[NormalizedText], vocab: &Vocabulary, config: &TrainerConfig) -> Result<Vocabulary> {
    config.validate()?;
    prune_words(&WordTable::new(corpus), vocab, config)
}

fn prune_words(words: &WordTable, vocab: &Vocabulary, config: &TrainerConfig) -> Result<Vocabulary> {
    let losses = removal_losses(words, vocab);
    let mut removable: Vec<(PieceId, &str, f64)> = vocab
        .iter()
        .filter(|(_, piece, _)| !is_single_char(piece))
        .map(|(id, piece, _)| (id, piece, losses[id as usize]))
        .collect();
    let singles = vocab.num_pieces() - removable.len();
    let min_keep = config
        .target_vocab_size
        .saturating_sub(NUM_RESERVED + singles);
    if removable.len() <= min_keep {
        return Ok(vocab.clone());
    }
    let keep = pieces_to_keep(removable.len(), min_keep, config.shrink_ratio);
    removable.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.1.cmp(b.1)));
    let mut kept = vec![false; vocab.len()];
    for &(id, _, _) in &removable[..keep] {
        kept[id as usize] = true;
    }
    let survivors = vocab
        .iter()
        .filter(|&(id, piece, _)| kept[id as usize] || is_single_char(piece))
        .map(|(_, piece, lp)| (piece.to_owned(), lp.exp()))
        .collect();
    Vocabulary::from_weights(survivors)
}

/// Progress reported while training.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingEvent {
    /// One EM iteration; the likelihood is under the pre-update probabilities.
    EmStep {
        iteration: usize,
        subiteration: usize,
        vocab_size: usize,
        loglik_per_sentence: f64,
    },
    /// End of an outer iteration, before pruning.
    Iteration {
        iteration: usize,
        vocab_size: usize,
        loglik_per_sentence: f64,
    },
}

impl fmt::Display for TrainingEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainingEvent::EmStep {
                iteration,
                subiteration,
                vocab_size,
                loglik_per_sentence,
            } => write!(
                f,
                "iter={iteration} em={subiteration} vocab={vocab_size} loglik_per_sentence={loglik_per_sentence}"
            ),
            TrainingEvent::Iteration {
                iteration,
                vocab_size,
                loglik_per_sentence,
            } => write!(
                f,
                "iter={iteration} vocab={vocab_size} loglik_per_sentence={loglik_per_sentence}"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnigramTrainer {
    config: TrainerConfig,
}

impl UnigramTrainer {
    pub fn new(config: TrainerConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn train<I, S>(&self, lines: I) -> Result<UnigramModel>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.train_with_observer(lines, |_| {})
    }

    /// Trains a model, reporting every EM step and outer iteration.
    pub fn train_with_observer<I, S>(
        &self,
        lines: I,
        mut observer: impl FnMut(&TrainingEvent),
    ) -> Result<UnigramModel>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let config = &self.config;
        config.validate()?;
        let corpus = lines
            .into_iter()
            .map(|l| normalize(l.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let words = WordTable::new(&corpus);
        if words.num_sentences() == 0 {
            return Err(Error::Config("training corpus has no text".into()));
        }
        let mut alphabet: Vec<char> = corpus.iter().flat_map(|s| s.chars().iter().copied()).collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        if config.target_vocab_size < alphabet.len() + NUM_RESERVED {
            return Err(Error::Config(format!(
                "target vocabulary size {} is below the required minimum {} ({} characters + {} reserved)",
                config.target_vocab_size,
                alphabet.len() + NUM_RESERVED,
                alphabet.len(),
                NUM_RESERVED
            )));
        }

        let mut vocab = make_seed(&corpus, config.seed_size(), config.max_piece_length)?;
        let per_sentence = words.num_sentences() as f64;
        let mut iteration = 0;
        loop {
            let mut loglik = 0.0;
            for subiteration in 0..config.em_subiterations {
                let (next, ll) = em_step_words(&words, &vocab)?;
                loglik = ll / per_sentence;
                observer(&TrainingEvent::EmStep {
                    iteration,
                    subiteration,
                    vocab_size: vocab.len(),
                    loglik_per_sentence: loglik,
                });
                vocab = next;
            }
            observer(&TrainingEvent::Iteration {
                iteration,
                vocab_size: vocab.len(),
                loglik_per_sentence: loglik,
            });
            if vocab.len() <= config.target_vocab_size {
                break;
            }
            let pruned = prune_words(&words, &vocab, config)?;
            if pruned.len() == vocab.len() {
                break;
            }
            vocab = pruned;
            iteration += 1;
        }
        Ok(UnigramModel::new(sorted_by_probability(&vocab)?))
    }
}

fn sorted_by_probability(vocab: &Vocabulary) -> Result<Vocabulary> {
    let mut pieces: Vec<(String, f64)> = vocab.iter().map(|(_, p, lp)| (p.to_owned(), lp)).collect();
    pieces.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::new(pieces)
}

/// A trained unigram segmentation model.
#[derive(Debug, Clone)]
pub struct UnigramModel {
    vocab: Vocabulary,
}

impl UnigramModel {
    pub fn new(vocab: Vocabulary) -> Self {
        Self { vocab }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Normalizes `raw` and builds its lattice.
    pub fn lattice(&self, raw: &str) -> Result<Lattice> {
        Ok(Lattice::build(&normalize(raw)?, &self.vocab))
    }

    /// Viterbi segmentation of a raw sentence.
    pub fn encode(&self, raw: &str) -> Result<SegPath> {
        Ok(self.lattice(raw)?.viterbi())
    }

    pub fn encode_ids(&self, raw: &str) -> Result<Vec<PieceId>> {
        Ok(self.encode(raw)?.piece_ids)
    }

    pub fn encode_pieces(&self, raw: &str) -> Result<Vec<String>> {
        Ok(self.encode(raw)?.pieces)
    }

    /// Turns ids back into text. Unknown pieces become `⁇`; `<s>` and
    /// `</s>` produce nothing.
    pub fn decode(&self, ids: &[PieceId]) -> Result<String> {
        let mut joined = String::new();
        for &id in ids {
            match id {
                UNK_ID => joined.push_str(UNK_SURFACE),
                _ if Vocabulary::is_reserved(id) => {}
                _ => joined.push_str(self.vocab.piece(id).ok_or(Error::UnknownId(id))?),
            }
        }
        Ok(denormalize(&joined))
    }
}

//! One entry point over either model type, shared by the command-line tool
//! and language bindings so both produce identical results.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bpe::BpeTrainer;
use crate::error::{Error, Result};
use crate::lattice::SegPath;
use crate::model_io::Model;
use crate::normalizer::decode_pieces;
use crate::sampler::{nbest_encode, sample_k, SamplingConfig};
use crate::unigram::{TrainerConfig, TrainingEvent, UnigramModel, UnigramTrainer};
use crate::vocab::{PieceId, NUM_RESERVED};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelType {
    Unigram,
    Bpe,
}

/// Training settings for either model type.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub model_type: ModelType,
    /// Ids in the trained model, reserved ids included.
    pub vocab_size: usize,
    /// Unigram only.
    pub seed_size: Option<usize>,
    /// Unigram only.
    pub shrink_ratio: f64,
    /// Unigram only.
    pub max_piece_length: usize,
}

impl TrainOptions {
    pub fn new(model_type: ModelType, vocab_size: usize) -> Self {
        let defaults = TrainerConfig::new(vocab_size);
        Self {
            model_type,
            vocab_size,
            seed_size: None,
            shrink_ratio: defaults.shrink_ratio,
            max_piece_length: defaults.max_piece_length,
        }
    }
}

/// Trains a model on raw lines. Unigram progress events go to `observer`.
pub fn train<I, S>(lines: I, options: &TrainOptions, observer: impl FnMut(&TrainingEvent)) -> Result<Model>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    match options.model_type {
        ModelType::Unigram => {
            let config = TrainerConfig {
                seed_size: options.seed_size,
                shrink_ratio: options.shrink_ratio,
                max_piece_length: options.max_piece_length,
                ..TrainerConfig::new(options.vocab_size)
            };
            Ok(UnigramTrainer::new(config).train_with_observer(lines, observer)?.into())
        }
        ModelType::Bpe => {
            if options.vocab_size <= NUM_RESERVED {
                return Err(Error::Config(format!(
                    "vocabulary size must exceed the {NUM_RESERVED} reserved ids"
                )));
            }
            Ok(BpeTrainer::new(options.vocab_size - NUM_RESERVED).train(lines)?.into())
        }
    }
}

/// Random state for sampling, seeded explicitly so runs can be repeated.
#[derive(Debug, Clone)]
pub struct Sampler {
    seed: u64,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seeds from the operating system; [`Sampler::seed`] tells which seed.
    pub fn from_entropy() -> Self {
        Self::new(rand::random())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `config.k` samples of one sentence.
    pub fn sample(&mut self, model: &UnigramModel, raw: &str, config: &SamplingConfig) -> Result<Vec<SegPath>> {
        sample_k(model, raw, config, &mut self.rng)
    }
}

/// A loaded, immutable model.
#[derive(Debug, Clone)]
pub struct Processor {
    model: Model,
}

impl Processor {
    pub fn new(model: Model) -> Self {
        Self { model }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(Model::load(path)?))
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn encode_pieces(&self, raw: &str) -> Result<Vec<String>> {
        self.model.encode_pieces(raw)
    }

    pub fn encode_ids(&self, raw: &str) -> Result<Vec<PieceId>> {
        self.model.encode_ids(raw)
    }

    pub fn decode_ids(&self, ids: &[PieceId]) -> Result<String> {
        self.model.decode(ids)
    }

    pub fn decode_pieces<S: AsRef<str>>(&self, pieces: &[S]) -> String {
        decode_pieces(pieces)
    }

    /// The `n` best segmentations with their posterior probabilities.
    pub fn nbest(&self, raw: &str, n: usize) -> Result<Vec<(Vec<String>, f64)>> {
        let paths = nbest_encode(self.unigram("nbest")?, raw, n)?;
        Ok(paths.into_iter().map(|(p, posterior)| (p.pieces, posterior)).collect())
    }

    pub fn sample(&self, raw: &str, config: &SamplingConfig, sampler: &mut Sampler) -> Result<Vec<Vec<String>>> {
        let paths = sampler.sample(self.unigram("sampling")?, raw, config)?;
        Ok(paths.into_iter().map(|p| p.pieces).collect())
    }

    /// The unigram model, or a configuration error naming `what`.
    pub fn unigram(&self, what: &str) -> Result<&UnigramModel> {
        match &self.model {
            Model::Unigram(m) => Ok(m),
            Model::Bpe(_) => Err(Error::Config(format!("{what} needs a unigram model"))),
        }
    }
}

//! Subword segmentation with a unigram language model.
//!
//! The crate trains a unigram subword model (EM over segmentation lattices
//! followed by likelihood-driven vocabulary pruning), encodes text with
//! Viterbi or n-best search, and samples segmentations for subword
//! regularization, either from the top-`l` candidates or exactly from the
//! full posterior with forward-filtering backward-sampling. A byte-pair
//! encoding baseline is included for comparison.
//!
//! ```
//! use subreg::{TrainerConfig, UnigramTrainer};
//!
//! let lines = ["hello world", "hello there", "world peace"];
//! let config = TrainerConfig::new(20);
//! let model = UnigramTrainer::new(config).train(lines.iter().copied()).unwrap();
//! let ids = model.encode_ids("hello world").unwrap();
//! assert_eq!(model.decode(&ids).unwrap(), "hello world");
//! ```

pub mod bpe;
mod error;
pub mod lattice;
pub mod logmath;
pub mod model_io;
pub mod normalizer;
pub mod processor;
pub mod sampler;
pub mod seed;
pub mod suffix_array;
pub mod unigram;
pub mod vocab;

pub use bpe::{BpeModel, BpeTrainer};
pub use error::{Error, Result};
pub use lattice::{Lattice, Marginal, Node, SegPath};
pub use model_io::Model;
pub use normalizer::{denormalize, normalize, NormalizedText, WORD_BOUNDARY};
pub use processor::{ModelType, Processor, Sampler, TrainOptions};
pub use sampler::{SampleSize, SamplingConfig, ScoreConfig};
pub use unigram::{TrainerConfig, TrainingEvent, UnigramModel, UnigramTrainer};
pub use vocab::{PieceId, Vocabulary};

//! Joint embedding of songs, artists and tags.
//!
//! Artists and tags are columns of learned matrices; songs are mapped into
//! the same space by a learned linear map of their sparse audio features.
//! One model answers five ranking tasks (artist, song and tag prediction,
//! similar artists, similar songs), trained jointly by stochastic gradient
//! descent on the WARP or the AUC margin ranking loss.

pub mod baselines;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod featurizer;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod opcount;
pub mod ranking;
pub mod sparse;
pub mod synth;
pub mod trainer;

pub use dataset::{ArtistSimilarity, Dataset, SongRecord};
pub use ensemble::{ensemble_score, Ensemble};
pub use error::{Error, Result};
pub use evaluation::{evaluate, precision_at_k, EvalResult};
pub use losses::AlphaScheme;
pub use model::{Candidate, EmbeddingModel, Query, Scorer, TaskId, Universe};
pub use ranking::RankedList;
pub use sparse::SparseVector;
pub use trainer::{train, train_ensemble, LossKind, TrainConfig, TrainReport};

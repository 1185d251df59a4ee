//! Gender-subspace debiasing of word embeddings and its downstream effect
//! on an occupation classifier.
//!
//! The numeric modules are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the command-line
//! front end and all stated tolerances use.

pub mod classifier;
pub mod data;
pub mod debias;
pub mod embeddings;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod geometry;
pub mod linalg;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use classifier::TrainConfig;
pub use data::{Biography, Gender, Split};
pub use debias::{DebiasMode, TransformReport};
pub use embeddings::{GenderWordList, PairRole, WordPairList};
pub use fairness::{FairnessReport, Prediction};
pub use geometry::ComponentFilter;

pub type EmbeddingSet = embeddings::EmbeddingSet<f64>;
pub type GenderSubspace = geometry::GenderSubspace<f64>;
pub type ClassifierModel = classifier::ClassifierModel<f64>;
pub type ProbeModel = classifier::ProbeModel<f64>;

pub type EmbeddingSetF32 = embeddings::EmbeddingSet<f32>;
pub type GenderSubspaceF32 = geometry::GenderSubspace<f32>;

//! Cross-network profile disambiguation.
//!
//! Two profiles from different social networks are compared field by field
//! (userid, display name, description, location, profile image, connection
//! count). The resulting six-slot [`features::SimilarityVector`] is fed to one
//! of four classifiers, and candidate profiles retrieved by name can be ranked
//! by the classifier's match probability.
//!
//! The crate is organised bottom-up:
//!
//! * [`profile`] – profiles, corpora, link files and negative-pair synthesis.
//! * [`text`], [`wordnet`], [`geo`], [`image`] – per-field similarity metrics.
//! * [`features`] – assembly of similarity vectors and the missing-value policy.
//! * [`analysis`] – discretization and discriminativity scores per metric.
//! * [`classify`] – Naive Bayes, kNN, decision tree and linear SVM.
//! * [`eval`] – cross-validation, feature-subset search, candidate ranking.
//! * [`synth`] – seeded synthetic corpora for benchmarks and tests.

pub mod analysis;
pub mod classify;
mod error;
pub mod eval;
pub mod features;
pub mod geo;
pub mod image;
pub mod profile;
pub mod synth;
pub mod text;
pub mod wordnet;

pub use error::{Error, Result};

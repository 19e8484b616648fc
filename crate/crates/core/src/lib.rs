//! Affective and moral analysis of news posts and their engagement.
//!
//! The crate is organised as a chain of stages that can be used on their own
//! or driven end to end through [`pipeline`]:
//!
//! - [`corpus`]: post records, JSON-lines ingestion and reply trees.
//! - [`textprep`]: normalisation, stopwords, lemmas and bag-of-words vocabularies.
//! - [`affect`]: lexicon scoring of eight emotions, sentiment and five moral
//!   foundations split into virtue and vice.
//! - [`themes`]: hashtag embeddings, consensus K-means with PAC model
//!   selection, and L1 label propagation to untagged posts.
//! - [`factors`]: non-negative factorisation of the 18-column affect matrix.
//! - [`engage`]: quantile normalisation, VIF screening and OLS reports for
//!   engagement targets.
//! - [`synth`]: planted-truth corpus generator used by tests and examples.

pub mod affect;
pub mod corpus;
pub mod engage;
pub mod error;
pub mod factors;
pub mod pipeline;
pub mod synth;
pub mod textprep;
pub mod themes;

pub(crate) mod linalg;
pub(crate) mod seeds;

pub use error::{Error, Result};

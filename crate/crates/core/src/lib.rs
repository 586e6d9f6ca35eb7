//! Corpus analytics for annotated conversation transcripts.
//!
//! The pipeline parses transcripts into a typed event model, ranks
//! category-characteristic n-grams with a Scaled F-score, profiles minimal
//! particles and turn-taking behaviour, and predicts binary speaker
//! categories per speaker or per turn with an L2-regularized logistic
//! regression.

pub mod corpus;
pub mod nonlex;
pub mod rng;
pub mod salience;
pub mod tokenizer;
pub mod classifier;
pub mod cohorts;
pub mod stats;
pub mod synth;
pub mod experiment;

//! Induction and evaluation of liberty/oppression polarity lexicons.
//!
//! Two induction routes are provided: embedding similarity against
//! data-driven seed words ([`we`]) and compositional projection of document
//! labels onto words ([`cs`]). Lexicons can be merged ([`lexicon`]), turned into
//! document features ([`features`]) and evaluated with a logistic-regression
//! harness and Friedman ranking ([`learn`], [`experiments`]).

pub mod corpus;
pub mod cs;
pub mod digest;
pub mod embedding;
pub mod experiments;
pub mod error;
pub mod features;
pub mod learn;
pub mod lexicon;
pub mod manifest;
pub mod seeds;
pub mod svd;
pub mod synthetic;
pub mod we;

pub use error::{Error, Result};

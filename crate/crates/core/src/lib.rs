//! Toolkit for n-best ASR hypothesis corpora used in generative error
//! correction: ingestion and normalization, word-level alignment and WER,
//! novelty statistics, instruction-prompt corpora, and result tables.

pub mod cli;
pub mod config;
pub mod corpus;
mod error;
pub mod manifest;
pub mod names;
pub mod promptgen;
pub mod report;
pub mod scoring;
pub mod stats;

pub use error::{Error, Result};

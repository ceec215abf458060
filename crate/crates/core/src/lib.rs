//! Generation of contextual vocabulary materials: a story script with one
//! sentence per target word, plus a sticker image per word, produced by
//! pluggable text and image providers and tracked as jobs.

pub mod domain;
pub mod ids;
pub mod parser;
pub mod orchestrator;
pub mod prompt;
pub mod store;
#[cfg(feature = "testkit")]
pub mod testkit;

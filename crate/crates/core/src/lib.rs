//! Differential conformance testing for JSON parsers.
//!
//! A configurable reference engine provides a family of parser variants;
//! external libraries plug in through adapters. The harness runs every
//! backend over a labeled corpus, classifies each run into a fine label
//! and a coarse outcome class, and the analysis layer turns the resulting
//! report into outcome tables, pairwise behavioral distances and consensus
//! histograms. A multi-version facade uses the same backends to parse one
//! document several ways and vote on the result.

pub mod backend;
pub mod engine;
pub mod model;
pub mod number;
pub mod corpus;
pub mod harness;
pub mod stats;
pub mod analysis;
pub mod typeprobe;
pub mod multiversion;

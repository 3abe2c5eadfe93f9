//! Reference-free detection of coverage errors (omitted source content and
//! superfluous target content) in machine translation.
//!
//! A span is flagged when deleting it from one side makes the other side more
//! probable under a translation model. Candidate spans come from dependency
//! parses; scores come from any backend implementing [`scoring::ScoreBackend`].

pub mod cli;
pub mod conllu;
pub mod detector;
pub mod evalkit;
pub mod review;
pub mod scoring;
pub mod spans;
pub mod synthgen;

//! Gender-bias auditing for generated product descriptions.

pub mod classifier;
pub mod clients;
pub mod config;
pub mod corpus;
pub mod counterfactual;
pub mod detectors;
pub mod exec;
pub mod flagging;
pub mod lexicon;
pub mod report;
pub mod stats;
pub mod synth;

//! Indoor-factory positioning benchmark.
//!
//! A statistical InF-DH channel simulator, a dataset factory for the three
//! CIR/RSRP input encodings, a small reverse-mode network engine and the
//! LocNet model trained on top of it, plus CDF-percentile evaluation.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fsutil;
pub mod locnet;
pub mod manifest;
pub mod nn;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};

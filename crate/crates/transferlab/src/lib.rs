//! A desk-scale laboratory for studying the transferability of
//! word-substitution adversarial attacks on text classifiers.
//!
//! The crate trains a factor-structured zoo of small from-scratch models,
//! attacks them with greedy (saliency-weighted) and genetic word
//! substitution, measures how adversarial examples transfer between
//! models, searches for high-transfer attack ensembles, and distills
//! ensemble attacks into universal word-replacement rules that need no
//! access to a target model.
//!
//! Start with the runnable examples (`cargo run --example ...`) or the
//! `transferlab` binary for config-driven experiment pipelines.

pub mod attack;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod lexicon;
pub mod math;
pub mod rules;
pub mod synth;
pub mod transfer;
pub mod zoo;

pub use error::{Error, Result};

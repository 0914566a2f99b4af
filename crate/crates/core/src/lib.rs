//! Synthetic-negative supervision for self-supervised traversability.
//!
//! A robot that only drives on safe ground never observes what it must
//! avoid. This crate composes synthetic obstacle regions into traversable
//! ground and trains a per-pixel embedding with explicit negative terms,
//! in both a positive-unlabeled and a positive-negative setting.
//!
//! The pipeline runs end to end on generated toy scenes:
//!
//! - [`scene`] renders scenes, simulates a trajectory and derives labels.
//! - [`negatives`] proposes, filters and composes synthetic negatives.
//! - [`embedding`] is the trainable per-pixel feature extractor.
//! - [`losses`] holds both objectives with analytic gradients.
//! - [`trainer`] runs seeded, deterministic training with Adam.
//! - [`eval`] provides pixel metrics, object-centric FPR and score densities.
//! - [`pipeline`] wires generation, training, evaluation and ablations.
//! - [`format`], [`plot`] and [`cli`] handle artifacts.

pub mod cli;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod format;
pub mod losses;
pub mod mat;
pub mod negatives;
pub mod pipeline;
pub mod plot;
pub mod scene;
pub mod trainer;

pub use error::{Error, Result};

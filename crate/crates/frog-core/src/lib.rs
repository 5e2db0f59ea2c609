//! frog-core: a friend-recommendation toolkit built around FROG, a
//! multi-modal model that scores candidate friendships with a pairwise
//! co-attention Matching-Net and fuses local (per-pair) and global
//! (shared decision plane) preference signals through a sigmoid head,
//! trained with focal loss.
//!
//! The crate is self-contained: dense tensors with reverse-mode autodiff,
//! GraphSAGE-style graph encoding, a deterministic synthetic social-network
//! generator, ranking evaluation (HR@k / NDCG@k), baselines and ablations,
//! plus a CLI (`frog`) wiring it all to config files.

pub mod cli;
pub mod config;
pub mod data;
pub mod encoders;
pub mod error;
pub mod graph;
pub mod model;
pub mod numerics;
pub mod report;
pub mod train;
pub mod rng;

pub use error::{Error, Result};

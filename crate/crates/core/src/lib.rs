//! Growing dual-memory (GDM) continual learning.
//!
//! An episodic Gamma-GWR learns instance-level prototypes of incoming feature
//! sequences; a semantic Gamma-GWR, fed with the episodic winners, learns
//! category-level prototypes and only grows on misclassification. Temporal
//! links in the episodic memory drive intrinsic replay of pseudo-sequences
//! between learning episodes.
//!
//! The crate also ships a synthetic sequential feature generator with its
//! on-disk format, experiment protocols (batch, incremental, NI/NC/NIC), and a
//! PCA projection helper for inspecting trained networks.

mod codec;
pub mod datagen;
pub mod error;
pub mod gdm;
pub mod gwr;
pub mod metric;
pub mod pca;
pub mod scenarios;

pub use error::{GdmError, Result};

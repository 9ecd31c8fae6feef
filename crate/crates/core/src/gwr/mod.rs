//! Gamma-GWR: a grow-when-required network whose neurons carry K gamma-memory
//! context descriptors next to their weight vector.
//!
//! Each frame is processed as: global context update, context-weighted BMU
//! search, activation, then either insertion of a new neuron (activity and
//! habituation both below threshold) or adaptation and habituation of the BMU
//! and its direct neighbours. Edges between co-firing neurons carry ages,
//! temporal links count consecutive winners, and each neuron keeps associative
//! label counters at instance and category level.

mod kernel;
mod labels;
mod net;
mod params;
mod snapshot;

pub use kernel::{activation, adapt_toward, global_context, habituate, habituation_floor};
pub use labels::{Label, LabelCounts, LabelLevel};
pub use net::{
    BestMatch, ContextState, GammaGwr, GrowthMode, Neuron, NeuronId, PruneReport, StepLabels, StepOutcome,
};
pub use params::{ContextRate, GwrParams, DEFAULT_CONTEXT_WEIGHTS, DEFAULT_MAX_EDGE_AGE};
pub use snapshot::{NET_MAGIC, NET_VERSION};

//! Bayesian inference of latent partial orders from observed linear extensions.
//!
//! Items carry latent embeddings whose coordinatewise dominance defines a
//! product order. Observed rankings are modelled by a frontier-softmax
//! sequential choice process: at each step only items with no remaining
//! predecessor may be chosen, weighted by how many remaining items they
//! dominate. The [`relaxlik`] module provides a smooth surrogate of this
//! likelihood so that gradient samplers and variational inference apply.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dataset;
pub mod decode;
pub mod draws;
pub mod error;
pub mod hardlik;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod poset;
pub mod relaxlik;
pub mod samplers;
pub mod synth;

pub use dataset::{Dataset, Split};
pub use draws::{Draw, DrawMeta, DrawSet};
pub use error::{Error, Result};
pub use hardlik::{Embedding, Trace};
pub use matrix::{BoolMatrix, Matrix};
pub use model::{ModelParams, PriorConfig, UnconstrainedParams};
pub use poset::{PartialOrder, WeightedDigraph};
pub use relaxlik::{RelaxConfig, SoftPrecedence};

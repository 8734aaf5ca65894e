//! Non-Bayesian baselines: pairwise majority voting and a differentiable
//! DAG fitted with the frontier-softmax likelihood.

pub mod majority;
pub mod softdag;

pub use majority::majority_fit;
pub use softdag::{softdag_fit, softdag_grid_search, SoftDagConfig, SoftDagFit};

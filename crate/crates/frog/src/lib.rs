//! Fair graph unlearning at desk scale.
//!
//! The pipeline trains a small GCN link predictor, removes requested edges or
//! nodes by jointly rewiring the graph (fair augmentation plus sparse pruning)
//! and updating the model, and then audits both unlearning effectiveness and
//! group fairness. Worst-case forget sets can be selected adversarially, and
//! the two analytical bounds shipped with the method are checked numerically.
//!
//! Entry points:
//! - [`data`]: synthetic generators, dataset files, edge splits
//! - [`trainer`]: original training, unlearning methods, baselines
//! - [`worstcase`]: adversarial forget-set selection
//! - [`metrics`]: AUROC, knowledge gap, fairness gaps, bound verifiers
//! - [`cli`]: the command surface used by the `frog` binary

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod graph;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rewire;
pub mod trainer;
pub mod worstcase;

pub use error::{FrogError, Result};

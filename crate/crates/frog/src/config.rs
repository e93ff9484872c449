//! Run configuration: one flat TOML file per experiment, strict about
//! unknown keys, with command-line flags layered on top. The file echoed
//! into a run directory parses back to the exact same configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SyntheticSpec;
use crate::error::{FrogError, Result};
use crate::losses::{FairnessCaps, LossWeights};
use crate::trainer::{HyperParams, Method};

/// How the forget set is chosen for an unlearning run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgetSelector {
    /// Uniform over train edges near the test region.
    Uniform,
    /// Adversarial selection maximizing unlearning difficulty.
    WorstUnlearn,
    /// Adversarial selection maximizing fairness damage.
    WorstFair,
    /// Explicit edge list from `forget_file`.
    File,
}

impl ForgetSelector {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ForgetSelector::Uniform),
            "worst-unlearn" => Ok(ForgetSelector::WorstUnlearn),
            "worst-fair" => Ok(ForgetSelector::WorstFair),
            "file" => Ok(ForgetSelector::File),
            other => Err(FrogError::Config(format!(
                "unknown forget_mode '{other}'; expected uniform, worst-unlearn, worst-fair or file"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ForgetSelector::Uniform => "uniform",
            ForgetSelector::WorstUnlearn => "worst-unlearn",
            ForgetSelector::WorstFair => "worst-fair",
            ForgetSelector::File => "file",
        }
    }
}

/// Flat experiment configuration. Every key has a default, so a config file
/// only states what differs; unknown keys are rejected by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Dataset directory; when absent a synthetic graph is generated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub dataset_name: String,
    pub synth_nodes_per_group: usize,
    pub synth_feature_dim: usize,
    pub synth_separation: f64,
    pub synth_homophily: f64,
    pub synth_edges: usize,
    pub synth_seed: u64,

    /// One of frog, frog-joint, retrain, ga, gnndelete.
    pub method: String,
    pub seeds: Vec<u64>,
    /// Output root; falls back to $FROG_OUT_DIR, then ./runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,

    /// One of uniform, worst-unlearn, worst-fair, file.
    pub forget_mode: String,
    /// Fraction of all edges requested for deletion (uniform and worst-*).
    pub forget_pct: f64,
    /// Hop radius around test endpoints for uniform selection.
    pub forget_hops: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forget_file: Option<String>,

    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    pub unlearn_rounds: usize,
    pub leader_epochs: usize,
    pub follower_epochs: usize,
    pub unlearn_lr: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    pub candidate_radius: usize,
    pub candidate_cap: usize,
    pub scorer_hidden: usize,
    pub fairness_temp: f64,
    pub ga_epochs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hp = HyperParams::default();
        ExperimentConfig {
            dataset: None,
            dataset_name: "synthetic".to_string(),
            synth_nodes_per_group: 100,
            synth_feature_dim: 16,
            synth_separation: 1.0,
            synth_homophily: 0.8,
            synth_edges: 800,
            synth_seed: 0,
            method: Method::Frog.name().to_string(),
            seeds: vec![0],
            out_dir: None,
            forget_mode: ForgetSelector::Uniform.name().to_string(),
            forget_pct: 0.05,
            forget_hops: 3,
            forget_file: None,
            hidden: hp.hidden,
            lr: hp.lr,
            epochs: hp.epochs,
            patience: hp.patience,
            unlearn_rounds: hp.unlearn_rounds,
            leader_epochs: hp.leader_epochs,
            follower_epochs: hp.follower_epochs,
            unlearn_lr: hp.unlearn_lr,
            tau_start: hp.tau_start,
            tau_end: hp.tau_end,
            lambda: hp.weights.lambda,
            alpha: hp.weights.alpha,
            beta: hp.weights.beta,
            budget: hp.budget,
            candidate_radius: hp.candidate_radius,
            candidate_cap: hp.candidate_cap,
            scorer_hidden: hp.scorer_hidden,
            fairness_temp: hp.fairness_temp,
            ga_epochs: hp.ga_epochs,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| FrogError::Config(format!("{}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| FrogError::Config(format!("config {}: {e}", path.display())))?;
        Self::from_toml_str(&raw)
    }

    /// Canonical echo written into run directories; parses back to `self`.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| FrogError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        Method::parse(&self.method)?;
        let selector = ForgetSelector::parse(&self.forget_mode)?;
        if selector == ForgetSelector::File && self.forget_file.is_none() {
            return Err(FrogError::Config(
                "forget_mode = \"file\" needs forget_file".to_string(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(FrogError::Config("seeds must be non-empty".to_string()));
        }
        if selector != ForgetSelector::File && !(0.0 < self.forget_pct && self.forget_pct < 1.0) {
            return Err(FrogError::Config(format!(
                "forget_pct must be in (0, 1), got {}",
                self.forget_pct
            )));
        }
        if self.dataset.is_none() {
            self.synthetic_spec().validate()?;
        }
        self.hyperparams().validate()
    }

    pub fn method(&self) -> Result<Method> {
        Method::parse(&self.method)
    }

    pub fn forget_selector(&self) -> Result<ForgetSelector> {
        ForgetSelector::parse(&self.forget_mode)
    }

    pub fn hyperparams(&self) -> HyperParams {
        HyperParams {
            hidden: self.hidden.clone(),
            lr: self.lr,
            epochs: self.epochs,
            patience: self.patience,
            unlearn_rounds: self.unlearn_rounds,
            leader_epochs: self.leader_epochs,
            follower_epochs: self.follower_epochs,
            unlearn_lr: self.unlearn_lr,
            tau_start: self.tau_start,
            tau_end: self.tau_end,
            weights: LossWeights {
                lambda: self.lambda,
                alpha: self.alpha,
                beta: self.beta,
            },
            budget: self.budget,
            candidate_radius: self.candidate_radius,
            candidate_cap: self.candidate_cap,
            scorer_hidden: self.scorer_hidden,
            fairness_temp: self.fairness_temp,
            caps: FairnessCaps::default(),
            ga_epochs: self.ga_epochs,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec::basic(
            &self.dataset_name,
            self.synth_nodes_per_group,
            self.synth_feature_dim,
            self.synth_separation,
            self.synth_homophily,
            self.synth_edges,
            self.synth_seed,
        )
    }

    /// Output root in priority order: explicit key, $FROG_OUT_DIR, ./runs.
    pub fn out_root(&self) -> std::path::PathBuf {
        if let Some(d) = &self.out_dir {
            return d.into();
        }
        if let Ok(d) = std::env::var("FROG_OUT_DIR") {
            if !d.is_empty() {
                return d.into();
            }
        }
        "runs".into()
    }
}

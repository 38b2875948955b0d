use super::config::ExperimentConfig;
use crate::analysis::SpectrumReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Solve,
    Spectrum,
}

/// Self-describing output of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: CommandKind,
    pub config: ExperimentConfig,
    /// `maxit` after resolving `"auto"`.
    pub maxit: usize,
    /// `workers` after resolving `"auto"`.
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
    /// Extremes of the materialized `M`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    /// Extremes of the materialized `M·M̂⁻¹`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_preconditioned: Option<SpectrumReport>,
    /// Per-mode cross-check of `spectrum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_exact: Option<SpectrumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_preconditioned_exact: Option<SpectrumReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub wall_seconds: f64,
}

impl ResultRecord {
    pub fn new(command: CommandKind, config: &ExperimentConfig) -> Self {
        Self {
            command,
            config: config.clone(),
            maxit: config.resolved_maxit(),
            workers: config.resolved_workers(),
            iterations: None,
            final_residual: None,
            converged: None,
            residual_history: Vec::new(),
            spectrum: None,
            spectrum_preconditioned: None,
            spectrum_exact: None,
            spectrum_preconditioned_exact: None,
            objective: None,
            wall_seconds: 0.0,
        }
    }

    /// False only for a solve that did not reach the tolerance.
    pub fn succeeded(&self) -> bool {
        self.converged.unwrap_or(true)
    }
}

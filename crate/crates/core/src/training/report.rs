use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    EarlyStopped,
    MaxIters,
}

/// What happened during one optimisation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Penalised objective at the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    /// Mean validation log-likelihood per observation, one entry per iteration.
    pub validation_trace: Vec<f64>,
    pub stop_reason: Option<StopReason>,
    pub iterations: usize,
    pub wall_time_secs: f64,
    pub final_grad_norm: f64,
    pub seed: u64,
    /// Iteration whose parameters were kept when early stopping restored the best.
    pub best_iteration: Option<usize>,
    pub best_validation_loglik: Option<f64>,
    pub line_search_restarts: usize,
    pub warnings: Vec<String>,
}

impl FitReport {
    /// True when every accepted step kept the objective from increasing.
    pub fn objective_non_increasing(&self) -> bool {
        self.objective_trace.windows(2).all(|w| w[1] <= w[0])
    }
}

//! Per-iteration run records.

use serde::{Deserialize, Serialize};

use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Descent,
    Escape,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Descent => "descent",
            Phase::Escape => "escape",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Gradient threshold reached and a full escape attempt failed.
    Converged,
    BudgetExceeded,
}

/// Oracle-side bookkeeping for one round.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundAudit {
    /// Set when the aggregator fell back to another rule.
    pub fallback: Option<String>,
    /// Whether a targeting adversary's aggregate landed within the budget
    /// of its target; `None` when no targeted attack was active.
    pub attack_on_target: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub phase: Phase,
    pub w: ParamVector,
    pub g_hat: ParamVector,
    pub grad_norm_hat: f64,
    pub grad_norm_true: Option<f64>,
    /// `||g_hat - grad F(w)||`
    pub oracle_error: Option<f64>,
    pub escape_round: Option<u32>,
    pub escape_step: Option<u32>,
    pub dist_from_round_start: Option<f64>,
    /// True on the record where the escape distance test fired.
    pub escaped: bool,
    pub audit: RoundAudit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub w_tilde: ParamVector,
    pub grad_norm_true: Option<f64>,
    pub min_eig: Option<f64>,
    pub parallel_iterations: u64,
    pub escapes_attempted: u64,
    pub escapes_succeeded: u64,
    pub status: Termination,
    /// `max_t ||w_t - w_0||` over every visited iterate.
    pub max_dist_from_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
}

impl RunTrace {
    /// Records at which an escape was declared.
    pub fn escape_events(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.escaped)
    }

    /// Largest oracle error observed, when the true gradient was known.
    pub fn max_oracle_error(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.oracle_error).reduce(f64::max)
    }
}

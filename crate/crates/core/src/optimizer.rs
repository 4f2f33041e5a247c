//! Robust perturbed gradient descent driven by an inexact gradient oracle.
//!
//! The main loop steps `w <- w - eta g_hat(w)` until the aggregated gradient
//! is below `eps`, then runs [`escape`]: up to `Q` rounds of a uniform-ball
//! perturbation followed by at most `T_th` inexact descent steps, declaring
//! escape as soon as the iterate has moved `R` from the round's start. A
//! failed escape ends the run.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::ProblemMeta;
use crate::rng;
use crate::trace::{IterationRecord, Phase, RoundAudit, RunSummary, RunTrace, Termination};
use crate::vector::ParamVector;

/// Knobs of the algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub eps: f64,
    pub r: f64,
    /// Escape distance `R`.
    pub big_r: f64,
    /// Perturbation rounds; 0 disables escape entirely.
    pub q: u32,
    pub t_th: u32,
    pub delta_inexact: f64,
    pub delta_fail: f64,
    pub max_parallel_iters: u64,
    /// Bounds implied by the derivation, when the config was derived.
    #[serde(default)]
    pub guarantee: Option<ConvergenceGuarantee>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceGuarantee {
    pub grad_norm_bound: f64,
    pub min_eig_bound: f64,
    pub iter_bound: u64,
}

fn ceil_at_least_one(x: f64) -> u64 {
    if x.is_finite() && x > 1.0 {
        x.ceil() as u64
    } else if x.is_nan() || x <= 1.0 {
        1
    } else {
        u64::MAX
    }
}

/// Iterations one full escape call may consume, plus the gradient query
/// that triggers it.
fn escape_floor(q: u32, t_th: u32) -> u64 {
    1 + q as u64 * (t_th as u64 + 1)
}

/// Parameters for an oracle that is `delta`-inexact everywhere, failing with
/// probability at most `delta_fail`.
pub fn derive_config(meta: &ProblemMeta, delta: f64, delta_fail: f64) -> Result<OptimizerConfig> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::usage(format!("inexactness delta must satisfy 0 < delta <= 1, got {delta}")));
    }
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(Error::usage(format!("failure probability must satisfy 0 < delta < 1, got {delta_fail}")));
    }
    let d = meta.dim as f64;
    let l = meta.smoothness;
    let rho = meta.hessian_lipschitz;
    let gap = meta.initial_gap;

    let a = delta.powf(0.4) * d.powf(0.2);
    let b = delta.powf(0.6) * d.powf(0.3);
    let r = 4.0 * b / rho.sqrt();
    let big_r = a / rho.sqrt();
    let log_arg = rho * gap / (48.0 * l * delta_fail * (delta.powf(1.2) * d.powf(0.6) + delta.powf(1.4) * d.powf(0.7)));
    let q = ceil_at_least_one(2.0 * log_arg.ln()).min(u32::MAX as u64) as u32;
    let t_th = ceil_at_least_one(l / (384.0 * (rho.sqrt() + l) * (a + b))).min(u32::MAX as u64) as u32;

    let iter_bound = ceil_at_least_one(2.0 * gap * l / (3.0 * delta * delta) * q as f64);
    let guarantee = ConvergenceGuarantee {
        grad_norm_bound: 4.0 * delta,
        min_eig_bound: -1900.0 * (rho.sqrt() + l) * a * (10.0 / delta).ln(),
        iter_bound,
    };
    Ok(OptimizerConfig {
        eta: 1.0 / l,
        eps: 3.0 * delta,
        r,
        big_r,
        q,
        t_th,
        delta_inexact: delta,
        delta_fail,
        max_parallel_iters: iter_bound.max(escape_floor(q, t_th)),
        guarantee: Some(guarantee),
    })
}

/// Parameters for an exact oracle at gradient threshold `eps`.
pub fn derive_exact_config(meta: &ProblemMeta, eps: f64, delta_fail: f64) -> Result<OptimizerConfig> {
    let l = meta.smoothness;
    let rho = meta.hessian_lipschitz;
    let upper = (1.0 / rho).min(4.0 / (l * l * rho));
    if !(eps > 0.0 && eps < upper) {
        return Err(Error::usage(format!("eps must satisfy 0 < eps < {upper}, got {eps}")));
    }
    if !(delta_fail > 0.0 && delta_fail < 1.0) {
        return Err(Error::usage(format!("failure probability must satisfy 0 < delta < 1, got {delta_fail}")));
    }
    let d = meta.dim as f64;
    let gap = meta.initial_gap;
    let r = eps;
    let big_r = (eps / rho).sqrt();
    let t_th = ceil_at_least_one(l / (12.0 * rho * (big_r + r))).min(u32::MAX as u64) as u32;
    let iter_bound = ceil_at_least_one(2.0 * l * gap / (eps * eps));
    let log_arg = 8.0 * rho * d.sqrt() * gap / (delta_fail * eps * eps);
    let guarantee = ConvergenceGuarantee {
        grad_norm_bound: eps,
        min_eig_bound: -60.0 * (rho * eps).sqrt() * log_arg.ln().max(0.0),
        iter_bound,
    };
    Ok(OptimizerConfig {
        eta: 1.0 / l,
        eps,
        r,
        big_r,
        q: 1,
        t_th,
        delta_inexact: 0.0,
        delta_fail,
        max_parallel_iters: iter_bound.max(escape_floor(1, t_th)),
        guarantee: Some(guarantee),
    })
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("eta", self.eta), ("r", self.r), ("R", self.big_r)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("optimizer {name} must be > 0")));
            }
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::config("optimizer eps must be >= 0"));
        }
        if !(self.delta_inexact >= 0.0 && self.delta_inexact.is_finite()) {
            return Err(Error::config("optimizer delta_inexact must be >= 0"));
        }
        if !(self.delta_fail > 0.0 && self.delta_fail < 1.0) {
            return Err(Error::config("optimizer delta_fail must be in (0, 1)"));
        }
        if self.t_th == 0 {
            return Err(Error::config("optimizer T_th must be >= 1"));
        }
        if self.max_parallel_iters == 0 {
            return Err(Error::config("optimizer max_parallel_iters must be >= 1"));
        }
        Ok(())
    }

    /// Same knobs with escape disabled.
    pub fn without_escape(&self) -> OptimizerConfig {
        OptimizerConfig { q: 0, ..self.clone() }
    }
}

/// `w - eta g_hat`
pub fn descend_step(w: &ParamVector, g_hat: &ParamVector, eta: f64) -> ParamVector {
    let mut out = w.clone();
    out.axpy(-eta, g_hat);
    out
}

/// Where in the algorithm a gradient query comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryInfo {
    pub phase: Phase,
    pub round_index: u64,
    pub escape_round: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReply {
    pub g_hat: ParamVector,
    /// Population gradient, when known in closed form.
    pub true_grad: Option<ParamVector>,
    pub audit: RoundAudit,
}

/// A source of aggregated gradients. Each query is one parallel iteration.
pub trait GradientOracle {
    fn dim(&self) -> usize;
    fn query(&mut self, w: &ParamVector, info: &QueryInfo) -> Result<OracleReply>;
    /// Smallest Hessian eigenvalue at `w`, when known.
    fn hessian_min_eig(&self, _w: &ParamVector) -> Option<f64> {
        None
    }
    fn true_grad(&self, _w: &ParamVector) -> Option<ParamVector> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeOutcome {
    pub escaped: bool,
    pub iterate: ParamVector,
    pub aggregated_grad: ParamVector,
    pub rounds_used: u32,
    /// Descent steps taken over all rounds.
    pub steps_used: u64,
    /// The iteration budget ran out mid-escape.
    pub interrupted: bool,
}

/// Bookkeeping shared by the main loop and the escape routine.
#[derive(Debug)]
pub struct Recorder {
    records: Vec<IterationRecord>,
    budget: u64,
    w0: ParamVector,
    max_dist: f64,
}

impl Recorder {
    pub fn new(w0: &ParamVector, budget: u64) -> Self {
        Recorder { records: Vec::new(), budget, w0: w0.clone(), max_dist: 0.0 }
    }

    pub fn iterations(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn exhausted(&self) -> bool {
        self.iterations() >= self.budget
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    fn query<O: GradientOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        w: &ParamVector,
        phase: Phase,
        escape_round: Option<u32>,
    ) -> Result<Option<(OracleReply, usize)>> {
        if self.exhausted() {
            return Ok(None);
        }
        let info = QueryInfo { phase, round_index: self.iterations(), escape_round };
        let reply = oracle.query(w, &info)?;
        if !reply.g_hat.is_finite() {
            return Err(Error::NonFinite("gradient oracle"));
        }
        if !w.is_finite() {
            return Err(Error::NonFinite("iterate update"));
        }
        self.max_dist = self.max_dist.max(w.distance(&self.w0));
        let grad_norm_hat = reply.g_hat.norm();
        self.records.push(IterationRecord {
            iteration: info.round_index,
            phase,
            w: w.clone(),
            g_hat: reply.g_hat.clone(),
            grad_norm_hat,
            grad_norm_true: reply.true_grad.as_ref().map(ParamVector::norm),
            oracle_error: reply.true_grad.as_ref().map(|g| g.distance(&reply.g_hat)),
            escape_round,
            escape_step: None,
            dist_from_round_start: None,
            escaped: false,
            audit: reply.audit.clone(),
        });
        Ok(Some((reply, self.records.len() - 1)))
    }
}

/// Perturb-and-descend escape from `w_tilde`.
pub fn escape<O, R>(
    w_tilde: &ParamVector,
    cfg: &OptimizerConfig,
    oracle: &mut O,
    rng: &mut R,
    rec: &mut Recorder,
) -> Result<EscapeOutcome>
where
    O: GradientOracle + ?Sized,
    R: Rng + ?Sized,
{
    let dim = w_tilde.dim();
    let mut last_w = w_tilde.clone();
    let mut last_g = ParamVector::zeros(dim);
    let mut steps = 0u64;
    for k in 1..=cfg.q {
        let start = w_tilde.add(&rng::uniform_in_ball(rng, dim, cfg.r));
        let mut w = start.clone();
        for t in 0..=cfg.t_th {
            let Some((reply, idx)) = rec.query(oracle, &w, Phase::Escape, Some(k))? else {
                return Ok(EscapeOutcome {
                    escaped: false,
                    iterate: last_w,
                    aggregated_grad: last_g,
                    rounds_used: k,
                    steps_used: steps,
                    interrupted: true,
                });
            };
            let dist = w.distance(&start);
            let r = &mut rec.records[idx];
            r.escape_step = Some(t);
            r.dist_from_round_start = Some(dist);
            last_w = w.clone();
            last_g = reply.g_hat;
            if dist >= cfg.big_r {
                r.escaped = true;
                return Ok(EscapeOutcome {
                    escaped: true,
                    iterate: last_w,
                    aggregated_grad: last_g,
                    rounds_used: k,
                    steps_used: steps,
                    interrupted: false,
                });
            }
            if t < cfg.t_th {
                w = descend_step(&w, &last_g, cfg.eta);
                steps += 1;
            }
        }
    }
    Ok(EscapeOutcome {
        escaped: false,
        iterate: last_w,
        aggregated_grad: last_g,
        rounds_used: cfg.q,
        steps_used: steps,
        interrupted: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub w_tilde: ParamVector,
    pub trace: RunTrace,
    pub guarantee_check: Option<ConvergenceGuarantee>,
    pub status: Termination,
}

impl PgdOutcome {
    pub fn converged(&self) -> bool {
        self.status == Termination::Converged
    }
}

/// Runs the full algorithm from `w0`. Running out of budget is reported in
/// the outcome's status, with the trace kept.
pub fn byzantine_pgd<O, R>(oracle: &mut O, cfg: &OptimizerConfig, w0: &ParamVector, rng: &mut R) -> Result<PgdOutcome>
where
    O: GradientOracle + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    w0.check_dim(oracle.dim())?;
    let mut rec = Recorder::new(w0, cfg.max_parallel_iters);
    let mut w = w0.clone();
    let mut attempted = 0u64;
    let mut succeeded = 0u64;

    let status = loop {
        let Some((reply, _)) = rec.query(oracle, &w, Phase::Descent, None)? else {
            break Termination::BudgetExceeded;
        };
        let g = reply.g_hat;
        if g.norm() <= cfg.eps {
            if cfg.q == 0 {
                break Termination::Converged;
            }
            attempted += 1;
            let out = escape(&w, cfg, oracle, rng, &mut rec)?;
            if out.interrupted {
                break Termination::BudgetExceeded;
            }
            if !out.escaped {
                break Termination::Converged;
            }
            succeeded += 1;
            w = descend_step(&out.iterate, &out.aggregated_grad, cfg.eta);
        } else {
            w = descend_step(&w, &g, cfg.eta);
        }
        if !w.is_finite() {
            return Err(Error::NonFinite("iterate update"));
        }
    };

    rec.max_dist = rec.max_dist.max(w.distance(w0));
    let summary = RunSummary {
        w_tilde: w.clone(),
        grad_norm_true: oracle.true_grad(&w).map(|g| g.norm()),
        min_eig: oracle.hessian_min_eig(&w),
        parallel_iterations: rec.iterations(),
        escapes_attempted: attempted,
        escapes_succeeded: succeeded,
        status,
        max_dist_from_start: rec.max_dist,
    };
    Ok(PgdOutcome {
        w_tilde: w,
        trace: RunTrace { records: rec.records, summary },
        guarantee_check: cfg.guarantee,
        status,
    })
}

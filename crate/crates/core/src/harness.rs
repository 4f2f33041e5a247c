//! Experiment orchestration: data sharding, worker rounds, gradient
//! oracles, inexactness measurement, and seeded Monte-Carlo runs.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversaries::{AdversaryStrategy, RoundContext};
use crate::aggregators::{AggregatorSpec, GradientBatch};
use crate::error::{Error, Result};
use crate::optimizer::{
    byzantine_pgd, derive_config, derive_exact_config, GradientOracle, OptimizerConfig, OracleReply, QueryInfo,
};
use crate::output::SCHEMA_VERSION;
use crate::problems::{Problem, SampleSet};
use crate::rng::{self, SimRng, Stream};
use crate::trace::{RoundAudit, RunTrace, Termination};
use crate::vector::ParamVector;

/// Default constant `C` of the boundedness radius `C (F0 - F*) / Delta`.
pub const DEFAULT_BOUND_C: f64 = 10.0;
pub const DEFAULT_PROBES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    Workers,
    /// The adversary picks the aggregate directly inside the budget ball.
    OracleOverride,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum OptimizerSource {
    /// Derived for a `delta`-inexact oracle.
    Inexact { delta: f64, delta_fail: f64 },
    /// Derived for an exact oracle at gradient threshold `eps`.
    Exact { eps: f64, delta_fail: f64 },
    Manual {
        #[serde(flatten)]
        config: OptimizerConfig,
    },
}

/// Restricts an initial-point sampler to `|w_k| <= half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    pub coordinate: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum W0Sampler {
    /// Uniform on a ball (optionally intersected with a slab), drawn from
    /// the seed's init stream.
    UniformBall {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
        #[serde(default)]
        slab: Option<Slab>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Point(Vec<f64>),
    Sampler(W0Sampler),
}

impl InitSpec {
    pub fn sample(&self, dim: usize, seed: u64) -> Result<ParamVector> {
        match self {
            InitSpec::Point(v) => {
                let w = ParamVector::new(v.clone())?;
                w.check_dim(dim)?;
                Ok(w)
            }
            InitSpec::Sampler(W0Sampler::UniformBall { center, radius, slab }) => {
                let c = match center {
                    Some(c) => ParamVector::new(c.clone())?,
                    None => ParamVector::zeros(dim),
                };
                c.check_dim(dim)?;
                let mut r = rng::substream(seed, Stream::Init);
                for _ in 0..1_000_000 {
                    let p = rng::uniform_in_ball(&mut r, dim, *radius);
                    if slab.is_none_or(|s| p[s.coordinate].abs() <= s.half_width) {
                        return Ok(c.add(&p));
                    }
                }
                Err(Error::config("w0 slab rejects nearly all of the ball"))
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            InitSpec::Point(v) if v.len() != dim => Err(Error::DimensionMismatch { expected: dim, got: v.len() }),
            InitSpec::Sampler(W0Sampler::UniformBall { radius, slab, center }) => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::config("w0 radius must be finite and >= 0"));
                }
                if let Some(c) = center {
                    if c.len() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, got: c.len() });
                    }
                }
                if let Some(s) = slab {
                    if s.coordinate >= dim || !(s.half_width > 0.0) {
                        return Err(Error::config("w0 slab needs a valid coordinate and half_width > 0"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn default_probe_count() -> usize {
    DEFAULT_PROBES
}
fn default_bound_c() -> f64 {
    DEFAULT_BOUND_C
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    #[serde(default = "default_probe_count")]
    pub count: usize,
    /// Region radius; defaults to half of `C (F0 - F*) / Delta`, at least 1.
    #[serde(default)]
    pub radius: Option<f64>,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec { count: DEFAULT_PROBES, radius: None }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_one() -> usize {
    1
}
fn default_aggregator() -> AggregatorSpec {
    AggregatorSpec::Median
}
fn default_adversary() -> AdversaryStrategy {
    AdversaryStrategy::None
}

/// A complete experiment description, read from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub problem: Problem,
    /// Optional cross-check against the problem's dimension.
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default = "default_one")]
    pub m: usize,
    #[serde(default = "default_one")]
    pub n: usize,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_aggregator")]
    pub aggregator: AggregatorSpec,
    #[serde(default = "default_adversary")]
    pub adversary: AdversaryStrategy,
    #[serde(default)]
    pub oracle_mode: OracleMode,
    /// Adversary budget; defaults to the optimizer's inexactness level.
    #[serde(default)]
    pub delta: Option<f64>,
    pub optimizer: OptimizerSource,
    /// Skip the escape routine (plain robust gradient descent).
    #[serde(default)]
    pub disable_escape: bool,
    #[serde(default)]
    pub max_parallel_iters: Option<u64>,
    pub seeds: Vec<u64>,
    pub w0: InitSpec,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default = "default_bound_c")]
    pub boundedness_c: f64,
}

impl ExperimentSpec {
    /// Parses a spec; files ending in `.toml` are TOML, anything else JSON.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let spec: ExperimentSpec = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::config(format!("invalid JSON config: {e}")))?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn byzantine_count(&self) -> usize {
        (self.alpha * self.m as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.problem.validate()?;
        let dim = self.dim();
        if let Some(d) = self.dim {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::usage("seed list is empty"));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::config("m and n must be >= 1"));
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return Err(Error::config(format!("alpha = {} violates α ∈ (0, 1/2)", self.alpha)));
        }
        let am = self.alpha * self.m as f64;
        if (am - am.round()).abs() > 1e-9 {
            return Err(Error::config(format!("alpha * m = {am} must be an integer")));
        }
        if self.oracle_mode == OracleMode::Workers {
            self.aggregator.validate()?;
        }
        self.adversary.validate(dim)?;
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::config("delta must be finite and >= 0"));
            }
        }
        match &self.optimizer {
            OptimizerSource::Manual { config } => config.validate()?,
            OptimizerSource::Inexact { delta, delta_fail } => {
                if !(*delta > 0.0 && *delta <= 1.0) {
                    return Err(Error::config(format!("inexact delta = {delta} violates 0 < Δ ≤ 1")));
                }
                if !(*delta_fail > 0.0 && *delta_fail < 1.0) {
                    return Err(Error::config("delta_fail must be in (0, 1)"));
                }
            }
            OptimizerSource::Exact { eps, delta_fail } => {
                let l = self.problem.smoothness();
                let rho = self.problem.hessian_lipschitz();
                let upper = (1.0 / rho).min(4.0 / (l * l * rho));
                if !(*eps > 0.0 && *eps < upper) {
                    return Err(Error::config(format!("exact eps = {eps} violates 0 < ε < {upper}")));
                }
                if !(*delta_fail > 0.0 && *delta_fail < 1.0) {
                    return Err(Error::config("delta_fail must be in (0, 1)"));
                }
            }
        }
        if self.oracle_mode == OracleMode::OracleOverride && !(self.adversary_budget() > 0.0) {
            return Err(Error::config("oracle_override needs a positive delta"));
        }
        if self.max_parallel_iters == Some(0) {
            return Err(Error::config("max_parallel_iters must be >= 1"));
        }
        if !(self.boundedness_c > 0.0) {
            return Err(Error::config("boundedness_c must be > 0"));
        }
        if let Some(r) = self.probe.radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config("probe radius must be finite and >= 0"));
            }
        }
        self.w0.validate(dim)
    }

    /// Budget handed to the adversary.
    pub fn adversary_budget(&self) -> f64 {
        self.delta.unwrap_or(match &self.optimizer {
            OptimizerSource::Inexact { delta, .. } => *delta,
            OptimizerSource::Exact { .. } => 0.0,
            OptimizerSource::Manual { config } => config.delta_inexact,
        })
    }

    /// Optimizer configuration for a run starting at `w0`.
    pub fn optimizer_config(&self, w0: &ParamVector) -> Result<OptimizerConfig> {
        let meta = self.problem.meta(w0)?;
        let mut cfg = match &self.optimizer {
            OptimizerSource::Inexact { delta, delta_fail } => derive_config(&meta, *delta, *delta_fail)?,
            OptimizerSource::Exact { eps, delta_fail } => derive_exact_config(&meta, *eps, *delta_fail)?,
            OptimizerSource::Manual { config } => config.clone(),
        };
        if self.disable_escape {
            cfg = cfg.without_escape();
        }
        if let Some(b) = self.max_parallel_iters {
            cfg.max_parallel_iters = b;
        }
        Ok(cfg)
    }

    /// Builds the gradient oracle for one seed.
    pub fn oracle(&self, seed: u64) -> Result<Box<dyn GradientOracle + Send>> {
        let budget = self.adversary_budget();
        Ok(match self.oracle_mode {
            OracleMode::Exact => Box::new(ExactOracle::new(self.problem.clone())),
            OracleMode::OracleOverride => {
                Box::new(OverrideOracle::new(self.problem.clone(), self.adversary.clone(), budget, seed))
            }
            OracleMode::Workers => {
                let pool = shard_data(&self.problem, self.m, self.n, self.alpha, seed)?;
                Box::new(WorkerOracle::new(
                    self.problem.clone(),
                    pool,
                    self.aggregator.clone(),
                    self.adversary.clone(),
                    budget,
                    seed,
                ))
            }
        })
    }

    /// Radius of the boundedness ball `C (F0 - F*) / Delta`.
    pub fn boundedness_radius(&self, cfg: &OptimizerConfig, w0: &ParamVector) -> Result<Option<f64>> {
        let gap = self.problem.meta(w0)?.initial_gap;
        let scale = if cfg.delta_inexact > 0.0 { cfg.delta_inexact } else { cfg.eps };
        Ok((gap > 0.0 && scale > 0.0).then(|| self.boundedness_c * gap / scale))
    }

    pub fn probe_radius(&self, w0: &ParamVector) -> Result<f64> {
        if let Some(r) = self.probe.radius {
            return Ok(r);
        }
        let gap = self.problem.meta(w0)?.initial_gap;
        let delta = self.adversary_budget();
        let delta = if delta > 0.0 { delta } else { 1.0 };
        Ok((0.5 * self.boundedness_c * gap / delta).max(1.0))
    }
}

fn query_context<'a>(
    w: &'a ParamVector,
    honest: &'a [ParamVector],
    own: &'a [ParamVector],
    true_grad: &'a ParamVector,
    info: &QueryInfo,
) -> RoundContext<'a> {
    RoundContext {
        w,
        honest_grads: honest,
        byzantine_own_grads: own,
        true_grad,
        phase: info.phase,
        round_index: info.round_index,
        escape_round: info.escape_round,
    }
}

/// Returns the population gradient itself.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    problem: Problem,
}

impl ExactOracle {
    pub fn new(problem: Problem) -> Self {
        ExactOracle { problem }
    }
}

impl GradientOracle for ExactOracle {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn query(&mut self, w: &ParamVector, _info: &QueryInfo) -> Result<OracleReply> {
        let g = self.problem.grad(w)?;
        Ok(OracleReply { g_hat: g.clone(), true_grad: Some(g), audit: RoundAudit::default() })
    }

    fn hessian_min_eig(&self, w: &ParamVector) -> Option<f64> {
        self.problem.hessian_min_eig(w).ok()
    }

    fn true_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        self.problem.grad(w).ok()
    }
}

/// The adversary answers every query with a vector of its choice within
/// `budget` of the population gradient.
#[derive(Debug, Clone)]
pub struct OverrideOracle {
    problem: Problem,
    adversary: AdversaryStrategy,
    budget: f64,
    rng: SimRng,
}

impl OverrideOracle {
    pub fn new(problem: Problem, adversary: AdversaryStrategy, budget: f64, seed: u64) -> Self {
        OverrideOracle { problem, adversary, budget, rng: rng::substream(seed, Stream::Adversary) }
    }
}

impl GradientOracle for OverrideOracle {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn query(&mut self, w: &ParamVector, info: &QueryInfo) -> Result<OracleReply> {
        let g = self.problem.grad(w)?;
        let ctx = query_context(w, &[], &[], &g, info);
        let g_hat = self.adversary.oracle_vector(&ctx, self.budget, &mut self.rng);
        let attack_on_target = self.adversary.attack_target(&ctx, self.budget).map(|t| t == g_hat);
        Ok(OracleReply { g_hat, true_grad: Some(g), audit: RoundAudit { fallback: None, attack_on_target } })
    }

    fn hessian_min_eig(&self, w: &ParamVector) -> Option<f64> {
        self.problem.hessian_min_eig(w).ok()
    }

    fn true_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        self.problem.grad(w).ok()
    }
}

/// `m` workers with disjoint sample shards; exactly `alpha m` of them are
/// Byzantine.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    pub shards: Vec<SampleSet>,
    pub byzantine_mask: Vec<bool>,
}

impl WorkerPool {
    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn byzantine_count(&self) -> usize {
        self.byzantine_mask.iter().filter(|b| **b).count()
    }
}

/// Each worker draws its shard from its own substream of `seed`, so a
/// larger `n` extends the same shards rather than redrawing them. The
/// Byzantine set is a uniformly random subset of size `alpha m`.
pub fn shard_data(problem: &Problem, m: usize, n: usize, alpha: f64, seed: u64) -> Result<WorkerPool> {
    if m == 0 || n == 0 {
        return Err(Error::usage("m and n must be >= 1"));
    }
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::config(format!("alpha = {alpha} violates α ∈ (0, 1/2)")));
    }
    let am = alpha * m as f64;
    if (am - am.round()).abs() > 1e-9 {
        return Err(Error::config(format!("alpha * m = {am} must be an integer")));
    }
    let shards = (0..m)
        .map(|i| {
            let mut r = rng::substream_raw(seed, ((Stream::Data as u64) << 32) | i as u64);
            problem.draw_samples(&mut r, n)
        })
        .collect();
    let mut mask = vec![false; m];
    let mut r = rng::substream(seed, Stream::Assignment);
    for i in index::sample(&mut r, m, am.round() as usize) {
        mask[i] = true;
    }
    Ok(WorkerPool { shards, byzantine_mask: mask })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutput {
    pub g_hat: ParamVector,
    pub true_grad: ParamVector,
    /// Every message in worker order.
    pub messages: Vec<ParamVector>,
    pub audit: RoundAudit,
}

/// One parameter-server round: honest workers send their shard gradients,
/// Byzantine workers send crafted messages, and the master aggregates.
#[allow(clippy::too_many_arguments)]
pub fn round<R: Rng + ?Sized>(
    problem: &Problem,
    pool: &WorkerPool,
    w: &ParamVector,
    aggregator: &AggregatorSpec,
    adversary: &AdversaryStrategy,
    budget: f64,
    info: &QueryInfo,
    rng: &mut R,
) -> Result<RoundOutput> {
    let grads = pool.shards.iter().map(|s| problem.shard_grad(w, s)).collect::<Result<Vec<_>>>()?;
    let (mut honest, mut own) = (Vec::new(), Vec::new());
    for (g, &byz) in grads.iter().zip(&pool.byzantine_mask) {
        if byz { own.push(g.clone()) } else { honest.push(g.clone()) }
    }
    let true_grad = problem.grad(w)?;
    let ctx = query_context(w, &honest, &own, &true_grad, info);
    let crafted = adversary.craft(&ctx, own.len(), budget, rng);
    if crafted.len() != own.len() || crafted.iter().any(|v| v.dim() != w.dim() || !v.is_finite()) {
        return Err(Error::NonFinite("adversary message"));
    }
    let mut crafted = crafted.into_iter();
    let messages: Vec<ParamVector> = grads
        .iter()
        .zip(&pool.byzantine_mask)
        .map(|(g, &byz)| if byz { crafted.next().expect("one message per Byzantine worker") } else { g.clone() })
        .collect();

    // honest messages must be exactly the shard gradients
    for ((msg, shard), &byz) in messages.iter().zip(&pool.shards).zip(&pool.byzantine_mask) {
        if !byz {
            assert_eq!(*msg, problem.shard_grad(w, shard)?, "honest message altered");
        }
    }

    let batch = GradientBatch::new(messages, info.round_index)?;
    let agg = aggregator.aggregate(&batch)?;
    let attack_on_target = if own.is_empty() {
        None
    } else {
        adversary.attack_target(&ctx, budget).map(|t| agg.value.distance(&t) <= budget)
    };
    Ok(RoundOutput {
        g_hat: agg.value,
        true_grad,
        messages: batch.vectors().to_vec(),
        audit: RoundAudit { fallback: agg.fallback, attack_on_target },
    })
}

/// Worker-pool simulation behind the oracle interface.
#[derive(Debug, Clone)]
pub struct WorkerOracle {
    pub problem: Problem,
    pub pool: WorkerPool,
    pub aggregator: AggregatorSpec,
    pub adversary: AdversaryStrategy,
    pub budget: f64,
    rng: SimRng,
}

impl WorkerOracle {
    pub fn new(
        problem: Problem,
        pool: WorkerPool,
        aggregator: AggregatorSpec,
        adversary: AdversaryStrategy,
        budget: f64,
        seed: u64,
    ) -> Self {
        WorkerOracle { problem, pool, aggregator, adversary, budget, rng: rng::substream(seed, Stream::Adversary) }
    }

    pub fn round(&mut self, w: &ParamVector, info: &QueryInfo) -> Result<RoundOutput> {
        round(&self.problem, &self.pool, w, &self.aggregator, &self.adversary, self.budget, info, &mut self.rng)
    }
}

impl GradientOracle for WorkerOracle {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn query(&mut self, w: &ParamVector, info: &QueryInfo) -> Result<OracleReply> {
        let out = self.round(w, info)?;
        Ok(OracleReply { g_hat: out.g_hat, true_grad: Some(out.true_grad), audit: out.audit })
    }

    fn hessian_min_eig(&self, w: &ParamVector) -> Option<f64> {
        self.problem.hessian_min_eig(w).ok()
    }

    fn true_grad(&self, w: &ParamVector) -> Option<ParamVector> {
        self.problem.grad(w).ok()
    }
}

/// `count` points drawn uniformly from the ball of `radius` around `center`.
pub fn probe_grid(center: &ParamVector, radius: f64, count: usize, seed: u64) -> Vec<ParamVector> {
    let mut r = rng::substream(seed, Stream::Probe);
    (0..count).map(|_| center.add(&rng::uniform_in_ball(&mut r, center.dim(), radius))).collect()
}

/// `max_w ||g_hat(w) - grad F(w)||` over the probe points.
pub fn measure_inexactness<O: GradientOracle + ?Sized>(oracle: &mut O, probes: &[ParamVector]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, w) in probes.iter().enumerate() {
        let info = QueryInfo { phase: crate::trace::Phase::Descent, round_index: i as u64, escape_round: None };
        let reply = oracle.query(w, &info)?;
        let g = reply.true_grad.ok_or_else(|| Error::usage("inexactness needs a closed-form gradient"))?;
        worst = worst.max(reply.g_hat.distance(&g));
    }
    Ok(worst)
}

/// Measures the inexactness of a spec's oracle for one seed on its probe grid.
pub fn measure_spec_inexactness(spec: &ExperimentSpec, seed: u64) -> Result<f64> {
    let w0 = spec.w0.sample(spec.dim(), seed)?;
    let probes = probe_grid(&w0, spec.probe_radius(&w0)?, spec.probe.count, seed);
    measure_inexactness(spec.oracle(seed)?.as_mut(), &probes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord { kind: e.kind().to_string(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub config: OptimizerConfig,
    pub status: Termination,
    pub w_tilde: ParamVector,
    pub grad_norm_hat: Option<f64>,
    pub grad_norm_true: Option<f64>,
    pub min_eig: Option<f64>,
    pub parallel_iterations: u64,
    pub within_iter_bound: Option<bool>,
    pub escapes_attempted: u64,
    pub escapes_succeeded: u64,
    pub max_dist_from_start: f64,
    pub boundedness_radius: Option<f64>,
    pub bounded: Option<bool>,
    pub max_oracle_error: Option<f64>,
    pub fallback_rounds: u64,
    pub attack_rounds: u64,
    pub attack_on_target_rounds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub w0: Option<ParamVector>,
    pub run: Option<SeedRun>,
    pub error: Option<ErrorRecord>,
}

/// Order statistics with linear interpolation between ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Quantiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        };
        Some(Quantiles {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub seeds_total: usize,
    pub seeds_failed: usize,
    pub converged: usize,
    pub budget_exceeded: usize,
    /// Fraction of completed seeds with at least one successful escape.
    pub escape_success_rate: Option<f64>,
    pub grad_norm_true: Option<Quantiles>,
    pub min_eig: Option<Quantiles>,
    pub parallel_iterations: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: Option<String>,
    pub problem: String,
    pub oracle_mode: OracleMode,
    pub aggregator: String,
    pub adversary: String,
    pub seeds: Vec<SeedResult>,
    pub summary: ReportSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: Report,
    /// Traces of completed seeds, in seed order.
    pub traces: Vec<(u64, RunTrace)>,
}

/// Runs one seed end to end.
pub fn run_seed(spec: &ExperimentSpec, seed: u64) -> Result<(ParamVector, SeedRun, RunTrace)> {
    let w0 = spec.w0.sample(spec.dim(), seed)?;
    let cfg = spec.optimizer_config(&w0)?;
    let mut oracle = spec.oracle(seed)?;
    let mut pert = rng::substream(seed, Stream::Perturbation);
    let out = byzantine_pgd(oracle.as_mut(), &cfg, &w0, &mut pert)?;
    let s = &out.trace.summary;
    let radius = spec.boundedness_radius(&cfg, &w0)?;
    let records = &out.trace.records;
    let run = SeedRun {
        status: out.status,
        w_tilde: out.w_tilde.clone(),
        grad_norm_hat: records.iter().rev().find(|r| r.w == out.w_tilde).map(|r| r.grad_norm_hat),
        grad_norm_true: s.grad_norm_true,
        min_eig: s.min_eig,
        parallel_iterations: s.parallel_iterations,
        within_iter_bound: cfg.guarantee.map(|g| s.parallel_iterations <= g.iter_bound),
        escapes_attempted: s.escapes_attempted,
        escapes_succeeded: s.escapes_succeeded,
        max_dist_from_start: s.max_dist_from_start,
        boundedness_radius: radius,
        bounded: radius.map(|r| s.max_dist_from_start <= r),
        max_oracle_error: out.trace.max_oracle_error(),
        fallback_rounds: records.iter().filter(|r| r.audit.fallback.is_some()).count() as u64,
        attack_rounds: records.iter().filter(|r| r.audit.attack_on_target.is_some()).count() as u64,
        attack_on_target_rounds: records.iter().filter(|r| r.audit.attack_on_target == Some(true)).count() as u64,
        config: cfg,
    };
    Ok((w0, run, out.trace))
}

/// Runs every seed, in parallel on `threads` workers when given. Per-seed
/// failures are recorded in the report rather than aborting the run.
pub fn run_experiment(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let run_all = || -> Vec<(SeedResult, Option<RunTrace>)> {
        spec.seeds
            .par_iter()
            .map(|&seed| match run_seed(spec, seed) {
                Ok((w0, run, trace)) => (SeedResult { seed, w0: Some(w0), run: Some(run), error: None }, Some(trace)),
                Err(e) => (SeedResult { seed, w0: None, run: None, error: Some((&e).into()) }, None),
            })
            .collect()
    };
    let results = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::usage(format!("cannot start {t} threads: {e}")))?
            .install(run_all),
        None => run_all(),
    };
    let mut seeds = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (res, trace) in results {
        if let Some(t) = trace {
            traces.push((res.seed, t));
        }
        seeds.push(res);
    }
    let summary = summarize(&seeds);
    Ok(ExperimentOutput {
        report: Report {
            schema_version: SCHEMA_VERSION,
            name: spec.name.clone(),
            problem: spec.problem.name().to_string(),
            oracle_mode: spec.oracle_mode,
            aggregator: spec.aggregator.name().to_string(),
            adversary: spec.adversary.name().to_string(),
            seeds,
            summary,
        },
        traces,
    })
}

fn summarize(seeds: &[SeedResult]) -> ReportSummary {
    let runs: Vec<&SeedRun> = seeds.iter().filter_map(|s| s.run.as_ref()).collect();
    let collect = |f: fn(&SeedRun) -> Option<f64>| runs.iter().filter_map(|r| f(r)).collect::<Vec<_>>();
    ReportSummary {
        seeds_total: seeds.len(),
        seeds_failed: seeds.len() - runs.len(),
        converged: runs.iter().filter(|r| r.status == Termination::Converged).count(),
        budget_exceeded: runs.iter().filter(|r| r.status == Termination::BudgetExceeded).count(),
        escape_success_rate: (!runs.is_empty())
            .then(|| runs.iter().filter(|r| r.escapes_succeeded > 0).count() as f64 / runs.len() as f64),
        grad_norm_true: Quantiles::of(&collect(|r| r.grad_norm_true)),
        min_eig: Quantiles::of(&collect(|r| r.min_eig)),
        parallel_iterations: Quantiles::of(&collect(|r| Some(r.parallel_iterations as f64))),
    }
}

//! Acceptance suites. Each suite is a seeded Monte-Carlo or property check
//! that returns a serialisable report of measured values against
//! thresholds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversaries::{stuck_probability, AdversaryStrategy, RoundContext};
use crate::aggregators::{iterative_filter, AggregatorSpec, GradientBatch};
use crate::error::{Error, Result};
use crate::harness::{
    measure_inexactness, probe_grid, run_experiment, shard_data, ExperimentSpec, InitSpec, OptimizerSource,
    OracleMode, OverrideOracle, ProbeSpec, Slab, W0Sampler, WorkerOracle, DEFAULT_BOUND_C, DEFAULT_PROBES,
};
use crate::optimizer::{byzantine_pgd, derive_config, OptimizerConfig};
use crate::output::SCHEMA_VERSION;
use crate::problems::{Problem, ProblemMeta};
use crate::rng::{self, Stream};
use crate::trace::{Phase, Termination};
use crate::vector::ParamVector;

pub const SUITES: [&str; 6] =
    ["descent-lemma", "stuck-probability", "escape-exact", "escape-byzantine", "scaling-laws", "filter-recovery"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, measured: f64, lower: Option<f64>, upper: Option<f64>) -> Check {
        let passed = measured.is_finite()
            && lower.is_none_or(|l| measured >= l)
            && upper.is_none_or(|u| measured <= u);
        Check { name: name.to_string(), measured, lower, upper, passed }
    }

    pub fn at_least(name: &str, measured: f64, lower: f64) -> Check {
        Check::new(name, measured, Some(lower), None)
    }

    pub fn at_most(name: &str, measured: f64, upper: f64) -> Check {
        Check::new(name, measured, None, Some(upper))
    }

    pub fn within(name: &str, measured: f64, lower: f64, upper: f64) -> Check {
        Check::new(name, measured, Some(lower), Some(upper))
    }

    /// `measured vs bound` for console output.
    pub fn describe(&self) -> String {
        let bound = match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("in [{l}, {u}]"),
            (Some(l), None) => format!(">= {l}"),
            (None, Some(u)) => format!("<= {u}"),
            (None, None) => String::new(),
        };
        format!("{} = {:.6} (target {bound})", self.name, self.measured)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>, metrics: BTreeMap<String, f64>) -> SuiteReport {
        SuiteReport {
            schema_version: SCHEMA_VERSION,
            suite: suite.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            metrics,
        }
    }
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    match name {
        "descent-lemma" => descent_lemma(),
        "stuck-probability" => stuck_probability_suite(),
        "escape-exact" => escape_exact(),
        "escape-byzantine" => escape_byzantine(),
        "scaling-laws" => scaling_laws(),
        "filter-recovery" => filter_recovery(),
        other => Err(Error::usage(format!("unknown suite '{other}'; expected one of {}", SUITES.join(", ")))),
    }
}

const SUITE_SEED: u64 = 20_240_601;

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

pub const DESCENT_TRIALS: usize = 1000;
pub const DESCENT_DELTA: f64 = 0.1;

/// The four benchmark losses used by the descent-lemma suite.
pub fn descent_benchmarks() -> Result<Vec<Problem>> {
    let mut r = rng::substream(SUITE_SEED, Stream::Init);
    let mu = rng::standard_normal_vec(&mut r, 8).into_vec();
    Ok(vec![
        Problem::convex_1d(),
        Problem::quartic_1d(),
        Problem::saddle_2d(0.5, 1.0, 0.5)?,
        Problem::mean_estimation(mu, 1.0)?,
    ])
}

/// Largest value of `F(w') - [F(w) - |grad F|^2/(2L) + Delta^2/(2L)]` over
/// random inexact steps `w' = w - (grad F(w) + e)/L`, `|e| <= Delta`.
pub fn descent_lemma_slack(problem: &Problem, delta: f64, trials: usize, seed: u64) -> Result<(f64, usize)> {
    let mut r = rng::substream(seed, Stream::Trial);
    let l = problem.smoothness();
    let half = problem.probe_box();
    let center = problem.sample_mean();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let w = ParamVector::from(
            (0..problem.dim()).map(|k| center[k] + rand::Rng::random_range(&mut r, -half..half)).collect::<Vec<_>>(),
        );
        let g = problem.grad(&w)?;
        let e = rng::uniform_in_ball(&mut r, problem.dim(), delta);
        let w_next = crate::optimizer::descend_step(&w, &g.add(&e), 1.0 / l);
        let bound = problem.value(&w)? - g.norm_sq() / (2.0 * l) + delta * delta / (2.0 * l);
        let slack = problem.value(&w_next)? - bound;
        worst = worst.max(slack);
        if slack > 1e-9 {
            violations += 1;
        }
    }
    Ok((worst, violations))
}

fn descent_lemma() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut metrics = BTreeMap::new();
    for (i, p) in descent_benchmarks()?.iter().enumerate() {
        let (worst, violations) = descent_lemma_slack(p, DESCENT_DELTA, DESCENT_TRIALS, SUITE_SEED + i as u64)?;
        let name = format!("{}_d{}", p.name(), p.dim());
        metrics.insert(format!("{name}.max_slack"), worst);
        checks.push(Check::at_most(&format!("{name}.violation_rate"), fraction(violations, DESCENT_TRIALS), 0.0));
    }
    Ok(SuiteReport::new("descent-lemma", checks, metrics))
}

pub const STUCK_TRIALS: usize = 2000;
const STUCK_LAMBDA: f64 = 0.5;
const STUCK_RADIUS: f64 = 0.04;
const STUCK_ITERS: u64 = 300;

/// Fraction of uniform starts in `B_0(r)` from which plain robust gradient
/// descent against the curvature-kill oracle never leaves `B_0(r)`.
pub fn stuck_frequency(delta: f64, r: f64, trials: usize, seed: u64) -> Result<f64> {
    let problem = Problem::saddle_2d(STUCK_LAMBDA, 1.0, 0.5)?;
    let cfg = OptimizerConfig {
        eta: 1.0 / problem.smoothness(),
        eps: 0.0,
        r,
        big_r: r,
        q: 0,
        t_th: 1,
        delta_inexact: delta,
        delta_fail: 0.1,
        max_parallel_iters: STUCK_ITERS,
        guarantee: None,
    };
    let adversary = AdversaryStrategy::CurvatureKill { lambda: STUCK_LAMBDA, coordinate: 1 };
    let stuck = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let trial_seed = seed.wrapping_mul(1_000_003).wrapping_add(t);
            let w0 = rng::uniform_in_ball(&mut rng::substream(trial_seed, Stream::Init), 2, r);
            let mut oracle = OverrideOracle::new(problem.clone(), adversary.clone(), delta, trial_seed);
            let mut pert = rng::substream(trial_seed, Stream::Perturbation);
            let out = byzantine_pgd(&mut oracle, &cfg, &w0, &mut pert)?;
            Ok(out.trace.records.iter().all(|rec| rec.w.norm() <= r) && out.w_tilde.norm() <= r)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(fraction(stuck.iter().filter(|s| **s).count(), trials))
}

fn stuck_probability_suite() -> Result<SuiteReport> {
    let x = 0.5;
    let delta = x * STUCK_LAMBDA * STUCK_RADIUS;
    let target = stuck_probability(x);
    let freq = stuck_frequency(delta, STUCK_RADIUS, STUCK_TRIALS, SUITE_SEED)?;
    let full_delta = STUCK_LAMBDA * STUCK_RADIUS;
    let freq_full = stuck_frequency(full_delta, STUCK_RADIUS, STUCK_TRIALS, SUITE_SEED + 1)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("closed_form_x0.5".into(), target);
    metrics.insert("delta".into(), delta);
    metrics.insert("r".into(), STUCK_RADIUS);
    let checks = vec![
        Check::within("stuck_frequency_x0.5", freq, target - 0.05, target + 0.05),
        Check::within("stuck_frequency_x1", freq_full, 1.0, 1.0),
    ];
    Ok(SuiteReport::new("stuck-probability", checks, metrics))
}

pub const ESCAPE_SEEDS: u64 = 50;

fn seeds() -> Vec<u64> {
    (0..ESCAPE_SEEDS).map(|i| SUITE_SEED + i).collect()
}

/// Clamp radius for the exact-oracle escape suite. With unit clamp the
/// derived per-round step cap is a single step, too short to travel `R`;
/// a wide clamp keeps `rho` small enough for a multi-step round.
pub const ESCAPE_EXACT_CLAMP: f64 = 2000.0;

pub fn escape_exact_spec() -> Result<ExperimentSpec> {
    let spec = ExperimentSpec {
        schema_version: SCHEMA_VERSION,
        name: Some("escape-exact".into()),
        problem: Problem::saddle_2d(0.5, ESCAPE_EXACT_CLAMP, 0.5)?,
        dim: Some(2),
        m: 1,
        n: 1,
        alpha: 0.0,
        aggregator: AggregatorSpec::Median,
        adversary: AdversaryStrategy::None,
        oracle_mode: OracleMode::Exact,
        delta: None,
        optimizer: OptimizerSource::Exact { eps: 0.01, delta_fail: 0.1 },
        disable_escape: false,
        max_parallel_iters: None,
        seeds: seeds(),
        w0: InitSpec::Point(vec![0.0, 0.0]),
        probe: ProbeSpec::default(),
        boundedness_c: DEFAULT_BOUND_C,
    };
    spec.validate()?;
    Ok(spec)
}

fn escape_exact() -> Result<SuiteReport> {
    let spec = escape_exact_spec()?;
    let out = run_experiment(&spec, None)?;
    let runs: Vec<_> = out.report.seeds.iter().filter_map(|s| s.run.as_ref()).collect();
    let escaped: Vec<_> = runs.iter().filter(|r| r.escapes_succeeded > 0 && r.status == Termination::Converged).collect();
    let good = escaped
        .iter()
        .filter(|r| r.grad_norm_true.is_some_and(|g| g <= 0.01) && r.min_eig.is_some_and(|e| e >= 0.0))
        .count();
    let mut metrics = BTreeMap::new();
    metrics.insert("failed_seeds".into(), out.report.summary.seeds_failed as f64);
    if let Some(c) = runs.first() {
        metrics.insert("R".into(), c.config.big_r);
        metrics.insert("r".into(), c.config.r);
        metrics.insert("T_th".into(), c.config.t_th as f64);
    }
    let checks = vec![
        Check::at_least("escape_success_rate", fraction(escaped.len(), ESCAPE_SEEDS as usize), 0.9),
        Check::at_least(
            "escaped_runs_second_order_rate",
            if escaped.is_empty() { 0.0 } else { fraction(good, escaped.len()) },
            1.0,
        ),
    ];
    Ok(SuiteReport::new("escape-exact", checks, metrics))
}

pub const BYZ_DELTA: f64 = 0.01;
pub const BYZ_FAIL: f64 = 0.1;
const BYZ_LAMBDA: f64 = 0.5;

/// Perturbation radius of the byzantine escape suite; independent of the
/// initial gap.
fn byzantine_radius(problem: &Problem) -> Result<f64> {
    let meta = ProblemMeta::new(problem.dim(), problem.smoothness(), problem.hessian_lipschitz(), 1.0)?;
    Ok(derive_config(&meta, BYZ_DELTA, BYZ_FAIL)?.r)
}

/// Starts are uniform in `B_0(r)` restricted to the attack window.
pub fn escape_byzantine_spec(disable_escape: bool) -> Result<ExperimentSpec> {
    let problem = Problem::saddle_2d(BYZ_LAMBDA, 1.0, 0.5)?;
    let r = byzantine_radius(&problem)?;
    let spec = ExperimentSpec {
        schema_version: SCHEMA_VERSION,
        name: Some(if disable_escape { "escape-byzantine-ablation" } else { "escape-byzantine" }.into()),
        problem,
        dim: Some(2),
        m: 1,
        n: 1,
        alpha: 0.0,
        aggregator: AggregatorSpec::Median,
        adversary: AdversaryStrategy::CurvatureKill { lambda: BYZ_LAMBDA, coordinate: 1 },
        oracle_mode: OracleMode::OracleOverride,
        delta: Some(BYZ_DELTA),
        optimizer: OptimizerSource::Inexact { delta: BYZ_DELTA, delta_fail: BYZ_FAIL },
        disable_escape,
        max_parallel_iters: None,
        seeds: seeds(),
        w0: InitSpec::Sampler(W0Sampler::UniformBall {
            center: None,
            radius: r,
            slab: Some(Slab { coordinate: 1, half_width: BYZ_DELTA / BYZ_LAMBDA }),
        }),
        probe: ProbeSpec::default(),
        boundedness_c: DEFAULT_BOUND_C,
    };
    spec.validate()?;
    Ok(spec)
}

fn escape_byzantine() -> Result<SuiteReport> {
    let full = run_experiment(&escape_byzantine_spec(false)?, None)?;
    let ablation = run_experiment(&escape_byzantine_spec(true)?, None)?;
    let r = byzantine_radius(&escape_byzantine_spec(false)?.problem)?;
    let total = ESCAPE_SEEDS as usize;

    let runs: Vec<_> = full.report.seeds.iter().filter_map(|s| s.run.as_ref()).collect();
    let terminated = runs
        .iter()
        .filter(|s| s.status == Termination::Converged && s.within_iter_bound == Some(true))
        .count();
    let small_grad = runs.iter().filter(|s| s.grad_norm_true.is_some_and(|g| g <= 4.0 * BYZ_DELTA)).count();
    let escaped = runs.iter().filter(|s| s.escapes_succeeded > 0).count();
    let second_order = runs.iter().filter(|s| s.min_eig.is_some_and(|e| e >= 0.0)).count();
    let bounded = runs.iter().filter(|s| s.bounded != Some(false)).count();
    let stuck = ablation
        .traces
        .iter()
        .filter(|(_, t)| t.records.iter().all(|rec| rec.w.norm() <= r) && t.summary.w_tilde.norm() <= r)
        .count();

    let mut metrics = BTreeMap::new();
    if let Some(c) = runs.first() {
        metrics.insert("r".into(), c.config.r);
        metrics.insert("R".into(), c.config.big_r);
        metrics.insert("Q".into(), c.config.q as f64);
        metrics.insert("T_th".into(), c.config.t_th as f64);
        metrics.insert("iter_bound".into(), c.config.guarantee.map_or(f64::NAN, |g| g.iter_bound as f64));
    }
    if let Some(q) = full.report.summary.parallel_iterations {
        metrics.insert("parallel_iterations.max".into(), q.max);
    }
    metrics.insert("second_order_rate".into(), fraction(second_order, total));
    metrics.insert("ablation_failed_seeds".into(), ablation.report.summary.seeds_failed as f64);
    let checks = vec![
        Check::at_least("terminated_within_bound_rate", fraction(terminated, total), 1.0),
        Check::at_least("grad_norm_within_4delta_rate", fraction(small_grad, total), 0.9),
        Check::at_least("escape_success_rate", fraction(escaped, total), 1.0 - BYZ_FAIL - 0.1),
        Check::at_least("bounded_rate", fraction(bounded, total), 1.0),
        Check::at_least("ablation_stuck_rate", fraction(stuck, total), 0.5),
    ];
    Ok(SuiteReport::new("escape-byzantine", checks, metrics))
}

pub const SCALING_REPS: u64 = 20;
const SHIFT_SCALE: f64 = 10.0;

/// One cell of the scaling experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCell {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub alpha: f64,
    pub filter: bool,
}

/// Measured inexactness of one aggregator on mean estimation against the
/// shift adversary, over the standard probe grid.
pub fn scaling_delta_hat(cell: ScalingCell, seed: u64) -> Result<f64> {
    let problem = Problem::mean_estimation(vec![0.0; cell.d], 1.0)?;
    let aggregator = if cell.filter {
        AggregatorSpec::IterativeFilter { alpha: cell.alpha, sigma: problem.sigma / (cell.n as f64).sqrt() }
    } else {
        AggregatorSpec::Median
    };
    let adversary = AdversaryStrategy::Shift { scale: SHIFT_SCALE, coordinate: None };
    let pool = shard_data(&problem, cell.m, cell.n, cell.alpha, seed)?;
    let mut oracle = WorkerOracle::new(problem, pool, aggregator, adversary, 0.0, seed);
    let probes = probe_grid(&ParamVector::zeros(cell.d), 1.0, DEFAULT_PROBES, seed);
    measure_inexactness(&mut oracle, &probes)
}

/// Smallest `k` such that `P(Binomial(n, 1/2) >= k) <= level`.
pub fn sign_test_critical(n: u64, level: f64) -> u64 {
    let mut tail = 0.0;
    let mut choose = 1.0f64;
    let mut pmf = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        pmf.push(choose * 0.5f64.powi(n as i32));
        choose = choose * (n - k) as f64 / (k + 1) as f64;
    }
    for k in (0..=n).rev() {
        tail += pmf[k as usize];
        if tail > level {
            return k + 1;
        }
    }
    0
}

fn scaling_series(cell: ScalingCell) -> Result<Vec<f64>> {
    (0..SCALING_REPS)
        .into_par_iter()
        .map(|rep| scaling_delta_hat(cell, SUITE_SEED + rep))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn scaling_laws() -> Result<SuiteReport> {
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    let critical = sign_test_critical(SCALING_REPS, 0.05);
    metrics.insert("sign_test_critical".into(), critical as f64);

    let base = ScalingCell { n: 50, m: 50, d: 4, alpha: 0.1, filter: false };
    let ns = [50, 100, 200];
    let series = ns
        .iter()
        .map(|&n| scaling_series(ScalingCell { n, ..base }))
        .collect::<Result<Vec<_>>>()?;
    for (n, s) in ns.iter().zip(&series) {
        metrics.insert(format!("a.median_n{n}.mean"), mean(s));
    }
    for i in 0..ns.len() - 1 {
        let decreases = series[i].iter().zip(&series[i + 1]).filter(|(a, b)| b < a).count();
        checks.push(Check::at_least(
            &format!("a.decreases_n{}_to_n{}", ns[i], ns[i + 1]),
            decreases as f64,
            critical as f64,
        ));
    }

    let low = scaling_series(ScalingCell { n: 100, alpha: 0.1, ..base })?;
    let high = scaling_series(ScalingCell { n: 100, alpha: 0.2, ..base })?;
    metrics.insert("b.median_alpha0.1.mean".into(), mean(&low));
    metrics.insert("b.median_alpha0.2.mean".into(), mean(&high));
    checks.push(Check::within("b.alpha_ratio", mean(&high) / mean(&low), 1.3, 2.7));

    let wide = ScalingCell { n: 50, m: 200, d: 64, alpha: 0.2, filter: false };
    let med = scaling_series(wide)?;
    let filt = scaling_series(ScalingCell { filter: true, ..wide })?;
    metrics.insert("c.median.mean".into(), mean(&med));
    metrics.insert("c.filter.mean".into(), mean(&filt));
    metrics.insert(
        "c.filter_le_median_reps".into(),
        filt.iter().zip(&med).filter(|(f, m)| f <= m).count() as f64,
    );
    checks.push(Check::at_most("c.filter_minus_median", mean(&filt) - mean(&med), 0.0));
    Ok(SuiteReport::new("scaling-laws", checks, metrics))
}

pub const FILTER_TRIALS: u64 = 100;
/// Frozen constant in the `C sigma sqrt(alpha)` recovery radius.
pub const FILTER_RECOVERY_C: f64 = 5.0;

/// Error of iterative filtering on `m` points, `alpha m` of them shifted by
/// `shift` from the honest sample mean along the diagonal.
pub fn filter_recovery_error(d: usize, m: usize, alpha: f64, shift: f64, seed: u64) -> Result<f64> {
    let sigma = 1.0;
    let mut r = rng::substream(seed, Stream::Data);
    let mu = rng::standard_normal_vec(&mut r, d);
    let bad = (alpha * m as f64).round() as usize;
    let honest: Vec<ParamVector> = (0..m - bad)
        .map(|_| mu.add(&rng::standard_normal_vec(&mut r, d).scale(sigma)))
        .collect();
    let zero = ParamVector::zeros(d);
    let ctx = RoundContext {
        w: &zero,
        honest_grads: &honest,
        byzantine_own_grads: &[],
        true_grad: &mu,
        phase: Phase::Descent,
        round_index: 0,
        escape_round: None,
    };
    let mut adv_rng = rng::substream(seed, Stream::Adversary);
    let outliers = AdversaryStrategy::Shift { scale: shift, coordinate: None }.craft(&ctx, bad, 0.0, &mut adv_rng);
    let mut all = honest;
    all.extend(outliers);
    let batch = GradientBatch::new(all, 0)?;
    Ok(iterative_filter(&batch, alpha, sigma)?.mean.distance(&mu))
}

fn filter_recovery() -> Result<SuiteReport> {
    let (d, m, alpha) = (16, 100, 0.2f64);
    let radius = FILTER_RECOVERY_C * alpha.sqrt();
    let errors = (0..FILTER_TRIALS)
        .into_par_iter()
        .map(|t| filter_recovery_error(d, m, alpha, 100.0, SUITE_SEED + t))
        .collect::<Result<Vec<_>>>()?;
    let hits = errors.iter().filter(|e| **e <= radius).count();
    let mut metrics = BTreeMap::new();
    metrics.insert("radius".into(), radius);
    metrics.insert("max_error".into(), errors.iter().copied().fold(0.0, f64::max));
    metrics.insert("mean_error".into(), mean(&errors));
    let checks = vec![Check::at_least("recovery_rate", fraction(hits, FILTER_TRIALS as usize), 0.95)];
    Ok(SuiteReport::new("filter-recovery", checks, metrics))
}

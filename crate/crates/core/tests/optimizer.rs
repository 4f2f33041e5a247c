use byzpgd::adversaries::AdversaryStrategy;
use byzpgd::harness::{ExactOracle, OverrideOracle};
use byzpgd::optimizer::{
    byzantine_pgd, derive_config, derive_exact_config, descend_step, escape, GradientOracle, OptimizerConfig,
    OracleReply, QueryInfo, Recorder,
};
use byzpgd::problems::{Problem, ProblemMeta};
use byzpgd::rng::{self, substream, Stream};
use byzpgd::trace::{RoundAudit, Termination};
use byzpgd::ParamVector;
use proptest::prelude::*;

fn unit_meta(dim: usize, gap: f64) -> ProblemMeta {
    ProblemMeta::new(dim, 1.0, 1.0, gap).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn inexact_rule_knobs_at_unit_constants() {
    let cfg = derive_config(&unit_meta(1, 1.0), 0.01, 0.1).unwrap();
    assert!(close(cfg.eps, 0.03, 1e-15));
    assert!(close(cfg.r, 0.252_383, 1e-5), "{}", cfg.r);
    assert!(close(cfg.big_r, 0.158_489, 1e-5), "{}", cfg.big_r);
    assert!(close(cfg.eta, 1.0, 0.0));
    assert_eq!(cfg.t_th, 1);
    let g = cfg.guarantee.unwrap();
    assert!(close(g.grad_norm_bound, 0.04, 1e-15));
    // 2 * gap * L / (3 Delta^2) * Q
    assert_eq!(g.iter_bound, (2.0 / 3.0 * 1e4 * cfg.q as f64).ceil() as u64);
    assert!(g.min_eig_bound < 0.0);
}

#[test]
fn inexact_rule_rejects_out_of_range_delta() {
    for bad in [0.0, -0.1, 1.5, f64::NAN] {
        assert_eq!(derive_config(&unit_meta(1, 1.0), bad, 0.1).unwrap_err().kind(), "usage");
    }
    assert_eq!(derive_config(&unit_meta(1, 1.0), 0.01, 1.0).unwrap_err().kind(), "usage");
    assert!(derive_config(&unit_meta(1, 1.0), 1.0, 0.1).is_ok());
}

#[test]
fn q_is_floored_at_one_for_small_gap() {
    let cfg = derive_config(&unit_meta(1, 1e-9), 1.0, 0.5).unwrap();
    assert_eq!(cfg.q, 1);
    let cfg = derive_config(&unit_meta(1, 0.0), 0.5, 0.5).unwrap();
    assert_eq!(cfg.q, 1);
    assert!(cfg.max_parallel_iters >= 1 + (cfg.t_th as u64 + 1));
}

#[test]
fn exact_rule_knobs_at_unit_constants() {
    let cfg = derive_exact_config(&unit_meta(1, 1.0), 0.01, 0.1).unwrap();
    assert!(close(cfg.big_r, 0.1, 1e-15));
    assert!(close(cfg.r, 0.01, 0.0));
    assert_eq!(cfg.t_th, 1);
    assert_eq!(cfg.q, 1);
    assert_eq!(cfg.delta_inexact, 0.0);
    assert_eq!(cfg.guarantee.unwrap().iter_bound, 20_000);
}

#[test]
fn exact_rule_rejects_boundary_eps() {
    // min(1/rho, 4/(L^2 rho)) = 1
    assert_eq!(derive_exact_config(&unit_meta(1, 1.0), 1.0, 0.1).unwrap_err().kind(), "usage");
    assert_eq!(derive_exact_config(&unit_meta(1, 1.0), 0.0, 0.1).unwrap_err().kind(), "usage");
    assert!(derive_exact_config(&unit_meta(1, 1.0), 0.999, 0.1).is_ok());
}

#[test]
fn descend_step_examples() {
    let w = ParamVector::from(vec![1.0, 1.0]);
    assert_eq!(descend_step(&w, &ParamVector::from(vec![2.0, 0.0]), 0.5).as_slice(), &[0.0, 1.0]);
    assert_eq!(descend_step(&w, &ParamVector::zeros(2), 0.5), w);
    let p = Problem::convex_1d();
    let w = ParamVector::from(vec![3.0]);
    assert_eq!(descend_step(&w, &p.grad(&w).unwrap(), 0.5).as_slice(), &[1.0]);
}

struct ZeroOracle(usize);

impl GradientOracle for ZeroOracle {
    fn dim(&self) -> usize {
        self.0
    }
    fn query(&mut self, _w: &ParamVector, _info: &QueryInfo) -> byzpgd::Result<OracleReply> {
        Ok(OracleReply { g_hat: ParamVector::zeros(self.0), true_grad: None, audit: RoundAudit::default() })
    }
}

fn manual(q: u32, t_th: u32, r: f64, big_r: f64) -> OptimizerConfig {
    OptimizerConfig {
        eta: 1.0,
        eps: 0.01,
        r,
        big_r,
        q,
        t_th,
        delta_inexact: 0.0,
        delta_fail: 0.1,
        max_parallel_iters: 10_000,
        guarantee: None,
    }
}

#[test]
fn flat_region_never_escapes() {
    let cfg = manual(4, 3, 0.1, 0.05);
    let w = ParamVector::zeros(3);
    let mut rec = Recorder::new(&w, cfg.max_parallel_iters);
    let out = escape(&w, &cfg, &mut ZeroOracle(3), &mut substream(1, Stream::Perturbation), &mut rec).unwrap();
    assert!(!out.escaped);
    assert_eq!(out.rounds_used, 4);
    assert_eq!(rec.iterations(), 4 * 4);
    // the iterate stays at the perturbed start of the last round
    assert!(out.iterate.norm() <= 0.1);
}

#[test]
fn true_minimum_is_not_escaped() {
    let p = Problem::mean_estimation(vec![0.5, -1.0, 2.0], 1.0).unwrap();
    let w = p.sample_mean();
    let cfg = derive_exact_config(&p.meta(&w).unwrap(), 0.01, 0.1).unwrap();
    // exact GD on a unit quadratic with eta = 1 contracts to the minimiser
    assert!(cfg.big_r > cfg.r * (1.0 + cfg.eta * 1.0));
    for seed in 0..20 {
        let mut rec = Recorder::new(&w, cfg.max_parallel_iters);
        let mut oracle = ExactOracle::new(p.clone());
        let out = escape(&w, &cfg, &mut oracle, &mut substream(seed, Stream::Perturbation), &mut rec).unwrap();
        assert!(!out.escaped);
        assert!(rec.records().iter().all(|r| r.dist_from_round_start.unwrap() < cfg.big_r));
    }
}

#[test]
fn convex_run_converges_without_escaping() {
    let p = Problem::convex_1d();
    let w0 = ParamVector::from(vec![0.0]);
    let cfg = derive_exact_config(&p.meta(&w0).unwrap(), 0.01, 0.1).unwrap();
    let out = byzantine_pgd(&mut ExactOracle::new(p.clone()), &cfg, &w0, &mut substream(0, Stream::Perturbation)).unwrap();
    assert_eq!(out.status, Termination::Converged);
    assert!(p.grad(&out.w_tilde).unwrap().norm() <= 0.01);
    assert_eq!(out.trace.summary.escapes_succeeded, 0);
    assert_eq!(out.trace.summary.escapes_attempted, 1);
    assert!(out.trace.records.iter().all(|r| !r.escaped));
}

#[test]
fn exact_saddle_escape_from_origin() {
    let p = Problem::saddle_2d(0.5, 2000.0, 0.5).unwrap();
    let w0 = ParamVector::zeros(2);
    let cfg = derive_exact_config(&p.meta(&w0).unwrap(), 0.01, 0.1).unwrap();
    let mut escaped = 0;
    for seed in 0..50 {
        let mut rec = Recorder::new(&w0, cfg.max_parallel_iters);
        let out = escape(&w0, &cfg, &mut ExactOracle::new(p.clone()), &mut substream(seed, Stream::Perturbation), &mut rec)
            .unwrap();
        if out.escaped {
            escaped += 1;
            let start = rec.records().iter().rposition(|r| r.escape_step == Some(0)).unwrap();
            let last = rec.records().last().unwrap();
            assert!(last.escaped);
            assert!(last.escape_step.unwrap() <= cfg.t_th);
            assert!(out.iterate.distance(&rec.records()[start].w) >= cfg.big_r);
        }
    }
    assert!(escaped >= 45, "{escaped}");
}

#[test]
fn curvature_kill_traps_plain_descent() {
    let p = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
    let delta = 0.01;
    let r = derive_config(&p.meta(&ParamVector::zeros(2)).unwrap(), delta, 0.1).unwrap().r;
    let adversary = AdversaryStrategy::CurvatureKill { lambda: 0.5, coordinate: 1 };
    let mut cfg = manual(0, 1, r, r);
    cfg.eps = 3.0 * delta;
    cfg.max_parallel_iters = 10_000;
    for seed in 0..10 {
        let w0 = ParamVector::from(vec![0.1, 0.015 - 0.003 * seed as f64]);
        let mut oracle = OverrideOracle::new(p.clone(), adversary.clone(), delta, seed);
        let out = byzantine_pgd(&mut oracle, &cfg, &w0, &mut substream(seed, Stream::Perturbation)).unwrap();
        assert!(out.trace.records.iter().all(|rec| rec.w.norm() <= r));
        assert!(out.trace.summary.min_eig.unwrap() < 0.0);
    }
}

#[test]
fn budget_exhaustion_is_reported() {
    let p = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
    let mut cfg = manual(0, 1, 0.1, 0.1);
    cfg.eps = 0.0;
    cfg.max_parallel_iters = 5;
    let w0 = ParamVector::from(vec![0.0, 0.5]);
    let out = byzantine_pgd(&mut ExactOracle::new(p), &cfg, &w0, &mut substream(0, Stream::Perturbation)).unwrap();
    assert_eq!(out.status, Termination::BudgetExceeded);
    assert_eq!(out.trace.records.len(), 5);
}

#[test]
fn runs_are_bitwise_reproducible() {
    let p = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
    let w0 = ParamVector::from(vec![0.05, 0.001]);
    let cfg = derive_config(&p.meta(&w0).unwrap(), 0.01, 0.1).unwrap();
    let adversary = AdversaryStrategy::CurvatureKill { lambda: 0.5, coordinate: 1 };
    let run = || {
        let mut oracle = OverrideOracle::new(p.clone(), adversary.clone(), 0.01, 7);
        byzantine_pgd(&mut oracle, &cfg, &w0, &mut substream(7, Stream::Perturbation)).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn dimension_mismatch_rejected() {
    let cfg = manual(1, 1, 0.1, 0.1);
    let err = byzantine_pgd(
        &mut ExactOracle::new(Problem::convex_1d()),
        &cfg,
        &ParamVector::zeros(2),
        &mut substream(0, Stream::Perturbation),
    )
    .unwrap_err();
    assert_eq!(err.kind(), "validation");
}

fn benchmark() -> impl Strategy<Value = Problem> {
    prop_oneof![
        Just(Problem::convex_1d()),
        Just(Problem::quartic_1d()),
        Just(Problem::saddle_2d(0.5, 1.0, 0.5).unwrap()),
        Just(Problem::mean_estimation(vec![1.0, -2.0, 0.5, 0.0, 3.0, -1.0, 0.25, 2.0], 1.0).unwrap()),
        Just(Problem::sine_1d(0.5, 0.3).unwrap()),
    ]
}

proptest! {
    #[test]
    fn inexact_step_descends(p in benchmark(), seed in any::<u64>(), delta in 0.0..1.0f64) {
        let mut r = substream(seed, Stream::Trial);
        let half = p.probe_box();
        let c = p.sample_mean();
        let w = ParamVector::from((0..p.dim()).map(|k| c[k] + rand::Rng::random_range(&mut r, -half..half)).collect::<Vec<_>>());
        let e = rng::uniform_in_ball(&mut r, p.dim(), delta);
        let l = p.smoothness();
        let g = p.grad(&w).unwrap();
        let next = descend_step(&w, &g.add(&e), 1.0 / l);
        let bound = p.value(&w).unwrap() - g.norm_sq() / (2.0 * l) + delta * delta / (2.0 * l) + 1e-9;
        prop_assert!(p.value(&next).unwrap() <= bound);
    }

    #[test]
    fn returned_point_meets_threshold(seed in 0u64..200, x in -0.3..0.3f64, y in -0.3..0.3f64) {
        let p = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
        let w0 = ParamVector::from(vec![x, y]);
        let cfg = derive_config(&p.meta(&w0).unwrap(), 0.01, 0.1).unwrap();
        let adversary = AdversaryStrategy::CurvatureKill { lambda: 0.5, coordinate: 1 };
        let mut oracle = OverrideOracle::new(p.clone(), adversary, 0.01, seed);
        let out = byzantine_pgd(&mut oracle, &cfg, &w0, &mut substream(seed, Stream::Perturbation)).unwrap();
        if out.status == Termination::Converged {
            let last = out.trace.records.iter().rev().find(|r| r.w == out.w_tilde).unwrap();
            prop_assert!(last.grad_norm_hat <= cfg.eps);
            prop_assert!(p.grad(&out.w_tilde).unwrap().norm() <= 4.0 * 0.01 + 1e-12);
        }
        // indices strictly increase and every escape flag honours the distance test
        for pair in out.trace.records.windows(2) {
            prop_assert!(pair[0].iteration < pair[1].iteration);
        }
        for r in out.trace.escape_events() {
            prop_assert!(r.dist_from_round_start.unwrap() >= cfg.big_r);
            prop_assert!(r.escape_step.unwrap() <= cfg.t_th);
        }
        prop_assert!(out.trace.max_oracle_error().unwrap_or(0.0) <= 0.01 + 1e-12);
    }
}

//! Analytic benchmark losses.
//!
//! Each problem exposes the population loss `F`, its gradient and Hessian in
//! closed form, the declared smoothness / Hessian-Lipschitz constants, and a
//! per-sample loss so the same problem can drive a worker simulation.
//!
//! Sample model: `mean_estimation` uses `f(w; z) = ||w - z||^2 / 2` with
//! `z ~ N(mu, sigma^2 I)`. Every other problem uses additive gradient noise,
//! `f(w; z) = F(w) + <z, w>` with `z ~ N(0, sigma^2 I)`, so that averaging
//! sample gradients recovers the population gradient in expectation.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;
use crate::vector::ParamVector;

/// Constants that drive parameter derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub dim: usize,
    pub smoothness: f64,
    pub hessian_lipschitz: f64,
    /// `F(w0) - F*`
    pub initial_gap: f64,
}

impl ProblemMeta {
    pub fn new(dim: usize, smoothness: f64, hessian_lipschitz: f64, initial_gap: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("dimension must be at least 1"));
        }
        if !(smoothness > 0.0 && smoothness.is_finite()) {
            return Err(Error::config("smoothness L_F must be > 0"));
        }
        if !(hessian_lipschitz > 0.0 && hessian_lipschitz.is_finite()) {
            return Err(Error::config("Hessian-Lipschitz constant rho_F must be > 0"));
        }
        if !(initial_gap >= 0.0 && initial_gap.is_finite()) {
            return Err(Error::config("initial gap F0 - F* must be >= 0"));
        }
        Ok(ProblemMeta { dim, smoothness, hessian_lipschitz, initial_gap })
    }
}

fn default_lambda() -> f64 {
    0.5
}
fn default_clamp_radius() -> f64 {
    1.0
}
fn default_outer_curvature() -> f64 {
    0.5
}
fn default_sigma() -> f64 {
    1.0
}
fn default_sine_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemKind {
    /// `(w - 1)^2`
    Convex1d,
    /// `(w^2 - 1)^2 / 4`; constants declared on `|w| <= 2`.
    Quartic1d,
    /// `w1^2/2 - lambda w2^2/2` on the strip `|w2| <= b`, blended into a
    /// convex quadratic in `w2` with curvature `outer_curvature` over
    /// `|w2| in [b, 2b]` (the curvature ramps linearly, so `F` is C^2).
    #[serde(rename = "saddle_2d")]
    Saddle2d {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_clamp_radius")]
        b: f64,
        #[serde(default = "default_outer_curvature")]
        outer_curvature: f64,
    },
    /// `E ||w - z||^2 / 2`, `z ~ N(mean, sigma^2 I)`.
    MeanEstimation { mean: Vec<f64> },
    /// `scale^(3/2) sin(scale^(-1/2) w + phase)`
    #[serde(rename = "sine_1d")]
    Sine1d {
        #[serde(default = "default_sine_scale")]
        scale: f64,
        #[serde(default)]
        phase: f64,
    },
}

/// A benchmark problem plus its sample-noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    #[serde(flatten)]
    pub kind: ProblemKind,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

/// Per-worker data shard.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<ParamVector>,
    pub mean: ParamVector,
    pub sigma: f64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

const QUARTIC_DOMAIN: f64 = 2.0;

impl Problem {
    pub fn new(kind: ProblemKind, sigma: f64) -> Result<Self> {
        let p = Problem { kind, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn convex_1d() -> Self {
        Problem { kind: ProblemKind::Convex1d, sigma: 1.0 }
    }

    pub fn quartic_1d() -> Self {
        Problem { kind: ProblemKind::Quartic1d, sigma: 1.0 }
    }

    pub fn saddle_2d(lambda: f64, b: f64, outer_curvature: f64) -> Result<Self> {
        Problem::new(ProblemKind::Saddle2d { lambda, b, outer_curvature }, 1.0)
    }

    pub fn mean_estimation(mean: Vec<f64>, sigma: f64) -> Result<Self> {
        Problem::new(ProblemKind::MeanEstimation { mean }, sigma)
    }

    pub fn sine_1d(scale: f64, phase: f64) -> Result<Self> {
        Problem::new(ProblemKind::Sine1d { scale, phase }, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma must be >= 0"));
        }
        match &self.kind {
            ProblemKind::Convex1d | ProblemKind::Quartic1d => Ok(()),
            ProblemKind::Saddle2d { lambda, b, outer_curvature } => {
                if !(*lambda > 0.0 && *b > 0.0 && *outer_curvature > 0.0)
                    || !(lambda.is_finite() && b.is_finite() && outer_curvature.is_finite())
                {
                    return Err(Error::config("saddle_2d requires lambda > 0, b > 0, outer_curvature > 0"));
                }
                Ok(())
            }
            ProblemKind::MeanEstimation { mean } => {
                if mean.is_empty() || mean.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config("mean_estimation requires a finite, non-empty mean"));
                }
                Ok(())
            }
            ProblemKind::Sine1d { scale, phase } => {
                if !(*scale > 0.0 && *scale <= 1.0) || !phase.is_finite() {
                    return Err(Error::config("sine_1d requires 0 < scale <= 1"));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Convex1d => "convex_1d",
            ProblemKind::Quartic1d => "quartic_1d",
            ProblemKind::Saddle2d { .. } => "saddle_2d",
            ProblemKind::MeanEstimation { .. } => "mean_estimation",
            ProblemKind::Sine1d { .. } => "sine_1d",
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ProblemKind::Saddle2d { .. } => 2,
            ProblemKind::MeanEstimation { mean } => mean.len(),
            _ => 1,
        }
    }

    /// Declared `L_F`.
    pub fn smoothness(&self) -> f64 {
        match &self.kind {
            ProblemKind::Convex1d => 2.0,
            // |3w^2 - 1| <= 11 on |w| <= 2
            ProblemKind::Quartic1d => 11.0,
            ProblemKind::Saddle2d { lambda, outer_curvature, .. } => 1f64.max(*lambda).max(*outer_curvature),
            ProblemKind::MeanEstimation { .. } => 1.0,
            ProblemKind::Sine1d { scale, .. } => scale.sqrt(),
        }
    }

    /// Declared `rho_F`. Problems with a constant Hessian carry a nominal
    /// bound of 1 (any positive value is valid for them).
    pub fn hessian_lipschitz(&self) -> f64 {
        match &self.kind {
            ProblemKind::Convex1d | ProblemKind::MeanEstimation { .. } => 1.0,
            // |6w| <= 12 on |w| <= 2
            ProblemKind::Quartic1d => 12.0,
            ProblemKind::Saddle2d { lambda, b, outer_curvature } => (lambda + outer_curvature) / b,
            ProblemKind::Sine1d { .. } => 1.0,
        }
    }

    /// Half-width of the box on which the declared constants hold, if the
    /// problem is only locally smooth.
    pub fn constants_domain(&self) -> Option<f64> {
        match self.kind {
            ProblemKind::Quartic1d => Some(QUARTIC_DOMAIN),
            _ => None,
        }
    }

    /// Half-width of a box covering the interesting structure, used for
    /// random property checks.
    pub fn probe_box(&self) -> f64 {
        match &self.kind {
            ProblemKind::Convex1d => 5.0,
            ProblemKind::Quartic1d => QUARTIC_DOMAIN,
            ProblemKind::Saddle2d { b, .. } => 4.0 * b,
            ProblemKind::MeanEstimation { mean } => mean.iter().fold(0.0f64, |a, x| a.max(x.abs())) + 5.0,
            ProblemKind::Sine1d { scale, .. } => 10.0 * scale.sqrt(),
        }
    }

    /// `F* = min F`.
    pub fn min_value(&self) -> f64 {
        match &self.kind {
            ProblemKind::Convex1d | ProblemKind::Quartic1d => 0.0,
            ProblemKind::Saddle2d { .. } => {
                let t = self.saddle_minimizer_w2().expect("saddle kind");
                self.saddle_profile(t).0
            }
            ProblemKind::MeanEstimation { mean } => 0.5 * mean.len() as f64 * self.sigma * self.sigma,
            ProblemKind::Sine1d { scale, .. } => -scale.powf(1.5),
        }
    }

    pub fn meta(&self, w0: &ParamVector) -> Result<ProblemMeta> {
        let f0 = self.value(w0)?;
        let gap = (f0 - self.min_value()).max(0.0);
        ProblemMeta::new(self.dim(), self.smoothness(), self.hessian_lipschitz(), gap)
    }

    fn check(&self, w: &ParamVector) -> Result<()> {
        w.check_dim(self.dim())
    }

    pub fn value(&self, w: &ParamVector) -> Result<f64> {
        self.check(w)?;
        Ok(match &self.kind {
            ProblemKind::Convex1d => (w[0] - 1.0).powi(2),
            ProblemKind::Quartic1d => (w[0] * w[0] - 1.0).powi(2) / 4.0,
            ProblemKind::Saddle2d { .. } => 0.5 * w[0] * w[0] + self.saddle_profile(w[1]).0,
            ProblemKind::MeanEstimation { mean } => {
                let d = mean.len() as f64;
                let dist_sq: f64 = w.iter().zip(mean).map(|(a, m)| (a - m) * (a - m)).sum();
                0.5 * dist_sq + 0.5 * d * self.sigma * self.sigma
            }
            ProblemKind::Sine1d { scale, phase } => scale.powf(1.5) * (w[0] / scale.sqrt() + phase).sin(),
        })
    }

    pub fn grad(&self, w: &ParamVector) -> Result<ParamVector> {
        self.check(w)?;
        Ok(match &self.kind {
            ProblemKind::Convex1d => vec![2.0 * (w[0] - 1.0)].into(),
            ProblemKind::Quartic1d => vec![w[0] * w[0] * w[0] - w[0]].into(),
            ProblemKind::Saddle2d { .. } => vec![w[0], self.saddle_profile(w[1]).1].into(),
            ProblemKind::MeanEstimation { mean } => {
                w.iter().zip(mean).map(|(a, m)| a - m).collect::<Vec<_>>().into()
            }
            ProblemKind::Sine1d { scale, phase } => vec![scale * (w[0] / scale.sqrt() + phase).cos()].into(),
        })
    }

    pub fn hessian(&self, w: &ParamVector) -> Result<DMatrix<f64>> {
        self.check(w)?;
        Ok(match &self.kind {
            ProblemKind::Convex1d => DMatrix::from_element(1, 1, 2.0),
            ProblemKind::Quartic1d => DMatrix::from_element(1, 1, 3.0 * w[0] * w[0] - 1.0),
            ProblemKind::Saddle2d { .. } => {
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, self.saddle_profile(w[1]).2])
            }
            ProblemKind::MeanEstimation { mean } => DMatrix::identity(mean.len(), mean.len()),
            ProblemKind::Sine1d { scale, phase } => {
                DMatrix::from_element(1, 1, -scale.sqrt() * (w[0] / scale.sqrt() + phase).sin())
            }
        })
    }

    /// Smallest eigenvalue of the population Hessian at `w`.
    pub fn hessian_min_eig(&self, w: &ParamVector) -> Result<f64> {
        Ok(linalg::symmetric_min_eigenvalue(&self.hessian(w)?))
    }

    /// Gradient of the per-sample loss.
    pub fn sample_grad(&self, w: &ParamVector, z: &ParamVector) -> Result<ParamVector> {
        self.check(w)?;
        z.check_dim(self.dim())?;
        match &self.kind {
            ProblemKind::MeanEstimation { .. } => Ok(w.sub(z)),
            _ => Ok(self.grad(w)?.add(z)),
        }
    }

    /// Mean of the sample distribution.
    pub fn sample_mean(&self) -> ParamVector {
        match &self.kind {
            ProblemKind::MeanEstimation { mean } => ParamVector::from(mean.clone()),
            _ => ParamVector::zeros(self.dim()),
        }
    }

    /// Draws `n` i.i.d. samples from `N(sample_mean, sigma^2 I)`.
    pub fn draw_samples<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> SampleSet {
        let mean = self.sample_mean();
        let samples = (0..n)
            .map(|_| {
                let mut z = rng::standard_normal_vec(rng, self.dim()).scale(self.sigma);
                z.axpy(1.0, &mean);
                z
            })
            .collect();
        SampleSet { samples, mean, sigma: self.sigma }
    }

    /// Empirical gradient `(1/n) sum_j grad f(w; z_j)` over a shard.
    pub fn shard_grad(&self, w: &ParamVector, shard: &SampleSet) -> Result<ParamVector> {
        if shard.is_empty() {
            return Err(Error::usage("empty shard"));
        }
        let mut acc = ParamVector::zeros(self.dim());
        for z in &shard.samples {
            acc.axpy(1.0, &self.sample_grad(w, z)?);
        }
        Ok(acc.scale(1.0 / shard.len() as f64))
    }

    /// `(value, first derivative, second derivative)` of the `w2` profile of
    /// the clamped saddle.
    fn saddle_profile(&self, t: f64) -> (f64, f64, f64) {
        let ProblemKind::Saddle2d { lambda, b, outer_curvature: c } = self.kind else {
            unreachable!("saddle profile on non-saddle problem")
        };
        let a = t.abs();
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        let ramp = (lambda + c) / b;
        let (v, d1, d2) = if a <= b {
            (-0.5 * lambda * a * a, -lambda * a, -lambda)
        } else if a <= 2.0 * b {
            let u = a - b;
            (
                -0.5 * lambda * a * a + ramp * u * u * u / 6.0,
                -lambda * a + 0.5 * ramp * u * u,
                -lambda + ramp * u,
            )
        } else {
            let v2 = -2.0 * lambda * b * b + ramp * b * b * b / 6.0;
            let g2 = -2.0 * lambda * b + 0.5 * ramp * b * b;
            let u = a - 2.0 * b;
            (v2 + g2 * u + 0.5 * c * u * u, g2 + c * u, c)
        };
        (v, sign * d1, d2)
    }

    /// Positive `w2` coordinate of the clamped saddle's minimisers.
    pub fn saddle_minimizer_w2(&self) -> Option<f64> {
        let ProblemKind::Saddle2d { lambda, b, outer_curvature: c } = self.kind else {
            return None;
        };
        let ramp = (lambda + c) / b;
        // root of -lambda (b + u) + ramp u^2 / 2 inside the ramp
        let u = (lambda + (lambda * lambda + 2.0 * ramp * lambda * b).sqrt()) / ramp;
        if u <= b {
            return Some(b + u);
        }
        let g2 = -2.0 * lambda * b + 0.5 * ramp * b * b;
        Some(2.0 * b - g2 / c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand::Rng;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from(v.to_vec())
    }

    fn benchmarks() -> Vec<Problem> {
        vec![
            Problem::convex_1d(),
            Problem::quartic_1d(),
            Problem::saddle_2d(0.5, 1.0, 0.5).unwrap(),
            Problem::saddle_2d(0.8, 2.0, 1.5).unwrap(),
            Problem::mean_estimation(vec![0.5, -1.0, 2.0, 0.0], 1.0).unwrap(),
            Problem::sine_1d(1.0, 0.0).unwrap(),
            Problem::sine_1d(0.04, 0.3).unwrap(),
        ]
    }

    fn random_point<R: Rng>(p: &Problem, rng: &mut R) -> ParamVector {
        let h = p.probe_box();
        let center = p.sample_mean();
        (0..p.dim())
            .map(|k| center[k] + rng.random_range(-h..h))
            .collect::<Vec<_>>()
            .into()
    }

    #[test]
    fn population_value_examples() {
        assert_eq!(Problem::convex_1d().value(&pv(&[1.0])).unwrap(), 0.0);
        assert_eq!(Problem::quartic_1d().value(&pv(&[0.0])).unwrap(), 0.25);
        let s = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
        assert!((s.value(&pv(&[1.0, 1.0])).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn population_grad_examples() {
        let me = Problem::mean_estimation(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(me.grad(&pv(&[1.0, 2.0])).unwrap().as_slice(), &[1.0, 2.0]);
        let s = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
        assert_eq!(s.grad(&pv(&[1.0, 1.0])).unwrap().as_slice(), &[1.0, -0.5]);
        assert_eq!(Problem::quartic_1d().grad(&pv(&[1.0])).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn hessian_min_eig_examples() {
        let s = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
        for w in [[0.0, 0.0], [0.3, -0.7], [-0.9, 0.1]] {
            assert!((s.hessian_min_eig(&pv(&w)).unwrap() + 0.5).abs() < 1e-8);
        }
        let me = Problem::mean_estimation(vec![1.0; 5], 1.0).unwrap();
        assert!((me.hessian_min_eig(&pv(&[3.0; 5])).unwrap() - 1.0).abs() < 1e-8);
        let sine = Problem::sine_1d(1.0, 0.0).unwrap();
        let v = sine.hessian_min_eig(&pv(&[std::f64::consts::FRAC_PI_2])).unwrap();
        assert!((v + 1.0).abs() < 1e-8);
    }

    #[test]
    fn sample_grad_examples() {
        let me = Problem::mean_estimation(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(me.sample_grad(&pv(&[0.0, 0.0]), &pv(&[1.0, 1.0])).unwrap().as_slice(), &[-1.0, -1.0]);
        let z = pv(&[0.4, -2.5]);
        assert_eq!(me.sample_grad(&z, &z).unwrap().as_slice(), &[0.0, 0.0]);
        let mut rng = substream(3, Stream::Data);
        let shard = me.draw_samples(&mut rng, 17);
        let w = pv(&[0.7, -0.2]);
        let g = me.shard_grad(&w, &shard).unwrap();
        let shard_mean = ParamVector::mean(&shard.samples).unwrap();
        let expected = w.sub(&shard_mean);
        assert!(g.sub(&expected).norm_inf() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let s = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
        assert!(matches!(s.value(&pv(&[1.0])), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
        assert!(s.grad(&pv(&[1.0, 2.0, 3.0])).is_err());
        assert!(s.hessian_min_eig(&pv(&[])).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Problem::saddle_2d(0.0, 1.0, 0.5).is_err());
        assert!(Problem::sine_1d(1.5, 0.0).is_err());
        assert!(Problem::mean_estimation(vec![], 1.0).is_err());
        assert!(ProblemMeta::new(2, 0.0, 1.0, 0.0).is_err());
        assert!(ProblemMeta::new(2, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = substream(11, Stream::Trial);
        let h = 1e-5;
        for p in benchmarks() {
            for _ in 0..100 {
                let w = random_point(&p, &mut rng);
                let g = p.grad(&w).unwrap();
                let mut fd = vec![0.0; p.dim()];
                for k in 0..p.dim() {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[k] += h;
                    wm[k] -= h;
                    fd[k] = (p.value(&wp).unwrap() - p.value(&wm).unwrap()) / (2.0 * h);
                }
                let err = g.sub(&ParamVector::from(fd)).norm_inf();
                assert!(err <= 1e-5 * (1.0 + g.norm_inf()), "{} at {:?}: {err}", p.name(), w);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = substream(12, Stream::Trial);
        let h = 1e-6;
        for p in benchmarks() {
            for _ in 0..50 {
                let w = random_point(&p, &mut rng);
                let hess = p.hessian(&w).unwrap();
                for k in 0..p.dim() {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[k] += h;
                    wm[k] -= h;
                    let col = p.grad(&wp).unwrap().sub(&p.grad(&wm).unwrap()).scale(0.5 / h);
                    for j in 0..p.dim() {
                        assert!((col[j] - hess[(j, k)]).abs() < 1e-5 * (1.0 + hess[(j, k)].abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn declared_constants_hold_on_sampled_pairs() {
        let mut rng = substream(13, Stream::Trial);
        for p in benchmarks() {
            let (l, rho) = (p.smoothness(), p.hessian_lipschitz());
            for _ in 0..1000 {
                let w = random_point(&p, &mut rng);
                let v = random_point(&p, &mut rng);
                let dist = w.distance(&v);
                let dg = p.grad(&w).unwrap().distance(&p.grad(&v).unwrap());
                assert!(dg <= l * dist * (1.0 + 1e-12) + 1e-12, "{}: grad", p.name());
                let dh = linalg::symmetric_spectral_norm(&(p.hessian(&w).unwrap() - p.hessian(&v).unwrap()));
                assert!(dh <= rho * dist * (1.0 + 1e-12) + 1e-12, "{}: hessian", p.name());
            }
        }
    }

    #[test]
    fn mean_estimation_gradient_is_exact_difference() {
        let mean = vec![0.1, 0.2, -0.3];
        let p = Problem::mean_estimation(mean.clone(), 2.0).unwrap();
        let w = pv(&[1.5, -2.25, 0.125]);
        let g = p.grad(&w).unwrap();
        for k in 0..3 {
            assert_eq!(g[k], w[k] - mean[k]);
        }
    }

    #[test]
    fn saddle_clamp_has_a_convex_global_minimum() {
        let s = Problem::saddle_2d(0.5, 1.0, 0.5).unwrap();
        let t = s.saddle_minimizer_w2().unwrap();
        assert!((t - 3.0).abs() < 1e-12);
        let w = pv(&[0.0, t]);
        assert!(s.grad(&w).unwrap().norm() < 1e-12);
        assert!(s.hessian_min_eig(&w).unwrap() > 0.0);
        assert!((s.min_value() - s.value(&w).unwrap()).abs() < 1e-15);
        // -13/12 b^2 for these parameters
        assert!((s.min_value() + 13.0 / 12.0).abs() < 1e-12);
        // steep outer curvature puts the minimiser inside the ramp
        let steep = Problem::saddle_2d(0.2, 1.0, 3.0).unwrap();
        let t = steep.saddle_minimizer_w2().unwrap();
        assert!(t > 1.0 && t < 2.0);
        assert!(steep.grad(&pv(&[0.0, t])).unwrap().norm() < 1e-12);
        // sampled values never go below the reported minimum
        let mut rng = substream(5, Stream::Trial);
        for _ in 0..1000 {
            let w = random_point(&s, &mut rng);
            assert!(s.value(&w).unwrap() >= s.min_value() - 1e-12);
        }
    }
}

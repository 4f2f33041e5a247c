//! Byzantine worker strategies.
//!
//! Adversaries see the current iterate, every honest message, the true
//! population gradient, and the optimiser phase; they never see the
//! master's future perturbation draws. Each strategy works at two levels:
//! [`AdversaryStrategy::craft`] produces the Byzantine workers' messages,
//! and [`AdversaryStrategy::oracle_vector`] picks the aggregate directly
//! inside the inexactness ball (the oracle-override mode).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::trace::Phase;
use crate::vector::ParamVector;

/// What an adversary may observe in one round.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub w: &'a ParamVector,
    pub honest_grads: &'a [ParamVector],
    /// Gradients the Byzantine workers would send if they were honest.
    pub byzantine_own_grads: &'a [ParamVector],
    pub true_grad: &'a ParamVector,
    pub phase: Phase,
    pub round_index: u64,
    pub escape_round: Option<u32>,
}

impl RoundContext<'_> {
    fn honest_mean(&self) -> ParamVector {
        ParamVector::mean(self.honest_grads).unwrap_or_else(|| self.true_grad.clone())
    }

    /// Messages a silent (honest-consistent) adversary sends.
    fn echo(&self, count: usize) -> Vec<ParamVector> {
        if self.byzantine_own_grads.len() == count {
            return self.byzantine_own_grads.to_vec();
        }
        vec![self.honest_mean(); count]
    }
}

fn default_unit() -> f64 {
    1.0
}
fn default_escape_coordinate() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryStrategy {
    None,
    /// Drive the aggregate to zero wherever the true gradient is within the
    /// budget (optionally restricted to `||w|| <= radius`).
    ZeroTrap {
        #[serde(default)]
        radius: Option<f64>,
    },
    /// Zero the negative-curvature coordinate of the aggregate while
    /// `|w_k| <= budget / lambda`.
    CurvatureKill {
        lambda: f64,
        #[serde(default = "default_escape_coordinate")]
        coordinate: usize,
    },
    /// Honest mean displaced by `scale` along a coordinate axis, or along
    /// the all-ones diagonal when `coordinate` is absent.
    Shift {
        scale: f64,
        #[serde(default)]
        coordinate: Option<usize>,
    },
    /// `-scale` times the honest mean.
    SignFlip {
        #[serde(default = "default_unit")]
        scale: f64,
    },
    /// Honest mean plus isotropic Gaussian noise of standard deviation `scale`.
    GaussianNoise { scale: f64 },
}

impl AdversaryStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryStrategy::None => "none",
            AdversaryStrategy::ZeroTrap { .. } => "zero_trap",
            AdversaryStrategy::CurvatureKill { .. } => "curvature_kill",
            AdversaryStrategy::Shift { .. } => "shift",
            AdversaryStrategy::SignFlip { .. } => "sign_flip",
            AdversaryStrategy::GaussianNoise { .. } => "gaussian_noise",
        }
    }

    pub fn validate(&self, dim: usize) -> crate::Result<()> {
        use crate::Error;
        match *self {
            AdversaryStrategy::ZeroTrap { radius: Some(r) } if !(r >= 0.0) => {
                Err(Error::config("zero_trap radius must be >= 0"))
            }
            AdversaryStrategy::CurvatureKill { lambda, coordinate } => {
                if !(lambda > 0.0) {
                    return Err(Error::config("curvature_kill lambda must be > 0"));
                }
                if coordinate >= dim {
                    return Err(Error::config("curvature_kill coordinate out of range"));
                }
                Ok(())
            }
            AdversaryStrategy::Shift { scale, coordinate } => {
                if !scale.is_finite() {
                    return Err(Error::config("shift scale must be finite"));
                }
                if coordinate.is_some_and(|k| k >= dim) {
                    return Err(Error::config("shift coordinate out of range"));
                }
                Ok(())
            }
            AdversaryStrategy::SignFlip { scale } | AdversaryStrategy::GaussianNoise { scale }
                if !(scale >= 0.0 && scale.is_finite()) =>
            {
                Err(Error::config("adversary scale must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// The aggregate a targeting attack is aiming for this round, if its
    /// feasibility window is open. Used to audit message-level attacks.
    pub fn attack_target(&self, ctx: &RoundContext<'_>, budget: f64) -> Option<ParamVector> {
        match *self {
            AdversaryStrategy::ZeroTrap { radius } => {
                let open = match radius {
                    Some(r) => ctx.w.norm() <= r,
                    None => ctx.true_grad.norm() <= budget,
                };
                open.then(|| ParamVector::zeros(ctx.w.dim()))
            }
            AdversaryStrategy::CurvatureKill { lambda, coordinate } => {
                curvature_kill_target(ctx, lambda, coordinate, budget)
            }
            _ => None,
        }
    }

    /// Byzantine messages for one round: exactly `count` finite vectors.
    pub fn craft<R: Rng + ?Sized>(
        &self,
        ctx: &RoundContext<'_>,
        count: usize,
        budget: f64,
        rng: &mut R,
    ) -> Vec<ParamVector> {
        if count == 0 {
            return Vec::new();
        }
        let msgs = match *self {
            AdversaryStrategy::None => ctx.echo(count),
            AdversaryStrategy::ZeroTrap { .. } => match self.attack_target(ctx, budget) {
                Some(target) => vec![target; count],
                None => ctx.echo(count),
            },
            AdversaryStrategy::CurvatureKill { lambda, coordinate } => {
                curvature_kill_messages(ctx, lambda, budget, coordinate, count)
            }
            AdversaryStrategy::Shift { scale, coordinate } => {
                let mut m = ctx.honest_mean();
                m.axpy(scale, &shift_direction(ctx.w.dim(), coordinate));
                vec![m; count]
            }
            AdversaryStrategy::SignFlip { scale } => vec![ctx.honest_mean().scale(-scale); count],
            AdversaryStrategy::GaussianNoise { scale } => {
                let mean = ctx.honest_mean();
                (0..count)
                    .map(|_| {
                        let mut v = rng::standard_normal_vec(rng, mean.dim()).scale(scale);
                        v.axpy(1.0, &mean);
                        v
                    })
                    .collect()
            }
        };
        debug_assert_eq!(msgs.len(), count);
        debug_assert!(msgs.iter().all(ParamVector::is_finite));
        msgs
    }

    /// Oracle-level adversary: any vector in the ball of radius `budget`
    /// around the true gradient. The strategy's preferred vector is projected
    /// onto that ball.
    pub fn oracle_vector<R: Rng + ?Sized>(&self, ctx: &RoundContext<'_>, budget: f64, rng: &mut R) -> ParamVector {
        let g = ctx.true_grad;
        let raw = match *self {
            AdversaryStrategy::None => g.clone(),
            AdversaryStrategy::ZeroTrap { .. } | AdversaryStrategy::CurvatureKill { .. } => {
                self.attack_target(ctx, budget).unwrap_or_else(|| g.clone())
            }
            AdversaryStrategy::Shift { coordinate, scale } => {
                let mut v = g.clone();
                v.axpy(scale.signum() * budget, &shift_direction(g.dim(), coordinate));
                v
            }
            AdversaryStrategy::SignFlip { scale } => g.scale(-scale),
            AdversaryStrategy::GaussianNoise { scale } => {
                let mut v = rng::standard_normal_vec(rng, g.dim()).scale(scale);
                v.axpy(1.0, g);
                v
            }
        };
        project_to_ball(&raw, g, budget)
    }
}

fn shift_direction(dim: usize, coordinate: Option<usize>) -> ParamVector {
    match coordinate {
        Some(k) => ParamVector::basis(dim, k),
        None => ParamVector::filled(dim, 1.0 / (dim as f64).sqrt()),
    }
}

fn curvature_kill_target(ctx: &RoundContext<'_>, lambda: f64, coordinate: usize, budget: f64) -> Option<ParamVector> {
    if ctx.w[coordinate].abs() > budget / lambda {
        return None;
    }
    let mut target = ctx.true_grad.clone();
    target[coordinate] = 0.0;
    Some(target)
}

/// Saddle-point attack messages: inside the window `|w_k| <= budget/lambda`
/// every Byzantine worker reports the true gradient with the escape
/// coordinate zeroed; outside it the attack cannot stay within budget and
/// the workers report honest-consistent values.
pub fn curvature_kill_messages(
    ctx: &RoundContext<'_>,
    lambda: f64,
    budget: f64,
    coordinate: usize,
    count: usize,
) -> Vec<ParamVector> {
    match curvature_kill_target(ctx, lambda, coordinate, budget) {
        Some(t) => vec![t; count],
        None => ctx.echo(count),
    }
}

/// Probability that a uniform start in the disc of radius `r` falls inside
/// the curvature-kill window `|w_2| <= budget / lambda`, with
/// `x = budget / (lambda r)`.
pub fn stuck_probability(x: f64) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    std::f64::consts::FRAC_2_PI * (x.asin() + x * (1.0 - x * x).sqrt())
}

/// Closest point to `v` in the ball of radius `radius` around `center`.
pub fn project_to_ball(v: &ParamVector, center: &ParamVector, radius: f64) -> ParamVector {
    let diff = v.sub(center);
    let n = diff.norm();
    if n <= radius {
        return v.clone();
    }
    let mut out = center.clone();
    out.axpy(radius / n, &diff);
    out
}

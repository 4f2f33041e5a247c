//! Small dense linear-algebra helpers: power iteration and extreme
//! eigenvalues of symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::rng::{self, Stream};
use crate::vector::ParamVector;

pub const POWER_MAX_ITERS: usize = 1000;
pub const POWER_TOL: f64 = 1e-6;
/// Fixed seed for power-iteration start vectors.
const POWER_START_SEED: u64 = 0x5EED_B1A5;

/// Above this dimension the smallest Hessian eigenvalue is found by power
/// iteration on a shifted matrix instead of a dense decomposition.
pub const DENSE_EIG_MAX_DIM: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: ParamVector,
    pub iterations: usize,
}

/// Power iteration for the dominant eigenpair of a symmetric positive
/// semidefinite operator given by `matvec(x, out)`.
///
/// Stops when the Rayleigh quotient changes by at most `tol` relative to its
/// magnitude, or after `max_iters`. A zero operator yields eigenvalue 0 and
/// the normalised start vector.
pub fn power_iteration<F>(dim: usize, mut matvec: F, max_iters: usize, tol: f64) -> EigenPair
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut start_rng = rng::substream(POWER_START_SEED, Stream::PowerStart);
    let mut x = rng::standard_normal_vec(&mut start_rng, dim).into_vec();
    normalize(&mut x);
    let mut y = vec![0.0; dim];
    let mut lambda = 0.0;
    let mut iterations = 0;
    for it in 1..=max_iters {
        iterations = it;
        matvec(&x, &mut y);
        let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ny == 0.0 {
            lambda = 0.0;
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
        let converged = it > 1 && (rq - lambda).abs() <= tol * rq.abs().max(f64::MIN_POSITIVE);
        lambda = rq;
        if converged {
            break;
        }
    }
    // final Rayleigh quotient on the returned vector
    matvec(&x, &mut y);
    let rq: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    if rq.is_finite() {
        lambda = rq;
    }
    let mut vector = ParamVector::from(x);
    canonical_sign(&mut vector);
    EigenPair { value: lambda, vector, iterations }
}

fn normalize(x: &mut [f64]) {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Flips `v` so that its first non-negligible entry is positive.
pub fn canonical_sign(v: &mut ParamVector) {
    let scale = v.norm_inf();
    if scale == 0.0 {
        return;
    }
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
        if first < 0.0 {
            v.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Dense symmetric decomposition up to [`DENSE_EIG_MAX_DIM`]; beyond that,
/// power iteration on `s*I - H` with `s` a Gershgorin upper bound.
pub fn symmetric_min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let d = h.nrows();
    assert_eq!(d, h.ncols(), "matrix must be square");
    if d == 0 {
        return 0.0;
    }
    if d <= DENSE_EIG_MAX_DIM {
        let eig = SymmetricEigen::new(h.clone());
        return eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    }
    let shift = gershgorin_upper(h);
    let top = power_iteration(
        d,
        |x, out| {
            for (i, o) in out.iter_mut().enumerate() {
                let row: f64 = (0..d).map(|j| h[(i, j)] * x[j]).sum();
                *o = shift * x[i] - row;
            }
        },
        POWER_MAX_ITERS * 10,
        1e-12,
    );
    shift - top.value
}

/// Upper bound on the spectral radius of a symmetric matrix (max absolute row sum).
pub fn gershgorin_upper(h: &DMatrix<f64>) -> f64 {
    (0..h.nrows())
        .map(|i| h.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn symmetric_spectral_norm(h: &DMatrix<f64>) -> f64 {
    if h.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(h.clone());
    eig.eigenvalues.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

//! Robust gradient aggregation: coordinate-wise median, coordinate-wise
//! trimmed mean, and iterative filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenPair};
use crate::vector::ParamVector;

/// The `m` gradients received in one parallel iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBatch {
    vectors: Vec<ParamVector>,
    pub round_index: u64,
}

impl GradientBatch {
    pub fn new(vectors: Vec<ParamVector>, round_index: u64) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::usage("gradient batch must contain at least one vector"));
        };
        let d = first.dim();
        for v in &vectors {
            v.check_dim(d)?;
        }
        Ok(GradientBatch { vectors, round_index })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[ParamVector] {
        &self.vectors
    }

    fn column(&self, k: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregatorSpec {
    Median,
    TrimmedMean { beta: f64 },
    IterativeFilter { alpha: f64, sigma: f64 },
}

/// Result of one aggregation, with bookkeeping for the round audit.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub value: ParamVector,
    /// Set when iterative filtering diverged and the coordinate-wise median
    /// of the batch was returned instead.
    pub fallback: Option<String>,
    pub filter_rounds: Option<usize>,
}

impl AggregatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AggregatorSpec::Median => "median",
            AggregatorSpec::TrimmedMean { .. } => "trimmed_mean",
            AggregatorSpec::IterativeFilter { .. } => "iterative_filter",
        }
    }

    /// Checks the aggregator parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregatorSpec::Median => Ok(()),
            AggregatorSpec::TrimmedMean { beta } => {
                if !(0.0..0.5).contains(&beta) {
                    return Err(Error::config("trimmed_mean requires beta in [0, 1/2)"));
                }
                Ok(())
            }
            AggregatorSpec::IterativeFilter { alpha, sigma } => {
                if !(0.0..=0.25).contains(&alpha) {
                    return Err(Error::config("iterative_filter requires alpha in [0, 1/4]"));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::config("iterative_filter requires sigma > 0"));
                }
                Ok(())
            }
        }
    }

    pub fn aggregate(&self, batch: &GradientBatch) -> Result<Aggregate> {
        match *self {
            AggregatorSpec::Median => Ok(Aggregate { value: coordinate_median(batch), fallback: None, filter_rounds: None }),
            AggregatorSpec::TrimmedMean { beta } => {
                Ok(Aggregate { value: trimmed_mean(batch, beta)?, fallback: None, filter_rounds: None })
            }
            AggregatorSpec::IterativeFilter { alpha, sigma } => match iterative_filter(batch, alpha, sigma) {
                Ok(out) => Ok(Aggregate { value: out.mean, fallback: None, filter_rounds: Some(out.rounds) }),
                Err(e @ Error::FilterDiverged { .. }) => Ok(Aggregate {
                    value: coordinate_median(batch),
                    fallback: Some(e.to_string()),
                    filter_rounds: None,
                }),
                Err(e) => Err(e),
            },
        }
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Coordinate-wise median; even batch sizes use the midpoint of the central pair.
pub fn coordinate_median(batch: &GradientBatch) -> ParamVector {
    (0..batch.dim())
        .map(|k| median_of(&mut batch.column(k)))
        .collect::<Vec<_>>()
        .into()
}

/// Number of entries dropped from each tail: `ceil(beta * m)`, capped so
/// that at least one entry survives.
pub fn trim_count(beta: f64, m: usize) -> usize {
    // guard against products like 0.1 * 50 = 5.000000000000001
    let raw = beta * m as f64;
    let nearest = raw.round();
    let k = if (raw - nearest).abs() < 1e-9 { nearest as usize } else { raw.ceil() as usize };
    k.min(m.saturating_sub(1) / 2)
}

/// Coordinate-wise beta-trimmed mean: drops `ceil(beta m)` entries from each
/// tail and averages the survivors.
pub fn trimmed_mean(batch: &GradientBatch, beta: f64) -> Result<ParamVector> {
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::usage("trimmed mean requires beta in [0, 1/2)"));
    }
    let m = batch.len();
    let k = trim_count(beta, m);
    let survivors = (m - 2 * k) as f64;
    Ok((0..batch.dim())
        .map(|j| {
            let mut col = batch.column(j);
            col.sort_by(f64::total_cmp);
            col[k..m - k].iter().sum::<f64>() / survivors
        })
        .collect::<Vec<_>>()
        .into())
}

/// Top eigenpair of `sum_i weights[i] y_i y_i^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDirection {
    pub eigenvalue: f64,
    pub direction: ParamVector,
}

/// Power iteration on the weighted second-moment matrix of `centered`.
///
/// When `d <= k` the `d x d` matrix is formed explicitly, otherwise the
/// product is applied implicitly. The direction's first non-negligible entry
/// is positive. An all-zero input gives eigenvalue 0 and the first basis
/// vector. With a repeated top eigenvalue the direction is some unit vector
/// of that eigenspace, fixed by the seeded start.
pub fn top_principal_direction(centered: &[ParamVector], weights: &[f64]) -> Result<PrincipalDirection> {
    let Some(first) = centered.first() else {
        return Err(Error::usage("principal direction of an empty set"));
    };
    if centered.len() != weights.len() {
        return Err(Error::usage("weights and vectors differ in length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::usage("weights must be non-negative"));
    }
    let d = first.dim();
    for v in centered {
        v.check_dim(d)?;
    }
    let active: Vec<(&ParamVector, f64)> = centered
        .iter()
        .zip(weights)
        .filter(|(v, w)| **w > 0.0 && v.norm_inf() > 0.0)
        .map(|(v, w)| (v, *w))
        .collect();
    if active.is_empty() {
        return Ok(PrincipalDirection { eigenvalue: 0.0, direction: ParamVector::basis(d, 0) });
    }

    let EigenPair { value, vector, .. } = if d <= active.len() {
        let mut m = vec![0.0; d * d];
        for (y, w) in &active {
            let y = y.as_slice();
            for i in 0..d {
                let wy = w * y[i];
                for j in 0..d {
                    m[i * d + j] += wy * y[j];
                }
            }
        }
        linalg::power_iteration(
            d,
            |x, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum();
                }
            },
            linalg::POWER_MAX_ITERS,
            linalg::POWER_TOL,
        )
    } else {
        linalg::power_iteration(
            d,
            |x, out| {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (y, w) in &active {
                    let proj: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * w;
                    for (o, a) in out.iter_mut().zip(y.iter()) {
                        *o += proj * a;
                    }
                }
            },
            linalg::POWER_MAX_ITERS,
            linalg::POWER_TOL,
        )
    };
    Ok(PrincipalDirection { eigenvalue: value.max(0.0), direction: vector })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub mean: ParamVector,
    /// Filtering rounds that removed or down-weighted points.
    pub rounds: usize,
    pub active: usize,
}

/// Iterative filtering with uniform centring weights over the active set.
///
/// Each round scores every active point by its squared projection onto the
/// top principal direction of the weighted, centred second moment. While the
/// weighted score total exceeds `8 m sigma^2` the weights shrink by
/// `1 - tau_i / tau_max` and points with weight at most 1/2 leave the active
/// set. The threshold keeps the full batch size `m` even as the active set
/// shrinks.
pub fn iterative_filter(batch: &GradientBatch, alpha: f64, sigma: f64) -> Result<FilterOutcome> {
    if !(0.0..=0.25).contains(&alpha) {
        return Err(Error::usage("iterative filtering requires alpha in [0, 1/4]"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::usage("iterative filtering requires sigma > 0"));
    }
    let m = batch.len();
    let xs = batch.vectors();
    let threshold = 8.0 * m as f64 * sigma * sigma;
    let min_active = (1.0 - 2.0 * alpha) * m as f64;

    let mut active: Vec<usize> = (0..m).collect();
    let mut weights = vec![1.0; m];
    let mut rounds = 0;
    loop {
        let center = ParamVector::mean(active.iter().map(|&i| &xs[i])).expect("active set is non-empty");
        let centered: Vec<ParamVector> = active.iter().map(|&i| xs[i].sub(&center)).collect();
        let w: Vec<f64> = active.iter().map(|&i| weights[i]).collect();
        let top = top_principal_direction(&centered, &w)?;
        let scores: Vec<f64> = centered.iter().map(|y| y.dot(&top.direction).powi(2)).collect();
        let weighted: f64 = scores.iter().zip(&w).map(|(t, c)| t * c).sum();
        if weighted <= threshold {
            return Ok(FilterOutcome { mean: center, rounds, active: active.len() });
        }
        rounds += 1;
        let tau_max = scores.iter().copied().fold(0.0, f64::max);
        for (&i, tau) in active.iter().zip(&scores) {
            weights[i] *= 1.0 - tau / tau_max;
        }
        active.retain(|&i| weights[i] > 0.5);
        if (active.len() as f64) < min_active || active.is_empty() {
            return Err(Error::FilterDiverged { active: active.len(), required: min_active.ceil() as usize });
        }
    }
}

/// Square root of the top eigenvalue of the sample covariance of `points`;
/// the filtering scale when ground-truth honest samples are available.
pub fn estimate_sigma(points: &[ParamVector]) -> Result<f64> {
    let mean = ParamVector::mean(points).ok_or_else(|| Error::usage("no points"))?;
    let centered: Vec<ParamVector> = points.iter().map(|p| p.sub(&mean)).collect();
    let w = vec![1.0 / points.len() as f64; points.len()];
    Ok(top_principal_direction(&centered, &w)?.eigenvalue.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, substream, Stream};
    use proptest::prelude::*;

    fn batch(rows: &[&[f64]]) -> GradientBatch {
        GradientBatch::new(rows.iter().map(|r| ParamVector::from(r.to_vec())).collect(), 0).unwrap()
    }

    #[test]
    fn median_examples() {
        assert_eq!(coordinate_median(&batch(&[&[1.0], &[2.0], &[100.0]])).as_slice(), &[2.0]);
        assert_eq!(
            coordinate_median(&batch(&[&[0.0, 10.0], &[2.0, 0.0], &[4.0, 20.0]])).as_slice(),
            &[2.0, 10.0]
        );
        let v = [1.5, -2.0, 7.0];
        assert_eq!(coordinate_median(&batch(&[&v, &v, &v, &v])).as_slice(), &v);
        assert_eq!(coordinate_median(&batch(&[&[1.0], &[4.0]])).as_slice(), &[2.5]);
    }

    #[test]
    fn empty_batch_is_usage_error() {
        assert!(matches!(GradientBatch::new(vec![], 0), Err(Error::Usage(_))));
        let ragged = vec![ParamVector::zeros(2), ParamVector::zeros(3)];
        assert!(GradientBatch::new(ragged, 0).is_err());
    }

    #[test]
    fn trimmed_mean_examples() {
        let b = batch(&[&[0.0], &[1.0], &[2.0]]);
        assert_eq!(trimmed_mean(&b, 1.0 / 3.0).unwrap().as_slice(), &[1.0]);
        let b = batch(&[&[0.0], &[1.0], &[2.0], &[100.0]]);
        assert_eq!(trimmed_mean(&b, 0.25).unwrap().as_slice(), &[1.5]);
        assert_eq!(trimmed_mean(&b, 0.0).unwrap().as_slice(), &[103.0 / 4.0]);
        // fractional beta*m rounds the trim count up
        assert_eq!(trimmed_mean(&b, 0.1).unwrap().as_slice(), &[1.5]);
        // the trim count is capped so one entry per tail pair survives
        assert_eq!(trimmed_mean(&batch(&[&[0.0], &[1.0]]), 0.49).unwrap().as_slice(), &[0.5]);
        assert_eq!(trimmed_mean(&batch(&[&[7.0]]), 0.1).unwrap().as_slice(), &[7.0]);
        assert!(trimmed_mean(&b, 0.5).is_err());
        assert_eq!(trim_count(0.1, 50), 5);
        assert_eq!(trim_count(0.2, 50), 10);
    }

    #[test]
    fn principal_direction_examples() {
        let pd = top_principal_direction(&[ParamVector::from(vec![3.0, 4.0])], &[1.0]).unwrap();
        assert!((pd.eigenvalue - 25.0).abs() < 25.0 * 1e-6);
        assert!((pd.direction[0] - 0.6).abs() < 1e-6 && (pd.direction[1] - 0.8).abs() < 1e-6);

        let pts: Vec<ParamVector> = [[2.0, 0.5], [-2.0, 0.5], [2.0, -0.5], [-2.0, -0.5]]
            .iter()
            .map(|p| ParamVector::from(p.to_vec()))
            .collect();
        let pd = top_principal_direction(&pts, &[1.0; 4]).unwrap();
        assert!((pd.direction[0].abs() - 1.0).abs() < 1e-6 && pd.direction[1].abs() < 1e-3);
        assert!(pd.direction[0] > 0.0);
        assert!((pd.eigenvalue - 16.0).abs() < 16.0 * 1e-6);

        // degenerate tie: any unit vector of the plane is a valid answer
        let tie = vec![ParamVector::from(vec![1.0, 0.0]), ParamVector::from(vec![0.0, 1.0])];
        let pd = top_principal_direction(&tie, &[1.0, 1.0]).unwrap();
        assert!((pd.eigenvalue - 1.0).abs() < 1e-9);
        assert!((pd.direction.norm() - 1.0).abs() < 1e-12);
        let first = pd.direction.iter().copied().find(|x| x.abs() > 1e-12).unwrap();
        assert!(first > 0.0);
        let again = top_principal_direction(&tie, &[1.0, 1.0]).unwrap();
        assert_eq!(pd, again);

        let zeros = vec![ParamVector::zeros(3); 2];
        let pd = top_principal_direction(&zeros, &[1.0, 1.0]).unwrap();
        assert_eq!(pd.eigenvalue, 0.0);
        assert_eq!(pd.direction.as_slice(), &[1.0, 0.0, 0.0]);
        assert!(top_principal_direction(&[], &[]).is_err());
        assert!(top_principal_direction(&zeros, &[1.0, -1.0]).is_err());
    }

    #[test]
    fn implicit_and_explicit_paths_agree() {
        let mut r = substream(2, Stream::Trial);
        let pts: Vec<ParamVector> = (0..6).map(|_| rng::standard_normal_vec(&mut r, 5)).collect();
        let w = vec![1.0, 0.5, 2.0, 1.0, 0.1, 0.7];
        // 6 points in dimension 5 takes the explicit path; 4 points the implicit one
        let a = top_principal_direction(&pts, &w).unwrap();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(5, 5);
        for (p, wi) in pts.iter().zip(&w) {
            let v = nalgebra::DVector::from_column_slice(p.as_slice());
            dense += &v * v.transpose() * *wi;
        }
        let top = nalgebra::SymmetricEigen::new(dense).eigenvalues.max();
        assert!((a.eigenvalue - top).abs() < 1e-5 * top);
        let b = top_principal_direction(&pts[..4], &w[..4]).unwrap();
        let mut dense4 = nalgebra::DMatrix::<f64>::zeros(5, 5);
        for (p, wi) in pts[..4].iter().zip(&w[..4]) {
            let v = nalgebra::DVector::from_column_slice(p.as_slice());
            dense4 += &v * v.transpose() * *wi;
        }
        let top4 = nalgebra::SymmetricEigen::new(dense4).eigenvalues.max();
        assert!((b.eigenvalue - top4).abs() < 1e-5 * top4);
    }

    #[test]
    fn filter_on_clean_batch_is_the_mean() {
        let mut r = substream(4, Stream::Trial);
        let pts: Vec<ParamVector> = (0..30).map(|_| rng::standard_normal_vec(&mut r, 3).scale(0.1)).collect();
        let b = GradientBatch::new(pts.clone(), 0).unwrap();
        let out = iterative_filter(&b, 0.1, 1.0).unwrap();
        assert_eq!(out.rounds, 0);
        assert_eq!(out.mean, ParamVector::mean(&pts).unwrap());
    }

    #[test]
    fn filter_removes_a_huge_outlier() {
        let mut r = substream(5, Stream::Trial);
        let mut pts: Vec<ParamVector> = (0..19)
            .map(|_| {
                let mut p = rng::uniform_in_ball(&mut r, 2, 0.1);
                p.as_mut_slice().iter_mut().for_each(|x| *x = x.clamp(-0.1, 0.1));
                p
            })
            .collect();
        pts.push(ParamVector::from(vec![1e6, 0.0]));
        let b = GradientBatch::new(pts, 0).unwrap();
        let out = iterative_filter(&b, 0.05, 1.0).unwrap();
        assert!(out.mean.norm() < 0.2, "{:?}", out.mean);
        assert_eq!(out.active, 19);
    }

    #[test]
    fn filter_identical_vectors() {
        let v = ParamVector::from(vec![0.3, -1.0, 2.0]);
        let b = GradientBatch::new(vec![v.clone(); 8], 0).unwrap();
        assert_eq!(iterative_filter(&b, 0.25, 0.5).unwrap().mean, v);
    }

    #[test]
    fn filter_preconditions() {
        let b = GradientBatch::new(vec![ParamVector::zeros(2); 8], 0).unwrap();
        assert!(iterative_filter(&b, 0.3, 1.0).is_err());
        assert!(iterative_filter(&b, 0.1, 0.0).is_err());
        let single = GradientBatch::new(vec![ParamVector::from(vec![1.0, 2.0])], 0).unwrap();
        assert_eq!(iterative_filter(&single, 0.1, 1.0).unwrap().mean.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn filter_divergence_falls_back_to_median() {
        // two equal clusters far apart: with a tiny sigma every round keeps
        // cutting until the active set is too small
        let mut pts = Vec::new();
        for i in 0..10 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            pts.push(ParamVector::from(vec![s * (1.0 + 0.01 * i as f64), 0.0]));
        }
        let b = GradientBatch::new(pts, 0).unwrap();
        assert!(matches!(iterative_filter(&b, 0.1, 1e-3), Err(Error::FilterDiverged { .. })));
        let agg = AggregatorSpec::IterativeFilter { alpha: 0.1, sigma: 1e-3 }.aggregate(&b).unwrap();
        assert!(agg.fallback.is_some());
        assert_eq!(agg.value, coordinate_median(&b));
    }

    #[test]
    fn spec_validation() {
        assert!(AggregatorSpec::TrimmedMean { beta: 0.5 }.validate().is_err());
        assert!(AggregatorSpec::TrimmedMean { beta: 0.1 }.validate().is_ok());
        assert!(AggregatorSpec::IterativeFilter { alpha: 0.3, sigma: 1.0 }.validate().is_err());
        assert!(AggregatorSpec::IterativeFilter { alpha: 0.2, sigma: 1.0 }.validate().is_ok());
        let spec: AggregatorSpec = serde_json::from_str(r#"{"kind":"trimmed_mean","beta":0.1}"#).unwrap();
        assert_eq!(spec, AggregatorSpec::TrimmedMean { beta: 0.1 });
    }

    #[test]
    fn sigma_estimate_matches_known_spread() {
        let mut r = substream(6, Stream::Trial);
        let pts: Vec<ParamVector> = (0..4000).map(|_| rng::standard_normal_vec(&mut r, 3).scale(2.0)).collect();
        let s = estimate_sigma(&pts).unwrap();
        assert!((s - 2.0).abs() < 0.15, "{s}");
    }

    fn batch_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..4, 1usize..12).prop_flat_map(|(d, m)| {
            proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, d), m)
        })
    }

    fn all_specs(m: usize) -> Vec<AggregatorSpec> {
        let mut specs = vec![AggregatorSpec::Median, AggregatorSpec::TrimmedMean { beta: 0.0 }];
        if m >= 5 {
            specs.push(AggregatorSpec::TrimmedMean { beta: 0.2 });
        }
        if m >= 4 {
            specs.push(AggregatorSpec::IterativeFilter { alpha: 0.2, sigma: 5.0 });
        }
        specs
    }

    proptest! {
        #[test]
        fn permutation_invariance(rows in batch_strategy(), shift in 0usize..12) {
            let m = rows.len();
            let b = GradientBatch::new(rows.iter().cloned().map(ParamVector::from).collect(), 0).unwrap();
            let mut rotated = rows.clone();
            rotated.rotate_left(shift % m);
            rotated.reverse();
            let p = GradientBatch::new(rotated.into_iter().map(ParamVector::from).collect(), 0).unwrap();
            for spec in all_specs(m) {
                let a = spec.aggregate(&b).unwrap().value;
                let c = spec.aggregate(&p).unwrap().value;
                // order-statistic based rules are exact; averaging rules differ only by summation order
                prop_assert!(a.sub(&c).norm_inf() <= 1e-9 * (1.0 + a.norm_inf()), "{:?}", spec);
            }
        }

        #[test]
        fn translation_equivariance(rows in batch_strategy(), c in -50.0f64..50.0) {
            let d = rows[0].len();
            let shift = ParamVector::filled(d, c);
            let b = GradientBatch::new(rows.iter().cloned().map(ParamVector::from).collect(), 0).unwrap();
            let moved = GradientBatch::new(rows.iter().cloned().map(|r| ParamVector::from(r).add(&shift)).collect(), 0).unwrap();
            for beta in [0.0, 0.2] {
                if beta > 0.0 && rows.len() < 5 { continue; }
                let a = trimmed_mean(&b, beta).unwrap().add(&shift);
                let t = trimmed_mean(&moved, beta).unwrap();
                prop_assert!(a.sub(&t).norm_inf() < 1e-9);
            }
            let a = coordinate_median(&b).add(&shift);
            let t = coordinate_median(&moved);
            prop_assert!(a.sub(&t).norm_inf() < 1e-9);
        }

        #[test]
        fn order_statistic_containment(rows in batch_strategy()) {
            let b = GradientBatch::new(rows.iter().cloned().map(ParamVector::from).collect(), 0).unwrap();
            let mut outs = vec![coordinate_median(&b), trimmed_mean(&b, 0.0).unwrap()];
            if rows.len() >= 5 {
                outs.push(trimmed_mean(&b, 0.2).unwrap());
            }
            for out in outs {
                for k in 0..b.dim() {
                    let lo = rows.iter().map(|r| r[k]).fold(f64::INFINITY, f64::min);
                    let hi = rows.iter().map(|r| r[k]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(out[k] >= lo - 1e-9 && out[k] <= hi + 1e-9);
                }
            }
        }

        /// Replacing q of m values moves the median by at most q order
        /// statistics. For odd m that is the window
        /// [floor((1/2 - a) m), ceil((1/2 + a) m)]; for even m the upper end
        /// gains one rank because the median averages the central pair.
        #[test]
        fn median_robustness_sandwich(
            clean in proptest::collection::vec(-10.0f64..10.0, 1..10),
            junk in proptest::collection::vec(-1e6f64..1e6, 9),
            mask_bits in 0u32..512,
        ) {
            let m = clean.len();
            let positions: Vec<usize> = (0..m).filter(|i| mask_bits & (1 << i) != 0).collect();
            let q = positions.len();
            prop_assume!(2 * q < m);
            let mut corrupted = clean.clone();
            for (slot, &i) in positions.iter().enumerate() {
                corrupted[i] = junk[slot];
            }
            let b = GradientBatch::new(corrupted.iter().map(|&x| ParamVector::from(vec![x])).collect(), 0).unwrap();
            let med = coordinate_median(&b)[0];
            let mut sorted = clean.clone();
            sorted.sort_by(f64::total_cmp);
            let alpha = q as f64 / m as f64;
            let lo_rank = (((0.5 - alpha) * m as f64) + 1e-9).floor().max(1.0) as usize;
            let mut hi_rank = (((0.5 + alpha) * m as f64) - 1e-9).ceil() as usize;
            if m % 2 == 0 { hi_rank += 1; }
            let hi_rank = hi_rank.min(m);
            prop_assert!(med >= sorted[lo_rank - 1] && med <= sorted[hi_rank - 1]);
        }
    }
}

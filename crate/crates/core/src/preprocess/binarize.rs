//! Two-class Gaussian binarization of pooled features.
//!
//! Each feature gets one normal fit per class; the points where the two
//! densities cross become the thresholds that map a pooled value to a bit.

use serde::{Deserialize, Serialize};

use super::PooledVector;
use crate::error::{invalid, QbcError, Result};

/// Lower bound on fitted standard deviations (pooled values live in `[0, 1]`).
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Relative difference below which two deviations count as equal.
pub const SIGMA_REL_TOL: f64 = 1e-9;

/// Range of pooled pixel values.
pub const VALUE_RANGE: [f64; 2] = [0.0, 1.0];

pub fn normal_density(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Where the two class densities of a feature are equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intersections {
    Single(f64),
    /// Two crossings, ascending.
    Pair(f64, f64),
    /// No real crossing exists; the midpoint of the means stands in for one.
    Degenerate(f64),
}

/// Crossing points of `N(mu0, sigma0²)` and `N(mu1, sigma1²)`.
///
/// Equal deviations give the single midpoint `(mu0 + mu1) / 2`. Otherwise
/// the log-density equality is the quadratic `a·x² + b·x + c = 0` with
/// `a = 1/(2σ1²) − 1/(2σ0²)`, `b = μ0/σ0² − μ1/σ1²`,
/// `c = μ1²/(2σ1²) − μ0²/(2σ0²) + ln(σ1/σ0)`.
pub fn gaussian_intersections(mu0: f64, sigma0: f64, mu1: f64, sigma1: f64) -> Result<Intersections> {
    if ![mu0, sigma0, mu1, sigma1].iter().all(|v| v.is_finite()) || sigma0 <= 0.0 || sigma1 <= 0.0 {
        return invalid(format!(
            "gaussian parameters must be finite with positive deviations (mu0={mu0}, sigma0={sigma0}, mu1={mu1}, sigma1={sigma1})"
        ));
    }
    let midpoint = (mu0 + mu1) / 2.0;
    if (sigma0 - sigma1).abs() <= SIGMA_REL_TOL * sigma0.max(sigma1) {
        return Ok(Intersections::Single(midpoint));
    }

    let (v0, v1) = (sigma0 * sigma0, sigma1 * sigma1);
    let a = 1.0 / (2.0 * v1) - 1.0 / (2.0 * v0);
    let b = mu0 / v0 - mu1 / v1;
    let c = mu1 * mu1 / (2.0 * v1) - mu0 * mu0 / (2.0 * v0) + (sigma1 / sigma0).ln();
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        log::warn!(
            "no real density crossing for N({mu0}, {sigma0}²) vs N({mu1}, {sigma1}²); using the midpoint"
        );
        return Ok(Intersections::Degenerate(midpoint));
    }
    // cancellation-free pair of roots
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let r1 = q / a;
    let r2 = if q != 0.0 { c / q } else { r1 };
    if r1 == r2 {
        return Ok(Intersections::Single(r1));
    }
    Ok(Intersections::Pair(r1.min(r2), r1.max(r2)))
}

/// Keeps the crossings inside `range`. When none is left, one density
/// dominates the whole range and the midpoint of the means stands in.
fn restrict(all: Intersections, range: Option<[f64; 2]>, midpoint: f64) -> Intersections {
    let Some([lo, hi]) = range else {
        return all;
    };
    let roots = match all {
        Intersections::Single(t) => vec![t],
        Intersections::Pair(a, b) => vec![a, b],
        Intersections::Degenerate(_) => return all,
    };
    let inside: Vec<f64> = roots.into_iter().filter(|t| (lo..=hi).contains(t)).collect();
    match inside[..] {
        [a, b] => Intersections::Pair(a, b),
        [t] => Intersections::Single(t),
        _ => {
            log::warn!("no density crossing inside [{lo}, {hi}]; using the midpoint {midpoint}");
            Intersections::Degenerate(midpoint)
        }
    }
}

/// Class-conditional normal fits for one feature plus their crossings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureGaussians {
    pub mu0: f64,
    pub sigma0: f64,
    pub mu1: f64,
    pub sigma1: f64,
    /// `mu0 <= mu1`
    pub class0_lower: bool,
    /// Every real crossing of the two densities.
    pub intersections: Intersections,
    /// The crossings that decide the bit.
    pub thresholds: Intersections,
}

impl FeatureGaussians {
    /// Uses every real crossing as a threshold.
    pub fn new(mu0: f64, sigma0: f64, mu1: f64, sigma1: f64) -> Result<Self> {
        Self::with_range(mu0, sigma0, mu1, sigma1, None)
    }

    /// Uses only the crossings inside `range` (all of them for `None`).
    /// Two normals with different deviations always cross twice, but often
    /// only once where pooled values can actually fall.
    pub fn with_range(mu0: f64, sigma0: f64, mu1: f64, sigma1: f64, range: Option<[f64; 2]>) -> Result<Self> {
        let intersections = gaussian_intersections(mu0, sigma0, mu1, sigma1)?;
        Ok(Self {
            mu0,
            sigma0,
            mu1,
            sigma1,
            class0_lower: mu0 <= mu1,
            intersections,
            thresholds: restrict(intersections, range, (mu0 + mu1) / 2.0),
        })
    }

    /// Maps a pooled value to a bit using `thresholds`.
    ///
    /// With one crossing `t`: 0 when `x <= t` and `mu0 <= mu1`, or `x > t` and
    /// `mu0 > mu1`. With two crossings `t1 <= t2`: the "low" side is
    /// `x <= t1`, or `t1 <= x <= t2` and `x` no farther from `t1` than from
    /// `t2`; the low side is 0 when `mu0 <= mu1` and 1 otherwise.
    pub fn binarize(&self, x: f64) -> u8 {
        let low_side = match self.thresholds {
            Intersections::Single(t) | Intersections::Degenerate(t) => x <= t,
            Intersections::Pair(t1, t2) => x <= t1 || (x <= t2 && (t1 - x).abs() <= (t2 - x).abs()),
        };
        u8::from(low_side != self.class0_lower)
    }
}

fn mle(values: &[f64], sigma_floor: f64) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(sigma_floor))
}

/// Maximum-likelihood fits (`1/N` variance) of one feature for both classes.
pub fn fit_feature(
    class0: &[f64],
    class1: &[f64],
    sigma_floor: f64,
    range: Option<[f64; 2]>,
) -> Result<FeatureGaussians> {
    if class0.len() < 2 || class1.len() < 2 {
        return invalid(format!(
            "each class needs at least 2 values to fit (got {} and {})",
            class0.len(),
            class1.len()
        ));
    }
    if class0.iter().chain(class1).any(|v| !v.is_finite()) {
        return invalid("pooled values must be finite");
    }
    let (mu0, sigma0) = mle(class0, sigma_floor);
    let (mu1, sigma1) = mle(class1, sigma_floor);
    FeatureGaussians::with_range(mu0, sigma0, mu1, sigma1, range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BinarizerDoc")]
pub struct BinarizerModel {
    sigma_floor: f64,
    crossing_range: Option<[f64; 2]>,
    features: Vec<FeatureGaussians>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinarizerDoc {
    sigma_floor: f64,
    crossing_range: Option<[f64; 2]>,
    features: Vec<FeatureGaussians>,
}

impl TryFrom<BinarizerDoc> for BinarizerModel {
    type Error = QbcError;

    fn try_from(doc: BinarizerDoc) -> Result<Self> {
        BinarizerModel::new(doc.sigma_floor, doc.crossing_range, doc.features)
    }
}

impl BinarizerModel {
    pub fn new(sigma_floor: f64, crossing_range: Option<[f64; 2]>, features: Vec<FeatureGaussians>) -> Result<Self> {
        if !(sigma_floor > 0.0) {
            return invalid("sigma floor must be positive");
        }
        if let Some([lo, hi]) = crossing_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("crossing range [{lo}, {hi}] is empty or not finite"));
            }
        }
        for (i, f) in features.iter().enumerate() {
            if !(f.sigma0 >= sigma_floor && f.sigma1 >= sigma_floor) {
                return invalid(format!("feature {}: deviation below the floor", i + 1));
            }
            if f.class0_lower != (f.mu0 <= f.mu1) {
                return invalid(format!("feature {}: orientation flag disagrees with means", i + 1));
            }
            let want = FeatureGaussians::with_range(f.mu0, f.sigma0, f.mu1, f.sigma1, crossing_range)?;
            if (want.intersections, want.thresholds) != (f.intersections, f.thresholds) {
                return invalid(format!("feature {}: crossings do not match the fitted densities", i + 1));
            }
        }
        Ok(Self {
            sigma_floor,
            crossing_range,
            features,
        })
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn crossing_range(&self) -> Option<[f64; 2]> {
        self.crossing_range
    }

    pub fn features(&self) -> &[FeatureGaussians] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Bit for pooled value `x` of feature `i` (0-based).
    pub fn binarize(&self, i: usize, x: f64) -> Result<u8> {
        self.features
            .get(i)
            .map(|f| f.binarize(x))
            .ok_or_else(|| QbcError::InvalidArgument(format!("binarizer has no feature {i}")))
    }

    pub fn binarize_all(&self, pooled: &[f64]) -> Result<Vec<u8>> {
        if pooled.len() != self.features.len() {
            return invalid(format!(
                "{} pooled values for a {}-feature binarizer",
                pooled.len(),
                self.features.len()
            ));
        }
        Ok(self.features.iter().zip(pooled).map(|(f, &x)| f.binarize(x)).collect())
    }
}

/// Fits one [`FeatureGaussians`] per feature from pooled vectors of the two
/// classes, with thresholds taken inside [`VALUE_RANGE`].
pub fn fit_binarizer(class0: &[PooledVector], class1: &[PooledVector]) -> Result<BinarizerModel> {
    fit_binarizer_with(class0, class1, SIGMA_FLOOR, Some(VALUE_RANGE))
}

pub fn fit_binarizer_with(
    class0: &[PooledVector],
    class1: &[PooledVector],
    sigma_floor: f64,
    crossing_range: Option<[f64; 2]>,
) -> Result<BinarizerModel> {
    let n = class0.first().or(class1.first()).map_or(0, Vec::len);
    if class0.iter().chain(class1).any(|v| v.len() != n) {
        return invalid("pooled vectors have inconsistent lengths");
    }
    let features = (0..n)
        .map(|i| {
            let v0: Vec<f64> = class0.iter().map(|v| v[i]).collect();
            let v1: Vec<f64> = class1.iter().map(|v| v[i]).collect();
            fit_feature(&v0, &v1, sigma_floor, crossing_range)
        })
        .collect::<Result<Vec<_>>>()?;
    if features.is_empty() {
        return invalid("cannot fit a binarizer without features");
    }
    BinarizerModel::new(sigma_floor, crossing_range, features)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn densities_equal(mu0: f64, s0: f64, mu1: f64, s1: f64, x: f64) -> f64 {
        (normal_density(x, mu0, s0) - normal_density(x, mu1, s1)).abs()
    }

    #[test]
    fn equal_variance_midpoint() {
        assert_eq!(gaussian_intersections(0.0, 1.0, 2.0, 1.0).unwrap(), Intersections::Single(1.0));
        assert_eq!(gaussian_intersections(0.3, 0.2, 0.3, 0.2).unwrap(), Intersections::Single(0.3));
    }

    /// Bisection on the density difference, independent of the quadratic.
    fn bisect_crossing(mu0: f64, s0: f64, mu1: f64, s1: f64, mut lo: f64, mut hi: f64) -> f64 {
        let g = |x: f64| normal_density(x, mu0, s0) - normal_density(x, mu1, s1);
        assert!(g(lo) * g(hi) <= 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(lo) * g(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn unequal_variance_roots() {
        let want = ((8.0 / 3.0) * std::f64::consts::LN_2).sqrt();
        assert!((want - bisect_crossing(0.0, 1.0, 0.0, 2.0, 0.0, 5.0)).abs() < 1e-12);
        assert!((want - 1.359556).abs() < 1e-6);
        match gaussian_intersections(0.0, 1.0, 0.0, 2.0).unwrap() {
            Intersections::Pair(a, b) => {
                assert!((a + want).abs() < 1e-12);
                assert!((b - want).abs() < 1e-12);
                for x in [a, b] {
                    assert!(densities_equal(0.0, 1.0, 0.0, 2.0, x) < 1e-12);
                }
            }
            other => panic!("expected two roots, got {other:?}"),
        }
    }

    #[test]
    fn roots_match_bisection() {
        for &(mu0, s0, mu1, s1) in &[(0.1, 0.05, 0.4, 0.12), (0.6, 0.2, 0.3, 0.03), (0.0, 0.3, 0.05, 0.31)] {
            let Intersections::Pair(a, b) = gaussian_intersections(mu0, s0, mu1, s1).unwrap() else {
                panic!("expected two crossings");
            };
            let narrow = if s0 < s1 { mu0 } else { mu1 };
            let oa = bisect_crossing(mu0, s0, mu1, s1, a - 1.0, narrow);
            let ob = bisect_crossing(mu0, s0, mu1, s1, narrow, b + 1.0);
            assert!((a - oa).abs() < 1e-9 * (1.0 + a.abs()), "{a} vs {oa}");
            assert!((b - ob).abs() < 1e-9 * (1.0 + b.abs()), "{b} vs {ob}");
        }
    }

    #[test]
    fn nearest_crossing_rule_applies_between_roots() {
        // the narrow class-0 bump sits nearer the upper crossing, so the
        // region between the roots splits by distance, not by density
        let f = FeatureGaussians::new(0.15, 0.04, 0.75, 0.05).unwrap();
        let Intersections::Pair(t1, t2) = f.intersections else { panic!() };
        assert!(t1 < 0.15 && 0.15 < t2 && t2 < 0.75);
        let mid = 0.5 * (t1 + t2);
        assert_eq!(f.binarize(mid - 1e-6), 0);
        assert_eq!(f.binarize(mid + 1e-6), 1);
    }

    #[test]
    fn bad_parameters() {
        assert!(gaussian_intersections(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(gaussian_intersections(f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn two_point_mle() {
        let f = fit_feature(&[0.0, 2.0], &[5.0, 7.0], SIGMA_FLOOR, None).unwrap();
        assert_eq!(f.mu0, 1.0);
        assert_eq!(f.sigma0, 1.0);
        assert_eq!(f.mu1, 6.0);
        assert_eq!(f.intersections, Intersections::Single(3.5));
    }

    #[test]
    fn constant_values_hit_floor() {
        let f = fit_feature(&[0.2, 0.2, 0.2], &[0.5, 0.7], SIGMA_FLOOR, None).unwrap();
        assert_eq!(f.sigma0, SIGMA_FLOOR);
        assert!(fit_feature(&[], &[0.5, 0.7], SIGMA_FLOOR, None).is_err());
        assert!(fit_feature(&[0.1], &[0.5, 0.7], SIGMA_FLOOR, None).is_err());
    }

    #[test]
    fn single_crossing_rule() {
        let f = FeatureGaussians::new(0.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(f.binarize(0.4), 0);
        assert_eq!(f.binarize(1.7), 1);
        assert_eq!(f.binarize(1.0), 0, "boundary belongs to the low side");
        let flipped = FeatureGaussians::new(2.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(flipped.binarize(0.4), 1);
        assert_eq!(flipped.binarize(1.7), 0);
        assert_eq!(flipped.binarize(1.0), 1);
    }

    #[test]
    fn two_crossing_rule() {
        let t = ((8.0 / 3.0) * std::f64::consts::LN_2).sqrt();
        // mu0 <= mu1 (equal means)
        let f = FeatureGaussians::new(0.0, 1.0, 0.0, 2.0).unwrap();
        assert!(f.class0_lower);
        assert_eq!(f.binarize(-0.5), 0);
        assert_eq!(f.binarize(-3.0), 0);
        assert_eq!(f.binarize(0.5), 1);
        let exact = FeatureGaussians {
            thresholds: Intersections::Pair(-t, t),
            ..f.clone()
        };
        assert_eq!(exact.binarize(0.0), 0, "equidistant goes low");
        assert_eq!(f.binarize(t + 0.1), 1);

        let g = FeatureGaussians {
            mu0: 0.5,
            sigma0: 1.0,
            mu1: 0.0,
            sigma1: 2.0,
            class0_lower: false,
            intersections: Intersections::Pair(-t, t),
            thresholds: Intersections::Pair(-t, t),
        };
        assert_eq!(g.binarize(-0.5), 1);
        assert_eq!(g.binarize(0.5), 0);
        assert_eq!(g.binarize(t + 1.0), 0);
    }

    #[test]
    fn binarize_is_total() {
        let f = FeatureGaussians::new(0.1, 0.05, 0.6, 0.2).unwrap();
        for x in [-1e300, -1.0, 0.0, 0.33, 1.0, 1e300, f64::MAX, f64::MIN] {
            assert!(f.binarize(x) <= 1);
        }
    }

    #[test]
    fn model_validation() {
        let good = FeatureGaussians::new(0.1, 0.05, 0.6, 0.2).unwrap();
        assert!(BinarizerModel::new(SIGMA_FLOOR, None, vec![good.clone()]).is_ok());
        let mut low = good.clone();
        low.sigma0 = 1e-6;
        assert!(BinarizerModel::new(SIGMA_FLOOR, None, vec![low]).is_err());
        let mut flag = good;
        flag.class0_lower = false;
        assert!(BinarizerModel::new(SIGMA_FLOOR, None, vec![flag]).is_err());
    }

    #[test]
    fn crossings_outside_the_range_are_ignored() {
        // narrow class 1 near 0, wide class 0: the lower crossing is negative
        let all = FeatureGaussians::new(0.3, 0.14, 0.0014, 0.0113).unwrap();
        let Intersections::Pair(t1, t2) = all.intersections else { panic!() };
        assert!(t1 < 0.0 && (0.0..1.0).contains(&t2));
        // taken literally, both classes fall on the same side
        assert_eq!(all.binarize(0.0014), all.binarize(0.3));

        let ranged = FeatureGaussians::with_range(0.3, 0.14, 0.0014, 0.0113, Some(VALUE_RANGE)).unwrap();
        assert_eq!(ranged.intersections, all.intersections);
        assert_eq!(ranged.thresholds, Intersections::Single(t2));
        assert_eq!(ranged.binarize(0.0014), 1);
        assert_eq!(ranged.binarize(0.3), 0);
    }

    #[test]
    fn no_crossing_in_range_falls_back_to_midpoint() {
        let f = FeatureGaussians::with_range(0.3, 0.01, 0.5, 0.011, Some([0.0, 0.05])).unwrap();
        assert_eq!(f.thresholds, Intersections::Degenerate(0.4));
        let both = FeatureGaussians::with_range(0.5, 0.05, 0.52, 0.2, Some(VALUE_RANGE)).unwrap();
        assert!(matches!(both.thresholds, Intersections::Pair(..)));
        assert_eq!(both.thresholds, both.intersections);
    }

    #[test]
    fn model_checks_range_and_thresholds() {
        let f = FeatureGaussians::with_range(0.3, 0.14, 0.0014, 0.0113, Some(VALUE_RANGE)).unwrap();
        assert!(BinarizerModel::new(SIGMA_FLOOR, Some(VALUE_RANGE), vec![f.clone()]).is_ok());
        assert!(BinarizerModel::new(SIGMA_FLOOR, None, vec![f.clone()]).is_err());
        assert!(BinarizerModel::new(SIGMA_FLOOR, Some([1.0, 0.0]), vec![f]).is_err());
    }

    #[test]
    fn fit_binarizer_shapes() {
        let c0 = vec![vec![0.1, 0.9], vec![0.2, 0.8]];
        let c1 = vec![vec![0.8, 0.1], vec![0.9, 0.2]];
        let m = fit_binarizer(&c0, &c1).unwrap();
        assert_eq!(m.n_features(), 2);
        assert_eq!(m.binarize_all(&[0.12, 0.85]).unwrap(), vec![0, 0]);
        assert_eq!(m.binarize_all(&[0.75, 0.15]).unwrap(), vec![1, 1]);
        assert!(m.binarize_all(&[0.1]).is_err());
        assert!(m.binarize(2, 0.1).is_err());
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<BinarizerModel>(&text).unwrap(), m);
    }
}

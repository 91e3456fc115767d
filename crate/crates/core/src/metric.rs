//! Distances, the light-corrected image distance, the Gaussian kernel and
//! epsilon sparsification.
//!
//! Everything here is a pure function of its inputs. The light-corrected
//! distance is a minimum over three weighted norms and therefore not a true
//! metric: the triangle inequality can fail across branches. Consumers such
//! as the quantizer only rely on symmetry, non-negativity and `d(x, x) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A finite, d-dimensional example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T>(Vec<T>);

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(values))
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| T::of(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch { expected, actual: self.dim() });
        }
        Ok(())
    }
}

impl<T> AsRef<[T]> for FeatureVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// Per-position weights of the weighted L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterWeights<T>(Vec<T>);

impl<T: Scalar> CenterWeights<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidParameter("center weights must be finite and non-negative".into()));
        }
        if !weights.iter().any(|w| *w > T::zero()) {
            return Err(Error::InvalidParameter("at least one center weight must be positive".into()));
        }
        Ok(Self(weights))
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::new(vec![T::one(); dim])
    }

    /// Radially symmetric weights for a `side x side` image, decaying as
    /// `exp(-r^2 / (2 rho^2))` where `r` is the distance from the image
    /// center normalized so that the edge midpoints sit at `r = 1`.
    pub fn radial(side: usize, rho: f64) -> Result<Self> {
        if side == 0 || rho <= 0.0 {
            return Err(Error::InvalidParameter("radial weights need side > 0 and rho > 0".into()));
        }
        let center = (side as f64 - 1.0) / 2.0;
        let half = (side as f64 / 2.0).max(0.5);
        let mut weights = Vec::with_capacity(side * side);
        for row in 0..side {
            for col in 0..side {
                let dy = (row as f64 - center) / half;
                let dx = (col as f64 - center) / half;
                let r2 = dx * dx + dy * dy;
                weights.push(T::of((-r2 / (2.0 * rho * rho)).exp()));
            }
        }
        Self::new(weights)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Default width of the radial center weighting.
pub const DEFAULT_RADIAL_RHO: f64 = 0.5;

/// Heat parameter and sparsification threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams<T> {
    pub sigma: T,
    pub epsilon: T,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(sigma: T, epsilon: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(epsilon >= T::zero() && epsilon < T::one()) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1), got {epsilon}")));
        }
        Ok(Self { sigma, epsilon })
    }

    /// `gamma_g = 10 epsilon`.
    pub fn default_gamma(&self) -> T {
        T::of(10.0) * self.epsilon
    }

    pub fn edge_weight(&self, distance: T) -> T {
        sparsify(similarity(distance, self), self.epsilon)
    }

    /// Largest distance that still yields a kept edge (`w >= epsilon`).
    pub fn radius(&self) -> T {
        if self.epsilon <= T::zero() {
            return T::infinity();
        }
        self.sigma * (T::of(2.0) * -self.epsilon.ln()).sqrt()
    }
}

fn check_lengths<T>(x: &[T], y: &[T], psi: &[T]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    if psi.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), actual: psi.len() });
    }
    Ok(())
}

fn weighted_sq<T: Scalar>(psi: &[T], diff: impl Iterator<Item = T>) -> T {
    psi.iter().zip(diff).fold(T::zero(), |acc, (&w, d)| acc + w * d * d)
}

fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::from_count(x.len() as u64)
}

/// `sqrt(sum_k psi_k (x_k - y_k)^2)`.
pub fn weighted_l2<T: Scalar>(x: &[T], y: &[T], psi: &CenterWeights<T>) -> Result<T> {
    check_lengths(x, y, psi.as_slice())?;
    Ok(weighted_l2_unchecked(x, y, psi.as_slice()))
}

fn weighted_l2_unchecked<T: Scalar>(x: &[T], y: &[T], psi: &[T]) -> T {
    weighted_sq(psi, x.iter().zip(y).map(|(&a, &b)| a - b)).sqrt()
}

pub fn euclidean<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |acc, (&a, &b)| {
            let d = a - b;
            acc + d * d
        })
        .sqrt()
}

/// Result of the light-corrected distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceDistance<T> {
    pub value: T,
    /// Set when a zero mean excluded the ratio branch from the minimum.
    pub ratio_skipped: bool,
}

/// Minimum of the raw, mean-subtracted and mean-ratio weighted norms.
/// Corrects for additive and multiplicative changes of illumination.
pub fn face_distance<T: Scalar>(x: &[T], y: &[T], psi: &CenterWeights<T>) -> Result<FaceDistance<T>> {
    check_lengths(x, y, psi.as_slice())?;
    if x.is_empty() {
        return Ok(FaceDistance { value: T::zero(), ratio_skipped: false });
    }
    Ok(face_distance_unchecked(x, y, psi.as_slice()))
}

fn face_distance_unchecked<T: Scalar>(x: &[T], y: &[T], psi: &[T]) -> FaceDistance<T> {
    let raw = weighted_sq(psi, x.iter().zip(y).map(|(&a, &b)| a - b));
    let mx = mean(x);
    let my = mean(y);
    let centered = weighted_sq(psi, x.iter().zip(y).map(|(&a, &b)| (a - mx) - (b - my)));
    let mut best = raw.min(centered);
    let ratio_skipped = mx == T::zero() || my == T::zero();
    if !ratio_skipped {
        let ratio = weighted_sq(psi, x.iter().zip(y).map(|(&a, &b)| a / mx - b / my));
        best = best.min(ratio);
    }
    FaceDistance { value: best.sqrt(), ratio_skipped }
}

/// `exp(-d^2 / (2 sigma^2))`.
pub fn similarity<T: Scalar>(distance: T, params: &KernelParams<T>) -> T {
    let s = params.sigma;
    (-(distance * distance) / (T::of(2.0) * s * s)).exp()
}

/// Drops weights strictly below `epsilon`.
pub fn sparsify<T: Scalar>(w: T, epsilon: T) -> T {
    if w < epsilon {
        T::zero()
    } else {
        w
    }
}

/// Symmetric, non-negative dissimilarity with `d(x, x) = 0`. Inputs are
/// assumed to have equal length; callers validate dimensions up front.
pub trait Dissimilarity<T> {
    fn distance(&self, a: &[T], b: &[T]) -> T;
}

impl<T, F> Dissimilarity<T> for F
where
    F: Fn(&[T], &[T]) -> T,
{
    fn distance(&self, a: &[T], b: &[T]) -> T {
        self(a, b)
    }
}

/// The dissimilarities shipped with the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Metric<T> {
    Euclidean,
    WeightedL2(CenterWeights<T>),
    Face(CenterWeights<T>),
}

impl<T: Scalar> Metric<T> {
    pub fn validate_dim(&self, dim: usize) -> Result<()> {
        match self {
            Metric::Euclidean => Ok(()),
            Metric::WeightedL2(psi) | Metric::Face(psi) if psi.dim() != dim => {
                Err(Error::DimensionMismatch { expected: dim, actual: psi.dim() })
            }
            _ => Ok(()),
        }
    }
}

impl<T: Scalar> Dissimilarity<T> for Metric<T> {
    fn distance(&self, a: &[T], b: &[T]) -> T {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::WeightedL2(psi) => weighted_l2_unchecked(a, b, psi.as_slice()),
            Metric::Face(psi) => face_distance_unchecked(a, b, psi.as_slice()).value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn psi(w: &[f64]) -> CenterWeights<f64> {
        CenterWeights::new(w.to_vec()).unwrap()
    }

    #[test]
    fn weighted_l2_examples() {
        let ones = psi(&[1.0, 1.0]);
        assert_eq!(weighted_l2(&[0.3, 0.4], &[0.3, 0.4], &ones).unwrap(), 0.0);
        assert!((weighted_l2(&[1.0, 0.0], &[0.0, 1.0], &ones).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(weighted_l2(&[1.0, 0.0], &[0.0, 1.0], &psi(&[4.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn weighted_l2_dimension_mismatch() {
        let err = weighted_l2(&[1.0, 0.0], &[0.0], &psi(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(weighted_l2(&[1.0], &[0.0], &psi(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn center_weights_validation() {
        assert!(CenterWeights::<f64>::new(vec![0.0, 0.0]).is_err());
        assert!(CenterWeights::<f64>::new(vec![1.0, -0.1]).is_err());
        let radial = CenterWeights::<f64>::radial(4, DEFAULT_RADIAL_RHO).unwrap();
        assert_eq!(radial.dim(), 16);
        // corners weigh less than the central pixels
        assert!(radial.as_slice()[0] < radial.as_slice()[5]);
        assert_eq!(radial.as_slice()[5], radial.as_slice()[10]);
    }

    #[test]
    fn face_distance_light_invariance() {
        let x = [0.2, 0.5, 0.9, 0.1];
        let w = psi(&[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(face_distance(&x, &x, &w).unwrap().value, 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.3).collect();
        assert!(face_distance(&x, &shifted, &w).unwrap().value < 1e-12);
        let scaled: Vec<f64> = x.iter().map(|v| v * 1.7).collect();
        assert!(face_distance(&x, &scaled, &w).unwrap().value < 1e-12);
    }

    #[test]
    fn face_distance_zero_mean_skips_ratio() {
        let x = [0.5, -0.5];
        let y = [0.1, 0.2];
        let d = face_distance(&x, &y, &psi(&[1.0, 1.0])).unwrap();
        assert!(d.ratio_skipped);
        assert!(d.value.is_finite());
        let ok = face_distance(&[0.1, 0.3], &y, &psi(&[1.0, 1.0])).unwrap();
        assert!(!ok.ratio_skipped);
    }

    #[test]
    fn similarity_examples() {
        let p = KernelParams::new(0.025, 0.0).unwrap();
        assert_eq!(similarity(0.0, &p), 1.0);
        assert!((similarity(0.025, &p) - (-0.5f64).exp()).abs() < 1e-15);
        let d = 0.025 * (2.0 * 1e6f64.ln()).sqrt();
        assert!((similarity(d, &p) - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn sparsify_examples() {
        assert_eq!(sparsify(0.5, 0.6), 0.0);
        assert_eq!(sparsify(0.5, 0.5), 0.5);
        assert_eq!(sparsify(1.0, 1e-8), 1.0);
    }

    #[test]
    fn kernel_params_validation() {
        assert!(KernelParams::new(0.0, 0.1).is_err());
        assert!(KernelParams::new(1.0, 1.0).is_err());
        assert!(KernelParams::new(1.0, -0.1).is_err());
        let p = KernelParams::<f64>::new(0.025, 1e-8).unwrap();
        assert!((p.default_gamma() - 1e-7).abs() < 1e-22);
        // the kept-edge radius maps back onto epsilon
        assert!((similarity(p.radius(), &p) - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn feature_vector_rejects_nan() {
        assert!(matches!(FeatureVector::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(FeatureVector::<f64>::new(vec![1.0]).unwrap().check_dim(2).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let w = CenterWeights::<f32>::uniform(2).unwrap();
        assert!((weighted_l2(&[1.0f32, 0.0], &[0.0, 1.0], &w).unwrap() - 2f32.sqrt()).abs() < 1e-6);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|d| {
            (
                prop::collection::vec(0.05f64..1.0, d),
                prop::collection::vec(0.05f64..1.0, d),
                prop::collection::vec(0.1f64..2.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn face_distance_symmetric_and_bounded((x, y, w) in vec_pair()) {
            let w = CenterWeights::new(w).unwrap();
            let a = face_distance(&x, &y, &w).unwrap().value;
            let b = face_distance(&y, &x, &w).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            prop_assert!(a >= 0.0);
            prop_assert!(a <= weighted_l2(&x, &y, &w).unwrap() + 1e-15);
        }

        #[test]
        fn light_changes_vanish((x, _y, w) in vec_pair(), c in -0.5f64..0.5, s in 0.1f64..5.0) {
            prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
            let w = CenterWeights::new(w).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let scaled: Vec<f64> = x.iter().map(|v| v * s).collect();
            prop_assert!(face_distance(&x, &shifted, &w).unwrap().value <= 1e-12);
            prop_assert!(face_distance(&x, &scaled, &w).unwrap().value <= 1e-12);
        }

        #[test]
        fn sparsified_kernel_range(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, eps in 0.0f64..0.9) {
            let p = KernelParams::new(0.2, eps).unwrap();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(similarity(lo, &p) >= similarity(hi, &p));
            let w = p.edge_weight(d1);
            prop_assert!(w == 0.0 || (w >= eps && w <= 1.0));
        }
    }
}

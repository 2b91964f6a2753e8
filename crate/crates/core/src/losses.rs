//! Objective math for the image-side models: Gaussian soft labels over
//! time bins, KL divergence, the expectation readout, and the
//! consistency / sharpness / diversity terms of a twin-distribution
//! self-supervised loss. Only the formulas live here; no network code.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_VARIANCE: f64 = 4.0;
pub const DEFAULT_RANGE: (f64, f64) = (0.0, 9.0);

const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over classes, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution(Vec<f64>);

impl ClassDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(SurvError::InvalidDistribution("no classes".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SurvError::InvalidDistribution(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(SurvError::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(ClassDistribution(probabilities))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(SurvError::InvalidDistribution("weights must have a positive sum".into()));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; classes])
    }

    pub fn one_hot(classes: usize, index: usize) -> Result<Self> {
        if index >= classes {
            return Err(SurvError::invalid(format!("class {index} out of {classes}")));
        }
        let mut p = vec![0.0; classes];
        p[index] = 1.0;
        Self::new(p)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Shannon entropy in nats, `0 ln 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }
}

/// Discretized Gaussian label over equal-width time bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    bin_edges: Vec<f64>,
    distribution: ClassDistribution,
}

impl SoftLabel {
    /// Pairs an arbitrary distribution with bins, e.g. a network output.
    pub fn new(bin_edges: Vec<f64>, distribution: ClassDistribution) -> Result<Self> {
        if bin_edges.len() != distribution.len() + 1 {
            return Err(SurvError::LengthMismatch {
                expected: distribution.len() + 1,
                found: bin_edges.len(),
            });
        }
        if bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SurvError::invalid("bin edges must increase"));
        }
        Ok(SoftLabel {
            bin_edges,
            distribution,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn probabilities(&self) -> &[f64] {
        self.distribution.probabilities()
    }

    pub fn distribution(&self) -> &ClassDistribution {
        &self.distribution
    }
}

pub fn equal_bins(bins: usize, range: (f64, f64)) -> Vec<f64> {
    let width = (range.1 - range.0) / bins as f64;
    (0..=bins).map(|k| range.0 + k as f64 * width).collect()
}

/// Gaussian density with mean `y` and the given variance, evaluated at the
/// bin centers and renormalized.
pub fn soft_label(y: f64, bins: usize, variance: f64, range: (f64, f64)) -> Result<SoftLabel> {
    if bins < 2 {
        return Err(SurvError::invalid("soft labels need at least two bins"));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(SurvError::invalid("variance must be positive"));
    }
    if !(range.1 > range.0) {
        return Err(SurvError::invalid("empty label range"));
    }
    if !(range.0..=range.1).contains(&y) {
        return Err(SurvError::invalid(format!(
            "label {y} outside [{}, {}]",
            range.0, range.1
        )));
    }
    let edges = equal_bins(bins, range);
    let weights: Vec<f64> = edges
        .windows(2)
        .map(|w| {
            let c = 0.5 * (w[0] + w[1]);
            (-(c - y) * (c - y) / (2.0 * variance)).exp()
        })
        .collect();
    SoftLabel::new(edges, ClassDistribution::from_weights(&weights)?)
}

/// `sum target_i ln(target_i / predicted_i)`, with `0 ln 0 = 0`.
pub fn kl_divergence(target: &ClassDistribution, predicted: &ClassDistribution) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(SurvError::LengthMismatch {
            expected: target.len(),
            found: predicted.len(),
        });
    }
    let mut kl = 0.0;
    for (i, (&p, &q)) in target.0.iter().zip(&predicted.0).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(SurvError::InfiniteDivergence(i));
            }
            kl += p * (p / q).ln();
        }
    }
    Ok(kl)
}

/// Probability-weighted mean of the bin centers.
pub fn expected_time(dist: &SoftLabel) -> f64 {
    dist.bin_centers()
        .iter()
        .zip(dist.probabilities())
        .map(|(c, p)| c * p)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistLoss {
    pub total: f64,
    pub consistency: f64,
    pub sharpness: f64,
    pub diversity: f64,
}

/// Twin-distribution loss over a batch of paired views:
///
/// * consistency: batch mean of the symmetric KL `(KL(p||q) + KL(q||p)) / 2`
/// * sharpness: mean entropy of all `2B` distributions
/// * diversity: entropy of the mean of all `2B` distributions
///
/// `total = consistency + sharpness_weight * sharpness - diversity_weight * diversity`.
pub fn twist_loss(
    pairs: &[(ClassDistribution, ClassDistribution)],
    sharpness_weight: f64,
    diversity_weight: f64,
) -> Result<TwistLoss> {
    let Some((first, _)) = pairs.first() else {
        return Err(SurvError::Empty("batch"));
    };
    let classes = first.len();
    for (p, q) in pairs {
        for d in [p, q] {
            if d.len() != classes {
                return Err(SurvError::LengthMismatch {
                    expected: classes,
                    found: d.len(),
                });
            }
        }
    }
    let b = pairs.len() as f64;
    let mut consistency = 0.0;
    let mut sharpness = 0.0;
    let mut mean = vec![0.0; classes];
    for (p, q) in pairs {
        consistency += 0.5 * (kl_divergence(p, q)? + kl_divergence(q, p)?);
        sharpness += p.entropy() + q.entropy();
        for (m, (a, c)) in mean.iter_mut().zip(p.0.iter().zip(&q.0)) {
            *m += a + c;
        }
    }
    consistency /= b;
    sharpness /= 2.0 * b;
    mean.iter_mut().for_each(|m| *m /= 2.0 * b);
    let diversity = -mean.iter().filter(|&&m| m > 0.0).map(|m| m * m.ln()).sum::<f64>();
    Ok(TwistLoss {
        total: consistency + sharpness_weight * sharpness - diversity_weight * diversity,
        consistency,
        sharpness,
        diversity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> ClassDistribution {
        ClassDistribution::from_weights(v).unwrap()
    }

    #[test]
    fn soft_label_sums_to_one_and_is_symmetric() {
        let s = soft_label(4.5, 30, 4.0, (0.0, 9.0)).unwrap();
        assert_eq!(s.probabilities().len(), 30);
        assert_eq!(s.bin_edges().len(), 31);
        assert!((s.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // 4.5 is the middle edge of 30 bins over [0, 9]
        let p = s.probabilities();
        for k in 0..15 {
            assert!((p[k] - p[29 - k]).abs() < 1e-15);
        }
        // centered on bin 10 of 21 bins over [0, 9]: symmetric about bin 10
        let c = 9.0 * 10.5 / 21.0;
        let s = soft_label(c, 21, 4.0, (0.0, 9.0)).unwrap();
        let p = s.probabilities();
        for k in 0..10 {
            assert!((p[10 - k - 1] - p[10 + k + 1]).abs() < 1e-15);
        }
        assert!((expected_time(&s) - c).abs() < 1e-12);
    }

    #[test]
    fn soft_label_at_five_matches_density_script() {
        // exp(-(c - 5)^2 / 8) at the 30 centers of [0, 9], normalized
        let expected = [
            0.0032564097328083605, 0.004632632493064315, 0.006443844148738165,
            0.008763762129027507, 0.011653718102669783, 0.015151890043760408,
            0.019261827343893773, 0.023941785497606678, 0.0290967149514219,
            0.03457480644924145, 0.040170194068431406, 0.04563273261604895,
            0.05068476029617043, 0.05504358244521765, 0.05844728749311469,
            0.06068067507224218, 0.061597746035534424, 0.06113749105389228,
            0.05933060512561164, 0.05629610104429208, 0.052228341049536005,
            0.04737645046160913, 0.04201914213351914, 0.03643847710022513,
            0.03089595531983257, 0.025613646594141833, 0.020762018411059326,
            0.016454932487618253, 0.012751198657491145, 0.009661271642179302,
        ];
        let s = soft_label(5.0, DEFAULT_BINS, DEFAULT_VARIANCE, DEFAULT_RANGE).unwrap();
        for (p, e) in s.probabilities().iter().zip(expected) {
            assert!((p - e).abs() < 1e-10);
        }
        let mean = expected_time(&s);
        assert!((mean - 4.925046264518499).abs() < 1e-10);
        assert!(mean > 4.9 && mean < 5.0);
    }

    #[test]
    fn truncation_bias_at_range_ends() {
        let lo = soft_label(2.0, DEFAULT_BINS, DEFAULT_VARIANCE, DEFAULT_RANGE).unwrap();
        let hi = soft_label(7.0, DEFAULT_BINS, DEFAULT_VARIANCE, DEFAULT_RANGE).unwrap();
        assert!((expected_time(&lo) - 2.0 - 0.5731483102891382).abs() < 1e-10);
        assert!((expected_time(&hi) - 7.0 + 0.5731483102891382).abs() < 1e-10);
    }

    #[test]
    fn soft_label_rejects_out_of_range() {
        assert!(soft_label(9.5, 30, 4.0, (0.0, 9.0)).is_err());
        assert!(soft_label(-0.1, 30, 4.0, (0.0, 9.0)).is_err());
        assert!(soft_label(3.0, 1, 4.0, (0.0, 9.0)).is_err());
        assert!(soft_label(3.0, 30, 0.0, (0.0, 9.0)).is_err());
    }

    #[test]
    fn kl_basics() {
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let onehot = ClassDistribution::one_hot(7, 3).unwrap();
        let uni = ClassDistribution::uniform(7).unwrap();
        assert!((kl_divergence(&onehot, &uni).unwrap() - 7f64.ln()).abs() < 1e-14);
        assert!(matches!(
            kl_divergence(&uni, &onehot),
            Err(SurvError::InfiniteDivergence(0))
        ));
        assert!(kl_divergence(&p, &uni).is_err());
    }

    #[test]
    fn expected_time_point_mass() {
        let edges = equal_bins(30, (0.0, 9.0));
        let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let k = centers.iter().position(|c| (c - 4.5).abs() < 0.2).unwrap();
        let s = SoftLabel::new(edges, ClassDistribution::one_hot(30, k).unwrap()).unwrap();
        assert!((expected_time(&s) - centers[k]).abs() < 1e-15);
        // a two-bin mass symmetric about 4.5
        let mut w = vec![0.0; 30];
        w[14] = 1.0;
        w[15] = 1.0;
        let s = SoftLabel::new(equal_bins(30, (0.0, 9.0)), dist(&w)).unwrap();
        assert!((expected_time(&s) - 4.5).abs() < 1e-14);
    }

    #[test]
    fn twist_extremes() {
        let c = 4;
        let pairs: Vec<_> = (0..8)
            .map(|i| {
                let d = ClassDistribution::one_hot(c, i % c).unwrap();
                (d.clone(), d)
            })
            .collect();
        let l = twist_loss(&pairs, 1.0, 1.0).unwrap();
        assert_eq!(l.consistency, 0.0);
        assert_eq!(l.sharpness, 0.0);
        assert!((l.diversity - 4f64.ln()).abs() < 1e-15);

        let u = ClassDistribution::uniform(c).unwrap();
        let l = twist_loss(&[(u.clone(), u.clone()), (u.clone(), u)], 1.0, 1.0).unwrap();
        assert_eq!(l.consistency, 0.0);
        assert!((l.sharpness - 4f64.ln()).abs() < 1e-15);
        assert!((l.diversity - 4f64.ln()).abs() < 1e-15);
        assert!(l.total.abs() < 1e-15);
    }

    #[test]
    fn twist_rejects_mixed_lengths() {
        let a = ClassDistribution::uniform(3).unwrap();
        let b = ClassDistribution::uniform(4).unwrap();
        assert!(twist_loss(&[(a.clone(), a.clone()), (a, b)], 1.0, 1.0).is_err());
        assert!(twist_loss(&[], 1.0, 1.0).is_err());
    }

    fn arb_dist(c: usize) -> impl Strategy<Value = ClassDistribution> {
        prop::collection::vec(0.01f64..1.0, c).prop_map(|w| ClassDistribution::from_weights(&w).unwrap())
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(p in arb_dist(6), q in arb_dist(6)) {
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            prop_assert!(kl > 0.0 || p.probabilities().iter().zip(q.probabilities()).all(|(a, b)| (a - b).abs() < 1e-12));
        }

        #[test]
        fn twist_bounds_and_swap_invariance(
            batch in prop::collection::vec((arb_dist(5), arb_dist(5)), 1..6),
            flip in prop::collection::vec(any::<bool>(), 6),
        ) {
            let l = twist_loss(&batch, 1.0, 1.0).unwrap();
            let ln_c = 5f64.ln();
            prop_assert!(l.consistency >= 0.0);
            prop_assert!(l.sharpness >= 0.0 && l.sharpness <= ln_c + 1e-12);
            prop_assert!(l.diversity >= 0.0 && l.diversity <= ln_c + 1e-12);
            let swapped: Vec<_> = batch
                .iter()
                .zip(&flip)
                .map(|((p, q), &f)| if f { (q.clone(), p.clone()) } else { (p.clone(), q.clone()) })
                .collect();
            let s = twist_loss(&swapped, 1.0, 1.0).unwrap();
            prop_assert!((s.total - l.total).abs() < 1e-12);
            prop_assert!((s.consistency - l.consistency).abs() < 1e-12);
        }

        // truncation at the range ends biases the mean by up to 0.573 at
        // y = 2 and y = 7; the bound holds from y ~ 2.21 to 6.79
        #[test]
        fn expectation_stays_near_label(y in 2.25f64..=6.75) {
            let s = soft_label(y, DEFAULT_BINS, DEFAULT_VARIANCE, DEFAULT_RANGE).unwrap();
            prop_assert!((s.probabilities().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!((expected_time(&s) - y).abs() <= 0.5);
        }
    }
}

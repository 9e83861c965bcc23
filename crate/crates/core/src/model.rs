//! Gaussian-mixture feature model and sensing-noise statistics.
//!
//! Class `l` produces features `x ~ CN(mu_l, diag(sigma^2))`; the sensing
//! front end adds `d ~ CN(0, sigma_r^2 / P_r * I)`, so the transmitted feature
//! `x~ = x + d` has per-dimension variance `sigma^2 + sigma_r^2 / P_r` around
//! its class mean.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIOR_TOLERANCE: f64 = 1e-12;

/// Per-class means, shared diagonal covariance and class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    num_classes: usize,
    num_dims: usize,
    /// Row-major `num_classes x num_dims`.
    means: Vec<f64>,
    variances: Vec<f64>,
    priors: Vec<f64>,
}

impl FeatureModel {
    pub fn new(
        num_classes: usize,
        num_dims: usize,
        means: Vec<f64>,
        variances: Vec<f64>,
        priors: Vec<f64>,
    ) -> Result<Self> {
        if num_classes == 0 || num_dims == 0 {
            return Err(Error::InvalidModel(format!(
                "need at least one class and one dimension, got L={num_classes}, M={num_dims}"
            )));
        }
        if means.len() != num_classes * num_dims {
            return Err(Error::DimensionMismatch {
                what: "means (row-major L x M)",
                expected: num_classes * num_dims,
                got: means.len(),
            });
        }
        if variances.len() != num_dims {
            return Err(Error::DimensionMismatch {
                what: "variances",
                expected: num_dims,
                got: variances.len(),
            });
        }
        if priors.len() != num_classes {
            return Err(Error::DimensionMismatch {
                what: "priors",
                expected: num_classes,
                got: priors.len(),
            });
        }
        if let Some(m) = means.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("mean entry {m} is not finite")));
        }
        if let Some(m) = variances.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidModel(format!(
                "variance of dimension {m} must be positive and finite, got {}",
                variances[m]
            )));
        }
        if let Some(l) = priors.iter().position(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidModel(format!(
                "prior of class {l} must be nonnegative, got {}",
                priors[l]
            )));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "priors sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            num_classes,
            num_dims,
            means,
            variances,
            priors,
        })
    }

    /// Model with uniform priors, means given one row per class.
    pub fn with_uniform_priors(means: &[Vec<f64>], variances: Vec<f64>) -> Result<Self> {
        let num_classes = means.len();
        let num_dims = variances.len();
        if let Some(row) = means.iter().find(|r| r.len() != num_dims) {
            return Err(Error::DimensionMismatch {
                what: "class mean row",
                expected: num_dims,
                got: row.len(),
            });
        }
        let flat = means.iter().flatten().copied().collect();
        let priors = vec![1.0 / num_classes.max(1) as f64; num_classes];
        Self::new(num_classes, num_dims, flat, variances, priors)
    }

    /// Default synthetic model recipe; see [`SynthesisParams`].
    pub fn synthesize(params: &SynthesisParams) -> Result<Self> {
        params.validate()?;
        let (l_count, m_count) = (params.num_classes, params.num_dims);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

        let (ln_lo, ln_hi) = (params.variance_min.ln(), params.variance_max.ln());
        let variances: Vec<f64> = (0..m_count)
            .map(|_| (ln_lo + rng.random::<f64>() * (ln_hi - ln_lo)).exp())
            .collect();
        let ratios: Vec<f64> = (0..m_count)
            .map(|_| (params.ratio_jitter * rng.sample::<f64, _>(StandardNormal)).exp())
            .collect();
        let signs: Vec<f64> = (0..m_count)
            .map(|_| {
                if rng.sample::<f64, _>(StandardNormal) < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();

        // Adjacent classes are `gap_m = r * ratio_m * sigma_m^2` apart on each
        // dimension; r fixes their total discriminant gain.
        let weight: f64 = variances.iter().zip(&ratios).map(|(v, q)| v * q * q).sum();
        let scale = (params.pair_dg / weight).sqrt();
        let centre = (l_count as f64 - 1.0) / 2.0;
        let mut means = Vec::with_capacity(l_count * m_count);
        for l in 0..l_count {
            for m in 0..m_count {
                let gap = scale * ratios[m] * variances[m];
                means.push(signs[m] * (l as f64 - centre) * gap);
            }
        }
        let priors = vec![1.0 / l_count as f64; l_count];
        Self::new(l_count, m_count, means, variances, priors)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_dims(&self) -> usize {
        self.num_dims
    }

    /// Mean vector of class `class`.
    pub fn mean(&self, class: usize) -> &[f64] {
        &self.means[class * self.num_dims..(class + 1) * self.num_dims]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// `sigma_m^2 + sigma_r^2 / P_r` for every dimension.
    pub fn effective_variances(&self, sensing: &SensingConfig) -> Vec<f64> {
        let extra = sensing.noise_variance();
        self.variances.iter().map(|v| v + extra).collect()
    }

    /// `nu_m^2 = E|x~_m|^2 = sum_l pi_l mu_{l,m}^2 + sigma_m^2 + sigma_r^2 / P_r`.
    pub fn feature_second_moments(&self, sensing: &SensingConfig) -> Vec<f64> {
        let mut moments = self.effective_variances(sensing);
        for (l, prior) in self.priors.iter().enumerate() {
            for (nu2, mu) in moments.iter_mut().zip(self.mean(l)) {
                *nu2 += prior * mu * mu;
            }
        }
        moments
    }

    /// Noise-free discriminant gain between two classes.
    pub fn pair_dg(&self, a: usize, b: usize) -> f64 {
        self.mean(a)
            .iter()
            .zip(self.mean(b))
            .zip(&self.variances)
            .map(|((x, y), v)| (x - y) * (x - y) / v)
            .sum()
    }

    /// Class pair with the smallest noise-free discriminant gain, lowest
    /// index pair on ties.
    pub fn worst_pair(&self) -> Result<(usize, usize)> {
        self.require_pairs()?;
        let mut best = (0, 1);
        let mut best_dg = self.pair_dg(0, 1);
        for a in 0..self.num_classes {
            for b in a + 1..self.num_classes {
                let dg = self.pair_dg(a, b);
                if dg < best_dg {
                    best_dg = dg;
                    best = (a, b);
                }
            }
        }
        Ok(best)
    }

    /// Per-dimension squared mean gaps `delta_m^2` used by the DG criterion.
    pub fn pairwise_mean_gaps(&self, mode: GapMode) -> Result<Vec<f64>> {
        self.require_pairs()?;
        let gaps_of = |a: usize, b: usize| -> Vec<f64> {
            self.mean(a)
                .iter()
                .zip(self.mean(b))
                .map(|(x, y)| (x - y) * (x - y))
                .collect()
        };
        match mode {
            GapMode::WorstPair => {
                let (a, b) = self.worst_pair()?;
                Ok(gaps_of(a, b))
            }
            GapMode::AveragePairs => {
                let mut acc = vec![0.0; self.num_dims];
                let mut pairs = 0usize;
                for a in 0..self.num_classes {
                    for b in a + 1..self.num_classes {
                        for (s, g) in acc.iter_mut().zip(gaps_of(a, b)) {
                            *s += g;
                        }
                        pairs += 1;
                    }
                }
                acc.iter_mut().for_each(|s| *s /= pairs as f64);
                Ok(acc)
            }
        }
    }

    /// Draws one sensed feature vector `x~ = x + d` of class `class`.
    pub fn sample_features<R: Rng + ?Sized>(
        &self,
        sensing: &SensingConfig,
        class: usize,
        rng: &mut R,
    ) -> Result<Vec<Complex64>> {
        if class >= self.num_classes {
            return Err(Error::InvalidClass {
                index: class,
                num_classes: self.num_classes,
            });
        }
        let extra = sensing.noise_variance();
        Ok(self
            .mean(class)
            .iter()
            .zip(&self.variances)
            .map(|(&mu, &v)| {
                let std = ((v + extra) / 2.0).sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(mu + std * re, std * im)
            })
            .collect())
    }

    /// Draws a class label from the priors.
    pub fn sample_class<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (l, p) in self.priors.iter().enumerate() {
            acc += p;
            if u < acc {
                return l;
            }
        }
        // u landed in the rounding slack above the last cumulative prior
        self.priors
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.num_classes - 1)
    }

    fn require_pairs(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidModel(format!(
                "mean gaps need at least two classes, model has {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Serializes to the model-file schema (see [`FeatureModel::from_toml_str`]).
    pub fn to_toml_string(&self) -> String {
        let file = ModelFile {
            num_classes: self.num_classes,
            num_dims: self.num_dims,
            means: self.means.clone(),
            variances: self.variances.clone(),
            priors: self.priors.clone(),
        };
        let body = toml::to_string(&file).expect("model file is always serializable");
        format!("{MODEL_FILE_HEADER}{body}")
    }

    /// Parses a model file:
    ///
    /// ```toml
    /// num_classes = 2
    /// num_dims = 1
    /// means = [1.0, -1.0]   # row-major, num_classes x num_dims
    /// variances = [1.0]
    /// priors = [0.5, 0.5]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        Self::new(
            file.num_classes,
            file.num_dims,
            file.means,
            file.variances,
            file.priors,
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}

const MODEL_FILE_HEADER: &str = "\
# Gaussian-mixture feature model.
# means: row-major num_classes x num_dims; variances: per dimension; priors: per class.
";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    num_classes: usize,
    num_dims: usize,
    means: Vec<f64>,
    variances: Vec<f64>,
    priors: Vec<f64>,
}

/// Parameters of the synthetic model recipe.
///
/// Variances are log-uniform in `[variance_min, variance_max]`. Classes sit on
/// an equally spaced, zero-centred line in feature space (a PAM-like
/// constellation), with per-dimension orientation drawn at random. Adjacent
/// classes are `gap_m = r * q_m * sigma_m^2` apart on dimension `m`, where
/// `q_m = exp(ratio_jitter * z_m)` with `z_m` standard normal, and `r` is set so
/// that the adjacent-pair discriminant gain equals `pair_dg`. Per-dimension
/// gains `gap_m^2 / sigma_m^2` therefore spread over the same range as the
/// variances, while `gap_m / sigma_m^2` stays nearly uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisParams {
    pub num_classes: usize,
    pub num_dims: usize,
    pub seed: u64,
    pub variance_min: f64,
    pub variance_max: f64,
    pub ratio_jitter: f64,
    pub pair_dg: f64,
}

impl SynthesisParams {
    pub const DEFAULT_SEED: u64 = 7;

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::param("num_classes", "need at least 2 classes"));
        }
        if self.num_dims < 1 {
            return Err(Error::param("num_dims", "need at least 1 dimension"));
        }
        if !(self.variance_min > 0.0 && self.variance_min <= self.variance_max)
            || !self.variance_max.is_finite()
        {
            return Err(Error::param(
                "variance range",
                format!(
                    "need 0 < min <= max, got [{}, {}]",
                    self.variance_min, self.variance_max
                ),
            ));
        }
        if !(self.ratio_jitter >= 0.0 && self.ratio_jitter.is_finite()) {
            return Err(Error::param("ratio_jitter", "must be nonnegative"));
        }
        if !(self.pair_dg > 0.0 && self.pair_dg.is_finite()) {
            return Err(Error::param("pair_dg", "must be positive"));
        }
        Ok(())
    }
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            num_classes: 4,
            num_dims: 8,
            seed: Self::DEFAULT_SEED,
            variance_min: 0.25,
            variance_max: 4.0,
            ratio_jitter: 0.05,
            pair_dg: 8.0,
        }
    }
}

/// How per-dimension mean gaps are aggregated over class pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapMode {
    /// Gaps of the pair with the smallest discriminant gain.
    #[default]
    WorstPair,
    /// Mean squared gap over all unordered pairs.
    AveragePairs,
}

impl fmt::Display for GapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapMode::WorstPair => "worst_pair",
            GapMode::AveragePairs => "average_pairs",
        })
    }
}

impl FromStr for GapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst_pair" => Ok(GapMode::WorstPair),
            "average_pairs" => Ok(GapMode::AveragePairs),
            other => Err(Error::param(
                "gap_mode",
                format!("expected worst_pair or average_pairs, got `{other}`"),
            )),
        }
    }
}

/// Sensing front-end noise and power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingConfig {
    noise_power: f64,
    power: f64,
}

impl SensingConfig {
    pub fn new(noise_power: f64, power: f64) -> Result<Self> {
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::param(
                "sensing noise power",
                format!("must be positive, got {noise_power}"),
            ));
        }
        if !(power > 0.0) || power.is_nan() {
            return Err(Error::param(
                "sensing power",
                format!("must be positive, got {power}"),
            ));
        }
        Ok(Self { noise_power, power })
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// Per-dimension variance of the sensing noise after feature extraction.
    pub fn noise_variance(&self) -> f64 {
        self.noise_power / self.power
    }
}

/// Total power split between communication (`beta * P`) and sensing
/// (`(1 - beta) * P`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    total: f64,
    split: f64,
}

impl PowerBudget {
    pub fn new(total: f64, split: f64) -> Result<Self> {
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::param(
                "total power",
                format!("must be positive, got {total}"),
            ));
        }
        if !(0.0..=1.0).contains(&split) {
            return Err(Error::param(
                "beta",
                format!("allocation ratio must lie in [0, 1], got {split}"),
            ));
        }
        Ok(Self { total, split })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn split(&self) -> f64 {
        self.split
    }

    pub fn comm_power(&self) -> f64 {
        self.split * self.total
    }

    pub fn sensing_power(&self) -> f64 {
        self.total - self.comm_power()
    }

    /// Sensing configuration at this split; fails when no power is left for
    /// sensing.
    pub fn sensing(&self, noise_power: f64) -> Result<SensingConfig> {
        SensingConfig::new(noise_power, self.sensing_power())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class() -> FeatureModel {
        FeatureModel::with_uniform_priors(&[vec![1.0, 2.0], vec![-1.0, 0.0]], vec![1.0, 4.0])
            .unwrap()
    }

    #[test]
    fn effective_variance_examples() {
        let m = FeatureModel::with_uniform_priors(&[vec![0.0], vec![0.0]], vec![1.0]).unwrap();
        let s = SensingConfig::new(0.1, 1.0).unwrap();
        assert!((m.effective_variances(&s)[0] - 1.1).abs() < 1e-15);

        let s = SensingConfig::new(0.1, 1e300).unwrap();
        assert!((m.effective_variances(&s)[0] - 1.0).abs() < 1e-15);

        let m = FeatureModel::with_uniform_priors(&[vec![0.0], vec![0.0]], vec![0.5]).unwrap();
        let s = SensingConfig::new(0.1, 0.2).unwrap();
        assert!((m.effective_variances(&s)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sensing_rejects_nonpositive_power() {
        assert!(SensingConfig::new(0.1, 0.0).is_err());
        assert!(SensingConfig::new(0.1, -1.0).is_err());
        assert!(SensingConfig::new(0.0, 1.0).is_err());
    }

    #[test]
    fn second_moment_examples() {
        let m = FeatureModel::with_uniform_priors(&[vec![1.0], vec![-1.0]], vec![1.0]).unwrap();
        let s = SensingConfig::new(1e-300, 1e300).unwrap();
        assert!((m.feature_second_moments(&s)[0] - 2.0).abs() < 1e-15);

        let m = FeatureModel::with_uniform_priors(&[vec![0.0], vec![0.0]], vec![1.0]).unwrap();
        let s = SensingConfig::new(0.1, 1.0).unwrap();
        assert!((m.feature_second_moments(&s)[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn model_invariants_are_enforced() {
        assert!(FeatureModel::new(2, 1, vec![0.0, 1.0], vec![1.0], vec![0.5, 0.6]).is_err());
        assert!(FeatureModel::new(2, 1, vec![0.0, 1.0], vec![0.0], vec![0.5, 0.5]).is_err());
        assert!(FeatureModel::new(2, 1, vec![0.0, 1.0], vec![1.0], vec![1.5, -0.5]).is_err());
        assert!(FeatureModel::new(2, 2, vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(FeatureModel::new(2, 1, vec![0.0, 1.0], vec![1.0], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn gaps_for_two_classes_agree_across_modes() {
        let m = two_class();
        let worst = m.pairwise_mean_gaps(GapMode::WorstPair).unwrap();
        let avg = m.pairwise_mean_gaps(GapMode::AveragePairs).unwrap();
        assert_eq!(worst, vec![4.0, 4.0]);
        assert_eq!(worst, avg);
    }

    #[test]
    fn identical_classes_have_zero_gaps() {
        let m = FeatureModel::with_uniform_priors(
            &[vec![0.3, 1.0], vec![0.3, 1.0], vec![0.3, 1.0]],
            vec![1.0, 2.0],
        )
        .unwrap();
        for mode in [GapMode::WorstPair, GapMode::AveragePairs] {
            assert_eq!(m.pairwise_mean_gaps(mode).unwrap(), vec![0.0, 0.0]);
        }
        assert_eq!(m.worst_pair().unwrap(), (0, 1));
    }

    #[test]
    fn gaps_need_two_classes() {
        let m = FeatureModel::with_uniform_priors(&[vec![0.0]], vec![1.0]).unwrap();
        assert!(m.pairwise_mean_gaps(GapMode::WorstPair).is_err());
        assert!(m.pairwise_mean_gaps(GapMode::AveragePairs).is_err());
    }

    #[test]
    fn noiseless_limit_returns_class_mean() {
        let m =
            FeatureModel::with_uniform_priors(&[vec![1.5, -2.0], vec![0.0, 0.0]], vec![1e-300; 2])
                .unwrap();
        let s = SensingConfig::new(1e-300, 1e300).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = m.sample_features(&s, 0, &mut rng).unwrap();
        assert!((x[0] - Complex64::new(1.5, 0.0)).norm() < 1e-140);
        assert!((x[1] - Complex64::new(-2.0, 0.0)).norm() < 1e-140);
    }

    #[test]
    fn sampling_is_deterministic_and_checks_class() {
        let m = two_class();
        let s = SensingConfig::new(0.1, 1.0).unwrap();
        let a = m
            .sample_features(&s, 1, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
        let b = m
            .sample_features(&s, 1, &mut ChaCha8Rng::seed_from_u64(99))
            .unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            m.sample_features(&s, 2, &mut ChaCha8Rng::seed_from_u64(1)),
            Err(Error::InvalidClass { .. })
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let m = FeatureModel::synthesize(&SynthesisParams::default()).unwrap();
        let text = m.to_toml_string();
        assert_eq!(FeatureModel::from_toml_str(&text).unwrap(), m);
        assert!(FeatureModel::from_toml_str("num_classes = 2").is_err());
    }

    #[test]
    fn synthesized_model_matches_recipe() {
        let p = SynthesisParams::default();
        let m = FeatureModel::synthesize(&p).unwrap();
        assert_eq!((m.num_classes(), m.num_dims()), (4, 8));
        assert!(m.variances().iter().all(|&v| (0.25..=4.0).contains(&v)));
        // adjacent pairs are the closest ones and carry exactly `pair_dg`
        let (a, b) = m.worst_pair().unwrap();
        assert_eq!(b, a + 1);
        assert!((m.pair_dg(a, b) - p.pair_dg).abs() < 1e-9);
        assert!(SynthesisParams {
            num_classes: 1,
            ..p
        }
        .validate()
        .is_err());
    }

    #[test]
    fn budget_split() {
        let b = PowerBudget::new(2.0, 0.25).unwrap();
        assert_eq!(b.comm_power(), 0.5);
        assert_eq!(b.sensing_power(), 1.5);
        assert_eq!(b.comm_power() + b.sensing_power(), b.total());
        assert!(PowerBudget::new(1.0, 1.0).unwrap().sensing(0.1).is_err());
        assert!(PowerBudget::new(1.0, 1.2).is_err());
        assert!(PowerBudget::new(0.0, 0.5).is_err());
    }

    #[test]
    fn gap_mode_parses() {
        assert_eq!("worst_pair".parse::<GapMode>().unwrap(), GapMode::WorstPair);
        assert_eq!(
            GapMode::AveragePairs
                .to_string()
                .parse::<GapMode>()
                .unwrap(),
            GapMode::AveragePairs
        );
        assert!("min".parse::<GapMode>().is_err());
    }
}

//! Plug-in binary classification on top of the moving-grid estimator, and a
//! margin-assumption experiment harness.
//!
//! Excess risk is estimated with the disagreement identity
//! `l(h) = E[ |2 eta(X) - 1| 1{h(X) != h*(X)} ]`, so the Bayes classifier
//! scores exactly zero.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution};
use serde::{Deserialize, Serialize};

use crate::adapt::{balance_level, ResolutionGrid};
use crate::lattice::DesignSample;
use crate::regress::{EstimatorConfig, ThresholdPolicy};
use crate::scaling::ScalingBasis;
use crate::unknown_support::{split, AdaptiveMovingGrid, MovingGridEstimator};
use crate::{par, rng, Error, Result};

/// `1{eta_hat >= 1/2}`.
#[inline]
pub fn plug_in(eta_hat: f64) -> u8 {
    u8::from(eta_hat >= 0.5)
}

/// Behaviour of `eta` near the decision boundary `x_1 = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Margin {
    /// `eta(x) = 1/2 + sign(x_1 - 1/2) |2 x_1 - 1|^{1/theta} / 2`; `theta = 0`
    /// gives `eta = 1/2` almost everywhere.
    Exponent(f64),
    /// `eta` in `{0, 1}`: the `theta -> infinity` limit.
    Hard,
}

/// Regression function, uniform design on `[0,1]^d`, and labels for the
/// harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScenario {
    pub margin: Margin,
    /// Declared smoothness, a label for rate checks.
    pub smoothness: f64,
    pub dim: usize,
    /// Declared margin constant `C_*`.
    pub c_star: f64,
}

/// Scenario in which the margin condition holds with equality,
/// `P(0 < |2 eta(X) - 1| <= t) = t^theta` for `t <= 1`.
pub fn margin_scenario(theta: f64, smoothness: f64, dim: usize) -> Result<ClassificationScenario> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin exponent must be >= 0, got {theta}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let margin = if theta.is_infinite() { Margin::Hard } else { Margin::Exponent(theta) };
    Ok(ClassificationScenario { margin, smoothness, dim, c_star: 1.0 })
}

impl ClassificationScenario {
    pub fn theta(&self) -> f64 {
        match self.margin {
            Margin::Exponent(t) => t,
            Margin::Hard => f64::INFINITY,
        }
    }

    pub fn eta(&self, x: &[f64]) -> f64 {
        let u = 2.0 * x[0] - 1.0;
        let side = if u > 0.0 {
            1.0
        } else if u < 0.0 {
            -1.0
        } else {
            0.0
        };
        let magnitude = match self.margin {
            Margin::Hard => 1.0,
            Margin::Exponent(t) if t == 0.0 => 0.0,
            Margin::Exponent(t) => u.abs().powf(t.recip()),
        };
        0.5 + 0.5 * side * magnitude
    }

    pub fn bayes(&self, x: &[f64]) -> u8 {
        plug_in(self.eta(x))
    }

    /// `E |2 eta(X) - 1|` under the uniform design.
    pub fn mean_margin(&self) -> f64 {
        match self.margin {
            Margin::Hard => 1.0,
            Margin::Exponent(t) => t / (t + 1.0),
        }
    }

    /// Closed form of `P(0 < |2 eta(X) - 1| <= t)`.
    pub fn margin_mass(&self, t: f64) -> f64 {
        match self.margin {
            Margin::Hard => {
                if t >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Margin::Exponent(th) if th == 0.0 => 0.0,
            Margin::Exponent(th) => t.clamp(0.0, 1.0).powf(th),
        }
    }

    pub fn draw_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random::<f64>()).collect()
    }

    /// `n` labelled points, labels `Bernoulli(eta(X))`.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> DesignSample {
        let mut points = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.draw_point(rng);
            let p = self.eta(&x).clamp(0.0, 1.0);
            let y = Bernoulli::new(p).expect("probability in [0, 1]").sample(rng);
            points.extend_from_slice(&x);
            labels.push(if y { 1.0 } else { 0.0 });
        }
        DesignSample::new(self.dim, points, labels).expect("finite sample")
    }
}

/// Resolution used by the plug-in classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelChoice {
    Fixed(u32),
    /// `j_s` from the smoothness label and the half-sample size.
    Balanced(f64),
    Adaptive(ResolutionGrid),
}

/// Default `1/pi_0` of the classification setting.
pub const DEFAULT_INVERSE_PI0: f64 = 1e-3;

/// Estimator configuration of the classification setting: clamp at `M = 1`
/// and a constant threshold.
pub fn classification_config(order: usize, dim: usize, inverse_pi0: f64) -> EstimatorConfig {
    EstimatorConfig::new(order, dim)
        .with_policy(ThresholdPolicy::Fixed { inverse_pi: inverse_pi0 })
        .with_clamp(Some(1.0))
}

enum Inner {
    Fixed(MovingGridEstimator),
    Adaptive(AdaptiveMovingGrid),
}

/// `h(x) = 1{eta_maltese(x) >= 1/2}`.
pub struct PlugInClassifier {
    inner: Inner,
}

impl PlugInClassifier {
    pub fn classify_many(&self, points: &[Vec<f64>]) -> Result<Vec<u8>> {
        let values = match &self.inner {
            Inner::Fixed(e) => e.estimate_many(points)?,
            Inner::Adaptive(e) => e.estimate_many(points)?.0,
        };
        Ok(values.into_iter().map(plug_in).collect())
    }

    pub fn regressions(&self) -> usize {
        match &self.inner {
            Inner::Fixed(e) => e.regressions(),
            Inner::Adaptive(e) => e.regressions(),
        }
    }
}

/// Splits the `2n` labelled sample and builds the moving-grid plug-in
/// classifier. The clamp is forced to `M = 1`.
pub fn train_classifier(
    sample: &DesignSample,
    level: &LevelChoice,
    basis: &ScalingBasis,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<PlugInClassifier> {
    if let Some(bad) = sample.responses().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument(format!("labels must be 0 or 1, found {bad}")));
    }
    let config = config.clone().with_clamp(Some(1.0));
    let halves = split(sample, seed)?;
    let n = halves.fit.len();
    let inner = match level {
        LevelChoice::Fixed(j) => Inner::Fixed(MovingGridEstimator::new(halves, basis.clone(), *j, &config)?),
        LevelChoice::Balanced(s) => {
            if n < 2 {
                return Err(Error::Config(format!("half sample of size {n} admits no resolution level")));
            }
            let j = balance_level(n, *s, config.dim);
            Inner::Fixed(MovingGridEstimator::new(halves, basis.clone(), j, &config)?)
        }
        LevelChoice::Adaptive(grid) => Inner::Adaptive(AdaptiveMovingGrid::new(&halves, basis, grid.clone(), &config)?),
    };
    Ok(PlugInClassifier { inner })
}

/// Monte-Carlo excess risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub excess_risk: f64,
    pub stderr: f64,
    pub probes: usize,
    pub n_train: usize,
}

/// Excess risk of `labels` (the classifier applied to the probe points)
/// against the Bayes rule, over `m` uniform probes drawn from `seed`.
pub fn excess_risk_mc(
    classifier: impl Fn(&[Vec<f64>]) -> Result<Vec<u8>>,
    scenario: &ClassificationScenario,
    m: usize,
    seed: u64,
    n_train: usize,
) -> Result<RiskReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("excess risk needs m >= 1 probes".into()));
    }
    let mut probe_rng = rng::stream(seed, u64::MAX);
    let probes: Vec<Vec<f64>> = (0..m).map(|_| scenario.draw_point(&mut probe_rng)).collect();
    let labels = classifier(&probes)?;
    let terms: Vec<f64> = probes
        .iter()
        .zip(&labels)
        .map(|(x, &h)| {
            if h == scenario.bayes(x) {
                0.0
            } else {
                (2.0 * scenario.eta(x) - 1.0).abs()
            }
        })
        .collect();
    let mean = terms.iter().sum::<f64>() / m as f64;
    let var = if m > 1 {
        terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1) as f64
    } else {
        0.0
    };
    Ok(RiskReport { excess_risk: mean, stderr: (var / m as f64).sqrt(), probes: m, n_train })
}

/// One row of the margin experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    /// Size of each half of the training sample.
    pub n: usize,
    pub theta: f64,
    pub s: f64,
    pub median_excess_risk: f64,
    /// Normal-approximation standard error of the median over repetitions.
    pub stderr: f64,
    pub seed_base: u64,
}

pub const RISK_CSV_HEADER: &str = "n,theta,s,median_excess_risk,stderr,seed_base";

impl RiskRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.n, self.theta, self.s, self.median_excess_risk, self.stderr, self.seed_base
        )
    }
}

/// Settings of [`margin_experiment`].
#[derive(Debug, Clone)]
pub struct MarginExperiment {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub probes: usize,
    pub level: LevelChoice,
    pub seed: u64,
}

/// For every half-sample size `n`, trains `reps` classifiers on fresh `2n`
/// samples and reports the median excess risk.
pub fn margin_experiment(
    scenario: &ClassificationScenario,
    basis: &ScalingBasis,
    config: &EstimatorConfig,
    setup: &MarginExperiment,
) -> Result<Vec<RiskRow>> {
    if setup.reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    setup
        .sizes
        .iter()
        .enumerate()
        .map(|(size_index, &n)| {
            let jobs: Vec<u64> = (0..setup.reps as u64).collect();
            let risks = par::map_collect(&jobs, |&rep| -> Result<f64> {
                let stream = ((size_index as u64) << 32) | rep;
                let mut rng = rng::stream(setup.seed, stream);
                let sample = scenario.sample(2 * n, &mut rng);
                let h = train_classifier(&sample, &setup.level, basis, config, rng.random())?;
                let report = excess_risk_mc(|p| h.classify_many(p), scenario, setup.probes, rng.random(), n)?;
                Ok(report.excess_risk)
            })
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
            let median = crate::simulate::median(&risks);
            let mean = risks.iter().sum::<f64>() / risks.len() as f64;
            let sd = (risks.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (risks.len().max(2) - 1) as f64).sqrt();
            Ok(RiskRow {
                n,
                theta: scenario.theta(),
                s: scenario.smoothness,
                median_excess_risk: median,
                stderr: 1.2533 * sd / (risks.len() as f64).sqrt(),
                seed_base: setup.seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plug_in_convention() {
        assert_eq!(plug_in(0.5), 1);
        assert_eq!(plug_in(0.49), 0);
        assert!((0..10).map(|i| plug_in(0.0 * i as f64)).all(|l| l == 0));
    }

    #[test]
    fn plug_in_invariant_under_level_preserving_maps() {
        for &v in &[0.0, 0.2, 0.4999, 0.5, 0.51, 0.9, 1.3] {
            for a in [0.1, 1.0, 7.0] {
                assert_eq!(plug_in(v), plug_in(a * (v - 0.5) + 0.5));
            }
        }
    }

    #[test]
    fn margin_mass_closed_forms() {
        let s1 = margin_scenario(1.0, 1.0, 1).unwrap();
        let s2 = margin_scenario(2.0, 1.0, 1).unwrap();
        // Monte-Carlo over a fine midpoint grid of x
        let grid: Vec<f64> = (0..200_000).map(|i| (i as f64 + 0.5) / 200_000.0).collect();
        for t in [0.1, 0.37, 0.8] {
            for sc in [&s1, &s2] {
                let freq = grid
                    .iter()
                    .filter(|&&x| {
                        let m = (2.0 * sc.eta(&[x]) - 1.0).abs();
                        m > 0.0 && m <= t
                    })
                    .count() as f64
                    / grid.len() as f64;
                assert!((freq - sc.margin_mass(t)).abs() < 1e-4, "t={t} freq={freq}");
            }
        }
        assert_eq!(s1.eta(&[0.3]), 0.3);
        let hard = margin_scenario(f64::INFINITY, 1.0, 1).unwrap();
        assert_eq!(hard.eta(&[0.7]), 1.0);
        assert_eq!(hard.eta(&[0.2]), 0.0);
    }

    #[test]
    fn bayes_scores_zero() {
        let sc = margin_scenario(1.0, 1.0, 1).unwrap();
        for seed in 0..5 {
            let r = excess_risk_mc(|p| Ok(p.iter().map(|x| sc.bayes(x)).collect()), &sc, 1000, seed, 0).unwrap();
            assert_eq!(r.excess_risk, 0.0);
        }
    }

    #[test]
    fn anti_bayes_scores_mean_margin() {
        let sc = margin_scenario(1.0, 1.0, 1).unwrap();
        let r = excess_risk_mc(|p| Ok(p.iter().map(|x| 1 - sc.bayes(x)).collect()), &sc, 20_000, 3, 0).unwrap();
        assert!((r.excess_risk - sc.mean_margin()).abs() <= 3.0 * r.stderr);
    }

    #[test]
    fn flat_eta_gives_zero_for_any_classifier() {
        let sc = margin_scenario(0.0, 1.0, 1).unwrap();
        let r = excess_risk_mc(|p| Ok(p.iter().map(|x| u8::from(x[0] > 0.3)).collect()), &sc, 500, 1, 0).unwrap();
        assert_eq!(r.excess_risk, 0.0);
        assert!(excess_risk_mc(|_| Ok(vec![]), &sc, 0, 1, 0).is_err());
    }

    #[test]
    fn rejects_non_binary_labels() {
        let s = DesignSample::from_1d(vec![0.1, 0.2], vec![0.0, 0.5]).unwrap();
        let err = train_classifier(&s, &LevelChoice::Fixed(2), &ScalingBasis::haar(), &classification_config(1, 1, 0.5), 1);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn all_ones_gives_one_on_anchored_region() {
        let mut rng = rng::stream(5, 0);
        let x: Vec<f64> = (0..400).map(|_| rng.random::<f64>()).collect();
        let s = DesignSample::from_1d(x, vec![1.0; 400]).unwrap();
        let h = train_classifier(&s, &LevelChoice::Fixed(3), &ScalingBasis::haar(), &classification_config(1, 1, 0.05), 2).unwrap();
        let probes: Vec<Vec<f64>> = (1..50).map(|i| vec![i as f64 / 50.0]).collect();
        assert!(h.classify_many(&probes).unwrap().iter().all(|&l| l == 1));
    }

    #[test]
    fn threshold_labels_are_learned() {
        let sc = ClassificationScenario { margin: Margin::Hard, smoothness: 1.0, dim: 1, c_star: 1.0 };
        let mut errors = Vec::new();
        for rep in 0..20 {
            let mut rng = rng::stream(77, rep);
            let s = sc.sample(4000, &mut rng);
            let h = train_classifier(&s, &LevelChoice::Fixed(4), &ScalingBasis::haar(), &classification_config(1, 1, 0.05), rep).unwrap();
            // hold-out away from the boundary cell
            let probes: Vec<Vec<f64>> = (0..1000)
                .map(|_| rng.random::<f64>())
                .filter(|x| (x - 0.5).abs() > 1.0 / 16.0)
                .map(|x| vec![x])
                .collect();
            let labels = h.classify_many(&probes).unwrap();
            let wrong = probes.iter().zip(&labels).filter(|(x, &l)| l != sc.bayes(x)).count();
            errors.push(wrong as f64 / probes.len() as f64);
        }
        assert!(crate::simulate::median(&errors) < 0.05);
    }
}

//! Benchmark study: random piecewise design, snapped and deduplicated
//! samples, SNR-scaled benchmark signals, adaptive fits and median relative
//! RMSE over repetitions.

pub mod design;
pub mod lpe;
pub mod signals;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use design::{random_density, sample_design, snap, PiecewiseDensity};
pub use lpe::{lpe_baseline, LpeResult};
pub use signals::{benchmark_signal, grid_sup, scale_snr, Benchmark, SignalSpec};

use crate::adapt::{adaptive_estimate, resolution_grid, LowerLevel, UpperLevel};
use crate::lattice::DesignSample;
use crate::regress::{EstimatorConfig, Fallback, ThresholdPolicy};
use crate::scaling::ScalingBasis;
use crate::{par, rng, Error, Result};

/// Smallest threshold the empirical rule returns; eigenvalues below it are
/// numerically zero.
pub const EMPIRICAL_FLOOR: f64 = 1e-9;

/// Type-7 quantile of `values` (linear interpolation between order
/// statistics).
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Median; the mean of the two middle values for even lengths. `NaN` when
/// empty.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5).unwrap_or(f64::NAN)
}

/// First decile of the `lambda_min` values of the non-singular cells.
/// Numerically singular systems (`lambda_min <= EMPIRICAL_FLOOR`) are left
/// out, since they are invalid under any threshold; if every cell is
/// singular the floor itself is returned.
pub fn empirical_pi_n(lambdas: &[f64]) -> Result<f64> {
    if lambdas.is_empty() {
        return Err(Error::Config("empirical threshold needs at least one fitted cell".into()));
    }
    let regular: Vec<f64> = lambdas.iter().copied().filter(|&l| l > EMPIRICAL_FLOOR).collect();
    Ok(quantile(&regular, 0.1).unwrap_or(EMPIRICAL_FLOOR))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    /// Standard normal truncated to `[-k, k]`, then scaled by `sigma`.
    Truncated { k: f64 },
    /// No noise; the signal is still scaled with the nominal `sigma`.
    None,
}

/// Everything that determines a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub signal: String,
    pub reps: usize,
    pub order: usize,
    pub seed: u64,
    pub n_raw: usize,
    pub grid_exp: u32,
    pub sigma: f64,
    pub snr: f64,
    pub noise: NoiseKind,
    pub j_low: u32,
    /// `None` picks the practical rule `ceil(log2(n / log10 n))`.
    pub j_high: Option<u32>,
    pub kappa: f64,
    pub policy: ThresholdPolicy,
    pub fallback: Fallback,
    /// Record wall time per trial; off for byte-identical reruns.
    pub timing: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            signal: "heavisine".into(),
            reps: 100,
            order: 3,
            seed: 1,
            n_raw: 3000,
            grid_exp: 15,
            sigma: 1.0,
            snr: 7.0,
            noise: NoiseKind::Gaussian,
            j_low: 3,
            j_high: None,
            kappa: DEFAULT_STUDY_KAPPA,
            policy: ThresholdPolicy::EmpiricalDecile,
            fallback: Fallback::DemoteLevel,
            timing: true,
        }
    }
}

/// Lepski constant of the benchmark study. The empirical threshold puts
/// `pi_n` near `1e8` for `r = 3`, so `kappa pi_n^2` is of order one.
pub const DEFAULT_STUDY_KAPPA: f64 = 1e-15;

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        if !(self.sigma > 0.0) || !(self.snr > 0.0) || !(self.kappa > 0.0) {
            return Err(Error::Config("sigma, snr and kappa must be positive".into()));
        }
        if self.n_raw < 16 {
            return Err(Error::Config(format!("n_raw = {} is too small", self.n_raw)));
        }
        if let Some(j) = self.j_high {
            if j < self.j_low {
                return Err(Error::Config(format!("j_high = {j} < j_low = {}", self.j_low)));
            }
        }
        EstimatorConfig::new(self.order, 1).with_policy(self.policy).validate()
    }

    pub fn resolve_signal(&self) -> Result<SignalSpec> {
        scale_snr(&benchmark_signal(&self.signal)?, self.grid_exp, self.sigma, self.snr)
    }

    fn draw_noise<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        match self.noise {
            NoiseKind::Gaussian => self.sigma * Distribution::<f64>::sample(&StandardNormal, rng),
            NoiseKind::Truncated { k } => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= k {
                    break self.sigma * z;
                }
            },
            NoiseKind::None => 0.0,
        }
    }
}

/// Per-trial outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub signal: String,
    pub n_effective: usize,
    pub rel_rmse: f64,
    /// Relative RMSE of each fixed level of the range.
    pub fixed_rel_rmse: BTreeMap<u32, f64>,
    /// Number of sample points at which each level was used.
    pub level_histogram: BTreeMap<u32, usize>,
    pub regressions: BTreeMap<u32, usize>,
    pub regressions_total: usize,
    pub inverse_pi: f64,
    pub seed: u64,
    pub seconds: f64,
}

/// Sample and fitted values of one trial, for the point dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPoints {
    pub x: Vec<f64>,
    pub y_true: Vec<f64>,
    pub y_noisy: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub j_at: Vec<u32>,
}

/// Shared state of a study: the density drawn once and the scaled signal.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    pub density: PiecewiseDensity,
    pub signal: SignalSpec,
    pub basis: ScalingBasis,
    sup: f64,
}

impl Study {
    pub fn new(config: StudyConfig) -> Result<Self> {
        config.validate()?;
        let signal = config.resolve_signal()?;
        let density = random_density(config.seed);
        let basis = if config.order == 1 {
            ScalingBasis::haar()
        } else {
            ScalingBasis::new(config.order, crate::scaling::DEFAULT_DEPTH)?
        };
        let sup = grid_sup(&signal, config.grid_exp);
        Ok(Self { config, density, signal, basis, sup })
    }

    /// Trial `index`; its randomness comes from stream `index + 1` of the
    /// study seed.
    pub fn run_trial(&self, index: usize) -> Result<(TrialReport, TrialPoints)> {
        let cfg = &self.config;
        // no clock is read unless asked, so the study also runs in a browser
        let start = cfg.timing.then(Instant::now);
        let mut rng = rng::stream(cfg.seed, index as u64 + 1);
        let x = sample_design(&self.density, cfg.n_raw, cfg.grid_exp, &mut rng);
        let y_true: Vec<f64> = x.iter().map(|&t| self.signal.eval(t)).collect();
        let y_noisy: Vec<f64> = y_true.iter().map(|v| v + cfg.draw_noise(&mut rng)).collect();
        let sample = DesignSample::from_1d(x.clone(), y_noisy.clone())?;
        let n = sample.len();

        let upper = cfg.j_high.map_or(UpperLevel::Practical, UpperLevel::Fixed);
        let grid = resolution_grid(n, 1, cfg.order, cfg.kappa, 1.0, LowerLevel::Fixed(cfg.j_low), upper)?;
        let est_cfg = EstimatorConfig::new(cfg.order, 1)
            .with_policy(cfg.policy)
            .with_kappa(cfg.kappa)
            .with_fallback(cfg.fallback);
        let estimator = adaptive_estimate(&sample, &grid, &self.basis, &est_cfg)?;
        let points = estimator.evaluate_many(&self.basis, sample.points());
        let eta_hat: Vec<f64> = points.iter().map(|p| p.value).collect();
        let j_at: Vec<u32> = points.iter().map(|p| p.level).collect();

        let rel = |est: &[f64]| -> f64 {
            let mse = est.iter().zip(&y_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
            mse.sqrt() / self.sup
        };
        let mut fixed_rel_rmse = BTreeMap::new();
        let mut regressions = BTreeMap::new();
        for j in estimator.grid.levels() {
            let table = estimator.table(j).expect("level in range");
            let values: Vec<f64> = sample.points().map(|p| table.evaluate(&self.basis, p)).collect();
            fixed_rel_rmse.insert(j, rel(&values));
            regressions.insert(j, table.regressions());
        }
        let mut level_histogram = BTreeMap::new();
        for &j in &j_at {
            *level_histogram.entry(j).or_insert(0) += 1;
        }
        let report = TrialReport {
            trial: index,
            signal: self.signal.name().to_string(),
            n_effective: n,
            rel_rmse: rel(&eta_hat),
            fixed_rel_rmse,
            level_histogram,
            regressions_total: estimator.regressions(),
            regressions,
            inverse_pi: estimator.inverse_pi,
            seed: cfg.seed,
            seconds: start.map_or(0.0, |t| t.elapsed().as_secs_f64()),
        };
        Ok((report, TrialPoints { x, y_true, y_noisy, eta_hat, j_at }))
    }
}

/// Study summary written next to the per-trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub config: StudyConfig,
    pub density: PiecewiseDensity,
    pub signal_scale: f64,
    pub median_trial: usize,
    pub median_rel_rmse: f64,
    /// Median over trials of each fixed level's relative RMSE.
    pub fixed_median_rel_rmse: BTreeMap<u32, f64>,
    pub best_fixed_level: u32,
    pub best_fixed_rel_rmse: f64,
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub trials: Vec<TrialReport>,
    pub summary: StudySummary,
    pub median_points: TrialPoints,
}

/// Runs every trial (in parallel when enabled) and reduces to the median.
/// The median trial is the one of rank `floor((reps - 1) / 2)` by relative
/// RMSE, ties broken by trial index.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    let study = Study::new(config.clone())?;
    let indices: Vec<usize> = (0..config.reps).collect();
    let trials = par::map_collect(&indices, |&i| study.run_trial(i).map(|(r, _)| r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut ranked: Vec<&TrialReport> = trials.iter().collect();
    ranked.sort_by(|a, b| a.rel_rmse.total_cmp(&b.rel_rmse).then(a.trial.cmp(&b.trial)));
    let median_trial = ranked[(ranked.len() - 1) / 2].trial;
    let (_, median_points) = study.run_trial(median_trial)?;

    let mut per_level: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for t in &trials {
        for (&j, &v) in &t.fixed_rel_rmse {
            per_level.entry(j).or_default().push(v);
        }
    }
    let fixed_median_rel_rmse: BTreeMap<u32, f64> = per_level.iter().map(|(&j, v)| (j, median(v))).collect();
    let (best_fixed_level, best_fixed_rel_rmse) = fixed_median_rel_rmse
        .iter()
        .map(|(&j, &v)| (j, v))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((config.j_low, f64::NAN));
    let levels = trials[median_trial].fixed_rel_rmse.keys().copied().collect();
    let summary = StudySummary {
        config: config.clone(),
        density: study.density.clone(),
        signal_scale: study.signal.scale(),
        median_trial,
        median_rel_rmse: trials[median_trial].rel_rmse,
        fixed_median_rel_rmse,
        best_fixed_level,
        best_fixed_rel_rmse,
        levels,
    };
    Ok(StudyResult { trials, summary, median_points })
}

pub const TRIALS_CSV_HEADER: &str = "trial,n_effective,rel_rmse,seconds,regressions_total";

pub fn write_trials_csv<W: Write>(mut w: W, trials: &[TrialReport]) -> std::io::Result<()> {
    writeln!(w, "{TRIALS_CSV_HEADER}")?;
    for t in trials {
        writeln!(w, "{},{},{},{},{}", t.trial, t.n_effective, t.rel_rmse, t.seconds, t.regressions_total)?;
    }
    Ok(())
}

pub fn write_point_dump<W: Write>(mut w: W, p: &TrialPoints) -> std::io::Result<()> {
    writeln!(w, "x,y_true,y_noisy,eta_hat,j_at")?;
    for i in 0..p.x.len() {
        writeln!(w, "{},{},{},{},{}", p.x[i], p.y_true[i], p.y_noisy[i], p.eta_hat[i], p.j_at[i])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decile_convention() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((empirical_pi_n(&v).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(empirical_pi_n(&[0.3; 7]).unwrap(), 0.3);
        assert!(matches!(empirical_pi_n(&[]), Err(Error::Config(_))));
        assert_eq!(empirical_pi_n(&[0.0; 4]).unwrap(), EMPIRICAL_FLOOR);
        let mut with_singular = v.clone();
        with_singular.extend([0.0, 1e-14]);
        assert!((empirical_pi_n(&with_singular).unwrap() - 1.9).abs() < 1e-12);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[5.0]), 5.0);
    }

    fn small(signal: &str) -> StudyConfig {
        StudyConfig { signal: signal.into(), reps: 3, seed: 5, timing: false, ..StudyConfig::default() }
    }

    #[test]
    fn study_is_deterministic() {
        let a = run_study(&small("blocks")).unwrap();
        let b = run_study(&small("blocks")).unwrap();
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn single_rep_median_is_that_trial() {
        let cfg = StudyConfig { reps: 1, ..small("doppler") };
        let r = run_study(&cfg).unwrap();
        assert_eq!(r.summary.median_trial, 0);
        assert_eq!(r.summary.median_rel_rmse, r.trials[0].rel_rmse);
    }

    #[test]
    fn benchmark_range_is_three_to_ten() {
        let r = run_study(&StudyConfig { reps: 1, ..small("heavisine") }).unwrap();
        assert_eq!(r.summary.levels, (3..=10).collect::<Vec<_>>());
        let t = &r.trials[0];
        assert!(t.n_effective <= 3000 && t.n_effective > 2700);
        for (&j, &count) in &t.regressions {
            assert!(count <= (1usize << j).min(t.n_effective));
        }
    }

    #[test]
    fn noiseless_beats_noisy() {
        let base = StudyConfig { signal: "blocks".into(), reps: 1, seed: 2, timing: false, j_low: 8, j_high: Some(8), ..StudyConfig::default() };
        let noisy = run_study(&base).unwrap();
        let clean = run_study(&StudyConfig { noise: NoiseKind::None, ..base }).unwrap();
        assert!(clean.summary.median_rel_rmse < noisy.summary.median_rel_rmse);
    }

    #[test]
    fn csv_outputs() {
        let r = run_study(&StudyConfig { reps: 2, ..small("bumps") }).unwrap();
        let mut buf = Vec::new();
        write_trials_csv(&mut buf, &r.trials).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(TRIALS_CSV_HEADER));
        assert_eq!(text.lines().count(), 3);
        let mut dump = Vec::new();
        write_point_dump(&mut dump, &r.median_points).unwrap();
        assert_eq!(String::from_utf8(dump).unwrap().lines().count(), r.median_points.x.len() + 1);
    }
}

//! Subcommand arguments and implementations.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::config::{
    parse_fallback, parse_level_range, parse_list, parse_policy, positive, prepare_out_dir, required, resolve,
    stringish, write_atomic, write_json_atomic,
};
use super::CliError;
use crate::adapt::{adaptive_estimate, resolution_grid, write_level_map, LowerLevel, ResolutionGrid, UpperLevel};
use crate::bounds::{deviation_bound, eig_tail, maltese_deviation_bound, monte_carlo_frequencies, BoundParams, NoiseModel};
use crate::classify::{classification_config, margin_experiment, margin_scenario, LevelChoice, MarginExperiment, RISK_CSV_HEADER};
use crate::lattice::DesignSample;
use crate::regress::{self, EstimatorConfig, ThresholdPolicy};
use crate::scaling::{ScalingBasis, DEFAULT_DEPTH};
use crate::simulate::{self, lpe_baseline, NoiseKind, Study, StudyConfig};
use crate::unknown_support::{split, MovingGridEstimator};

type FileConfig<'a> = Option<&'a Map<String, Value>>;

fn basis_for(order: usize) -> Result<ScalingBasis, CliError> {
    Ok(if order == 1 { ScalingBasis::haar() } else { ScalingBasis::new(order, DEFAULT_DEPTH)? })
}

/// Reads a CSV dataset with header `x1,...,xd,y`.
pub fn read_dataset(path: &Path) -> Result<DesignSample, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: bad header: {e}", path.display())))?
        .clone();
    let cols = headers.len();
    if cols < 2 {
        return Err(CliError::Usage(format!("{}: expected columns x1,...,xd,y", path.display())));
    }
    let d = cols - 1;
    for (i, h) in headers.iter().enumerate() {
        let want = if i == d { "y".to_string() } else { format!("x{}", i + 1) };
        if h.trim() != want {
            return Err(CliError::Usage(format!("{}: column {} is '{h}', expected '{want}'", path.display(), i + 1)));
        }
    }
    let mut points = Vec::new();
    let mut y = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Usage(format!("{}: row {}: {e}", path.display(), row + 2)))?;
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: row {}: '{field}' is not a number", path.display(), row + 2)))?;
            if i == d {
                y.push(v);
            } else {
                points.push(v);
            }
        }
    }
    Ok(DesignSample::new(d, points, y)?)
}

fn coordinate_header(d: usize) -> String {
    (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

fn coordinates(x: &[f64]) -> String {
    x.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn echo_config(out: &Path, resolved: &Value) -> Result<(), CliError> {
    write_json_atomic(&out.join("config.resolved.json"), resolved)
}

fn estimator_config(
    order: usize,
    dim: usize,
    policy: ThresholdPolicy,
    kappa: f64,
    clamp: Option<f64>,
    fallback: &str,
) -> Result<EstimatorConfig, CliError> {
    let config = EstimatorConfig::new(order, dim)
        .with_policy(policy)
        .with_kappa(positive(kappa, "kappa")?)
        .with_clamp(clamp)
        .with_fallback(parse_fallback(fallback)?);
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EstimateArgs {
    /// CSV dataset with header x1,...,xd,y.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub data: Option<String>,
    /// Output directory.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    /// Scaling-function order.
    #[arg(long)]
    pub r: Option<usize>,
    /// Resolution level.
    #[arg(long)]
    pub j: Option<u32>,
    /// theory | density-floor | decile | fixed.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub policy: Option<String>,
    #[arg(long)]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub inverse_pi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Truncation level M.
    #[arg(long)]
    pub clamp: Option<f64>,
    /// zero | demote-level | neighbor-average.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub fallback: Option<String>,
}

pub fn estimate(flags: &EstimateArgs, file: FileConfig) -> Result<(), CliError> {
    let defaults = json!({"r": 1, "j": 3, "policy": "theory", "kappa": 1.0, "fallback": "zero"});
    let (a, resolved) = resolve(flags, file, defaults)?;
    let data = required(a.data, "data")?;
    let out = required(a.out, "out")?;
    let order = a.r.unwrap_or(1);
    let j = a.j.unwrap_or(3);
    let policy = parse_policy(a.policy.as_deref().unwrap_or("theory"), a.g_min, a.inverse_pi)?;
    let kappa = a.kappa.unwrap_or(1.0);
    let fallback = a.fallback.unwrap_or_else(|| "zero".into());
    let sample = read_dataset(Path::new(&data))?;
    let config = estimator_config(order, sample.dim(), policy, kappa, a.clamp, &fallback)?;
    let basis = basis_for(order)?;
    let table = regress::estimate(&sample, j, &basis, &config)?;

    let out = prepare_out_dir(Path::new(&out))?;
    write_atomic(&out.join("fits.json"), table.to_json()?.as_bytes())?;
    let mut csv = format!("{},eta_hat,valid\n", coordinate_header(sample.dim()));
    for x in sample.points() {
        let _ = writeln!(csv, "{},{},{}", coordinates(x), table.evaluate(&basis, x), table.is_valid_at(x));
    }
    write_atomic(&out.join("predictions.csv"), csv.as_bytes())?;
    echo_config(&out, &resolved)?;
    let valid = table.fits.values().filter(|f| f.valid).count();
    println!("level {j}: {} regressions, {valid} valid, 1/pi_n = {}", table.regressions(), table.inverse_pi);
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AdaptArgs {
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub data: Option<String>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Level range: `a..b`, `a..auto` (practical top level) or `auto`
    /// (balance level of r to the theoretical top level).
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub j: Option<String>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub policy: Option<String>,
    #[arg(long)]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub inverse_pi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub fallback: Option<String>,
}

/// Level range from its textual form.
pub fn level_grid(text: &str, n: usize, dim: usize, order: usize, kappa: f64, pi_n: f64) -> Result<ResolutionGrid, CliError> {
    let text = text.trim();
    let (lower, upper) = if text == "auto" {
        (LowerLevel::KnownR, UpperLevel::Theory)
    } else if let Some(lo) = text.strip_suffix("..auto") {
        let lo: u32 = lo.trim().parse().map_err(|_| CliError::Usage(format!("invalid level range '{text}'")))?;
        (LowerLevel::Fixed(lo), UpperLevel::Practical)
    } else {
        let r = parse_level_range(text)?;
        (LowerLevel::Fixed(*r.start()), UpperLevel::Fixed(*r.end()))
    };
    Ok(resolution_grid(n, dim, order, kappa, pi_n, lower, upper)?)
}

pub fn adapt(flags: &AdaptArgs, file: FileConfig) -> Result<(), CliError> {
    let defaults = json!({"r": 1, "j": "3..auto", "policy": "theory", "kappa": 1.0, "fallback": "demote-level"});
    let (a, resolved) = resolve(flags, file, defaults)?;
    let data = required(a.data, "data")?;
    let out = required(a.out, "out")?;
    let order = a.r.unwrap_or(1);
    let policy = parse_policy(a.policy.as_deref().unwrap_or("theory"), a.g_min, a.inverse_pi)?;
    let kappa = positive(a.kappa.unwrap_or(1.0), "kappa")?;
    let sample = read_dataset(Path::new(&data))?;
    let config = estimator_config(order, sample.dim(), policy, kappa, a.clamp, a.fallback.as_deref().unwrap_or("zero"))?;
    // the decile policy replaces pi_n once the eigenvalues are known
    let pi_n = match policy {
        ThresholdPolicy::EmpiricalDecile => 1.0,
        p => p.inverse_pi(sample.len(), &[])?.recip(),
    };
    let grid = level_grid(a.j.as_deref().unwrap_or("3..auto"), sample.len(), sample.dim(), order, kappa, pi_n)?;
    let basis = basis_for(order)?;
    let estimator = adaptive_estimate(&sample, &grid, &basis, &config)?;
    let fitted = estimator.evaluate_many(&basis, sample.points());

    let out = prepare_out_dir(Path::new(&out))?;
    let mut csv = format!("{},eta_hat,j_at\n", coordinate_header(sample.dim()));
    for (x, p) in sample.points().zip(&fitted) {
        let _ = writeln!(csv, "{},{},{}", coordinates(x), p.value, p.level);
    }
    write_atomic(&out.join("predictions.csv"), csv.as_bytes())?;
    let points: Vec<Vec<f64>> = sample.points().map(<[f64]>::to_vec).collect();
    let levels: Vec<u32> = fitted.iter().map(|p| p.level).collect();
    let mut map = Vec::new();
    write_level_map(&mut map, &points, &levels).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("levels.csv"), &map)?;
    let regressions: Map<String, Value> = estimator
        .grid
        .levels()
        .map(|j| (j.to_string(), json!(estimator.table(j).map_or(0, |t| t.regressions()))))
        .collect();
    let summary = json!({
        "n": sample.len(),
        "j_low": estimator.grid.j_low,
        "j_high": estimator.grid.j_high,
        "inverse_pi": estimator.inverse_pi,
        "t_n": estimator.grid.t_n,
        "regressions": regressions,
        "regressions_total": estimator.regressions(),
    });
    write_json_atomic(&out.join("summary.json"), &summary)?;
    echo_config(&out, &resolved)?;
    println!(
        "levels {}..{}: {} regressions, 1/pi_n = {}",
        estimator.grid.j_low,
        estimator.grid.j_high,
        estimator.regressions(),
        estimator.inverse_pi
    );
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MalteseArgs {
    /// CSV dataset of even size; it is split in two halves.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub data: Option<String>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub j: Option<u32>,
    /// theory | density-floor | fixed.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub policy: Option<String>,
    #[arg(long)]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub inverse_pi: Option<f64>,
    #[arg(long)]
    pub clamp: Option<f64>,
    /// Split seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `data` to evaluate at the dataset points, or `N` for an N-per-axis
    /// grid of cell midpoints on the unit cube.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub eval: Option<String>,
}

fn midpoint_grid(per_axis: usize, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let total = (per_axis as u128).pow(dim as u32);
    if per_axis == 0 || total > 4_000_000 {
        return Err(CliError::Usage(format!("evaluation grid of {per_axis}^{dim} points is out of range")));
    }
    Ok((0..total as usize)
        .map(|mut flat| {
            let mut x = vec![0.0; dim];
            for xi in x.iter_mut().rev() {
                *xi = ((flat % per_axis) as f64 + 0.5) / per_axis as f64;
                flat /= per_axis;
            }
            x
        })
        .collect())
}

pub fn maltese(flags: &MalteseArgs, file: FileConfig) -> Result<(), CliError> {
    let defaults = json!({"r": 1, "j": 3, "policy": "theory", "seed": 1, "eval": "data"});
    let (a, resolved) = resolve(flags, file, defaults)?;
    let data = required(a.data, "data")?;
    let out = required(a.out, "out")?;
    let order = a.r.unwrap_or(1);
    let policy_name = a.policy.unwrap_or_else(|| "theory".into());
    if policy_name == "decile" {
        return Err(CliError::Usage("the moving-grid estimator needs theory, density-floor or fixed".into()));
    }
    let policy = parse_policy(&policy_name, a.g_min, a.inverse_pi)?;
    let sample = read_dataset(Path::new(&data))?;
    let config = estimator_config(order, sample.dim(), policy, 1.0, a.clamp, "zero")?;
    let halves = split(&sample, a.seed.unwrap_or(1))?;
    let estimator = MovingGridEstimator::new(halves, basis_for(order)?, a.j.unwrap_or(3), &config)?;
    let points: Vec<Vec<f64>> = match a.eval.as_deref().unwrap_or("data") {
        "data" => sample.points().map(<[f64]>::to_vec).collect(),
        other => {
            let per_axis: usize = other
                .parse()
                .map_err(|_| CliError::Usage(format!("eval must be 'data' or a point count, got '{other}'")))?;
            midpoint_grid(per_axis, sample.dim())?
        }
    };
    let values = estimator.estimate_many(&points)?;
    let anchored: Vec<bool> = points.iter().map(|x| estimator.find_anchor(x).is_some()).collect();

    let out = prepare_out_dir(Path::new(&out))?;
    let mut csv = format!("{},eta_hat,anchored\n", coordinate_header(sample.dim()));
    for ((x, v), a) in points.iter().zip(&values).zip(&anchored) {
        let _ = writeln!(csv, "{},{v},{a}", coordinates(x));
    }
    write_atomic(&out.join("predictions.csv"), csv.as_bytes())?;
    let covered = anchored.iter().filter(|&&a| a).count();
    let summary = json!({
        "n": estimator.split().fit.len(),
        "level": estimator.level(),
        "inverse_pi": estimator.inverse_pi(),
        "regressions": estimator.regressions(),
        "anchored_fraction": covered as f64 / points.len().max(1) as f64,
    });
    write_json_atomic(&out.join("summary.json"), &summary)?;
    echo_config(&out, &resolved)?;
    println!("level {}: {} regressions for {} points", estimator.level(), estimator.regressions(), points.len());
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ClassifyArgs {
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    /// Margin exponent; `inf` for hard margin.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Smoothness label.
    #[arg(long)]
    pub s: Option<f64>,
    /// Half-sample sizes, comma separated.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub sizes: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Level, or `balanced` for the balance level of `s`.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub j: Option<String>,
    #[arg(long)]
    pub inverse_pi: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn classify(flags: &ClassifyArgs, file: FileConfig) -> Result<(), CliError> {
    let defaults = json!({
        "theta": 1.0, "s": 1.0, "sizes": "512,1024,2048,4096,8192", "reps": 20, "probes": 20000,
        "r": 1, "j": "3", "inverse-pi": crate::classify::DEFAULT_INVERSE_PI0, "seed": 1
    });
    let (a, resolved) = resolve(flags, file, defaults)?;
    let out = required(a.out, "out")?;
    let theta = a.theta.unwrap_or(1.0);
    let s = positive(a.s.unwrap_or(1.0), "s")?;
    let order = a.r.unwrap_or(1);
    let scenario = margin_scenario(theta, s, 1)?;
    let level = match a.j.as_deref().unwrap_or("3") {
        "balanced" => LevelChoice::Balanced(s),
        other => LevelChoice::Fixed(other.parse().map_err(|_| CliError::Usage(format!("invalid level '{other}'")))?),
    };
    let setup = MarginExperiment {
        sizes: parse_list(a.sizes.as_deref().unwrap_or("512"), "sizes")?,
        reps: a.reps.unwrap_or(20),
        probes: a.probes.unwrap_or(20000),
        level,
        seed: a.seed.unwrap_or(1),
    };
    let config = classification_config(order, 1, a.inverse_pi.unwrap_or(crate::classify::DEFAULT_INVERSE_PI0));
    config.validate()?;
    let rows = margin_experiment(&scenario, &basis_for(order)?, &config, &setup)?;

    let out = prepare_out_dir(Path::new(&out))?;
    let mut csv = format!("{RISK_CSV_HEADER}\n");
    for row in &rows {
        let _ = writeln!(csv, "{}", row.csv_line());
        println!("n = {:>6}  median excess risk {:.6} (+- {:.6})", row.n, row.median_excess_risk, row.stderr);
    }
    write_atomic(&out.join("risk.csv"), csv.as_bytes())?;
    echo_config(&out, &resolved)?;
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BoundsArgs {
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    /// Sample sizes, comma separated.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub n: Option<String>,
    #[arg(long)]
    pub j: Option<u32>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Deviation levels, comma separated.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub delta: Option<String>,
    /// Eigenvalue thresholds, comma separated.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub t: Option<String>,
    /// gaussian | bounded.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub noise: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub pi_n: Option<f64>,
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub m: Option<f64>,
    /// Monte-Carlo repetitions; 0 skips the empirical column.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Query coordinate, repeated on every axis.
    #[arg(long)]
    pub x: Option<f64>,
}

pub fn bounds(flags: &BoundsArgs, file: FileConfig) -> Result<(), CliError> {
    let defaults = json!({
        "n": "2048,4096,8192,16384", "j": 6, "r": 1, "d": 1, "delta": "0.25,0.5", "t": "0.5",
        "noise": "gaussian", "sigma": 1.0, "k": 1.0, "pi-n": 2.0, "mu-max": 1.0, "s": 0.99, "m": 1.0,
        "reps": 0, "seed": 1, "x": 0.3
    });
    let (a, resolved) = resolve(flags, file, defaults)?;
    let out = required(a.out, "out")?;
    let sizes: Vec<usize> = parse_list(a.n.as_deref().unwrap_or(""), "n")?;
    let deltas: Vec<f64> = parse_list(a.delta.as_deref().unwrap_or(""), "delta")?;
    let ts: Vec<f64> = parse_list(a.t.as_deref().unwrap_or(""), "t")?;
    let noise = match a.noise.as_deref().unwrap_or("gaussian") {
        "gaussian" => NoiseModel::Gaussian { sigma: a.sigma.unwrap_or(1.0) },
        "bounded" => NoiseModel::Bounded { k: a.k.unwrap_or(1.0) },
        other => return Err(CliError::Usage(format!("unknown noise model '{other}'"))),
    };
    let d = a.d.unwrap_or(1);
    let reps = a.reps.unwrap_or(0);
    let x = vec![a.x.unwrap_or(0.3); d];

    let mut dev = String::from("n,j,delta,bound,clipped,maltese_bound,empirical_freq\n");
    let mut eig = String::from("n,j,t,bound,clipped,empirical_freq\n");
    for &n in &sizes {
        let p = BoundParams {
            n,
            j: a.j.unwrap_or(6),
            d,
            r: a.r.unwrap_or(1),
            pi_n: a.pi_n.unwrap_or(2.0),
            mu_max: a.mu_max.unwrap_or(1.0),
            noise,
            s: a.s.unwrap_or(0.99),
            m: a.m.unwrap_or(1.0),
        };
        let freq = if reps > 0 {
            Some(monte_carlo_frequencies(&p, &x, &deltas, &ts, reps, a.seed.unwrap_or(1))?)
        } else {
            None
        };
        for (i, &delta) in deltas.iter().enumerate() {
            let b = deviation_bound(delta, &p)?;
            let mb = maltese_deviation_bound(delta, &p)?;
            let f = freq.as_ref().map_or(String::new(), |f| f.deviation[i].to_string());
            let _ = writeln!(dev, "{n},{},{delta},{},{},{},{f}", p.j, b.raw, b.clipped, mb.clipped);
        }
        for (i, &t) in ts.iter().enumerate() {
            let b = eig_tail(t, &p)?;
            let f = freq.as_ref().map_or(String::new(), |f| f.eigen[i].to_string());
            let _ = writeln!(eig, "{n},{},{t},{},{},{f}", p.j, b.raw, b.clipped);
        }
    }
    let out = prepare_out_dir(Path::new(&out))?;
    write_atomic(&out.join("bounds.csv"), dev.as_bytes())?;
    write_atomic(&out.join("eig.csv"), eig.as_bytes())?;
    echo_config(&out, &resolved)?;
    print!("{dev}");
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    /// doppler | heavisine | bumps | blocks.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub signal: Option<String>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_raw: Option<usize>,
    #[arg(long)]
    pub grid_exp: Option<u32>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub snr: Option<f64>,
    /// gaussian | truncated | none.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub noise: Option<String>,
    /// Truncation of the standard normal for `noise = truncated`.
    #[arg(long)]
    pub truncate_k: Option<f64>,
    #[arg(long)]
    pub j_low: Option<u32>,
    /// Finest level, or `auto`.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub j_high: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub policy: Option<String>,
    #[arg(long)]
    pub g_min: Option<f64>,
    #[arg(long)]
    pub inverse_pi: Option<f64>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub fallback: Option<String>,
    /// Fill the `seconds` column with wall time.
    #[arg(long)]
    pub timing: Option<bool>,
}

fn study_config(a: SimulateArgs) -> Result<StudyConfig, CliError> {
    let base = StudyConfig::default();
    let noise = match a.noise.as_deref().unwrap_or("gaussian") {
        "gaussian" => NoiseKind::Gaussian,
        "truncated" => NoiseKind::Truncated { k: positive(a.truncate_k.unwrap_or(3.0), "truncate-k")? },
        "none" => NoiseKind::None,
        other => return Err(CliError::Usage(format!("unknown noise '{other}'"))),
    };
    let j_high = match a.j_high.as_deref().unwrap_or("auto") {
        "auto" => None,
        other => Some(other.parse().map_err(|_| CliError::Usage(format!("invalid j-high '{other}'")))?),
    };
    let kappa = positive(a.kappa.unwrap_or(base.kappa), "kappa")?;
    let config = StudyConfig {
        signal: a.signal.unwrap_or(base.signal),
        reps: a.reps.unwrap_or(base.reps),
        order: a.r.unwrap_or(base.order),
        seed: a.seed.unwrap_or(base.seed),
        n_raw: a.n_raw.unwrap_or(base.n_raw),
        grid_exp: a.grid_exp.unwrap_or(base.grid_exp),
        sigma: a.sigma.unwrap_or(base.sigma),
        snr: a.snr.unwrap_or(base.snr),
        noise,
        j_low: a.j_low.unwrap_or(base.j_low),
        j_high,
        kappa,
        policy: parse_policy(a.policy.as_deref().unwrap_or("decile"), a.g_min, a.inverse_pi)?,
        fallback: parse_fallback(a.fallback.as_deref().unwrap_or("demote-level"))?,
        timing: a.timing.unwrap_or(false),
    };
    config.validate()?;
    simulate::benchmark_signal(&config.signal)?;
    Ok(config)
}

pub fn simulate(flags: &SimulateArgs, file: FileConfig) -> Result<(), CliError> {
    let base = StudyConfig::default();
    let defaults = json!({
        "signal": base.signal, "reps": base.reps, "r": base.order, "seed": base.seed, "n-raw": base.n_raw,
        "grid-exp": base.grid_exp, "sigma": base.sigma, "snr": base.snr, "noise": "gaussian", "j-low": base.j_low,
        "j-high": "auto", "kappa": base.kappa, "policy": "decile", "fallback": "demote-level", "timing": false
    });
    let (a, resolved) = resolve(flags, file, defaults)?;
    let out = required(a.out.clone(), "out")?;
    let config = study_config(a)?;
    let result = simulate::run_study(&config)?;

    let out = prepare_out_dir(Path::new(&out))?;
    let mut trials = Vec::new();
    simulate::write_trials_csv(&mut trials, &result.trials).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("trials.csv"), &trials)?;
    let mut points = Vec::new();
    simulate::write_point_dump(&mut points, &result.median_points).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("points.csv"), &points)?;
    write_json_atomic(&out.join("summary.json"), &result.summary)?;
    echo_config(&out, &resolved)?;
    let s = &result.summary;
    println!(
        "{}: median relative RMSE {:.4} (trial {}), best fixed level {} at {:.4}",
        config.signal, s.median_rel_rmse, s.median_trial, s.best_fixed_level, s.best_fixed_rel_rmse
    );
    Ok(())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BenchArgs {
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub out: Option<String>,
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub signal: Option<String>,
    #[arg(long)]
    pub n_raw: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    /// Levels to time, e.g. `3..10`.
    #[arg(long)]
    #[serde(default, deserialize_with = "stringish")]
    pub levels: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn bench(flags: &BenchArgs, file: FileConfig) -> Result<(), CliError> {
    let defaults = json!({"signal": "heavisine", "n-raw": 3000, "r": 3, "levels": "3..10", "seed": 1});
    let (a, resolved) = resolve(flags, file, defaults)?;
    let out = required(a.out, "out")?;
    let order = a.r.unwrap_or(3);
    let study = Study::new(StudyConfig {
        signal: a.signal.unwrap_or_else(|| "heavisine".into()),
        n_raw: a.n_raw.unwrap_or(3000),
        order,
        seed: a.seed.unwrap_or(1),
        reps: 1,
        ..StudyConfig::default()
    })?;
    let (_, trial) = study.run_trial(0)?;
    let sample = DesignSample::from_1d(trial.x.clone(), trial.y_noisy.clone())?;
    let config = EstimatorConfig::new(order, 1).with_policy(ThresholdPolicy::EmpiricalDecile);
    let mut csv = String::from("j,n_effective,mr_regressions,lpe_regressions,mr_seconds,lpe_seconds\n");
    for j in parse_level_range(a.levels.as_deref().unwrap_or("3..10"))? {
        let start = Instant::now();
        let table = regress::estimate(&sample, j, &study.basis, &config)?;
        let _: Vec<f64> = sample.points().map(|x| table.evaluate(&study.basis, x)).collect();
        let mr_seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let bandwidth = 0.5 * (-(j as f64)).exp2();
        let lpe = lpe_baseline(&sample, &trial.x, bandwidth, order - 1)?;
        let lpe_seconds = start.elapsed().as_secs_f64();
        let _ = writeln!(
            csv,
            "{j},{},{},{},{mr_seconds},{lpe_seconds}",
            sample.len(),
            table.regressions(),
            lpe.regressions
        );
    }
    let out = prepare_out_dir(Path::new(&out))?;
    write_atomic(&out.join("bench.csv"), csv.as_bytes())?;
    echo_config(&out, &resolved)?;
    print!("{csv}");
    Ok(())
}

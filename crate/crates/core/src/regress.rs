//! Per-cell least squares against the active scaling functions.
//!
//! For a cell `H` at level `j` the local system is
//!
//! ```text
//! Q_H = (1/n) sum_i phi_H(X_i) phi_H(X_i)^T 1_H(X_i)
//! b_H = (1/n) sum_i phi_H(X_i) Y_i 1_H(X_i)
//! ```
//!
//! with `n` the full sample size. One symmetric eigendecomposition of `Q_H`
//! gives both `lambda_min(Q_H)`, which gates the fit against the spectral
//! threshold `1/pi_n`, and the solve `alpha = Q_H^{-1} b_H`.
//!
//! The estimator at level `j` is assembled from one fit per occupied cell, so
//! it costs at most `min(2^{jd}, n)` regressions.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::lattice::{locate, CellIndex, DesignSample, OccupancyMap};
use crate::scaling::{dyadic, ScalingBasis};
use crate::{par, Error, Result};

/// How `1/pi_n` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// `pi_n = log n`.
    Theory,
    /// `1/pi_n = min(g*_min / 2, 1)` from a known lower bound on `g_min`.
    KnownDensityFloor { g_min: f64 },
    /// First decile of every `lambda_min` across cells and levels.
    EmpiricalDecile,
    /// `1/pi_n` given directly, e.g. the constant `pi_0` of the classifier.
    Fixed { inverse_pi: f64 },
}

impl ThresholdPolicy {
    /// Resolves `1/pi_n` for sample size `n`. `lambdas` is only consulted by
    /// the empirical policy.
    pub fn inverse_pi(&self, n: usize, lambdas: &[f64]) -> Result<f64> {
        match *self {
            ThresholdPolicy::Theory => {
                if n < 3 {
                    return Err(Error::Config(format!(
                        "pi_n = log n needs n >= 3 so that 1/pi_n <= 1 (n = {n})"
                    )));
                }
                Ok((n as f64).ln().recip())
            }
            ThresholdPolicy::KnownDensityFloor { g_min } => {
                if !(g_min > 0.0) {
                    return Err(Error::Config(format!("g_min must be positive, got {g_min}")));
                }
                Ok((0.5 * g_min).min(1.0))
            }
            ThresholdPolicy::EmpiricalDecile => {
                Ok(crate::simulate::empirical_pi_n(lambdas)?.min(1.0))
            }
            ThresholdPolicy::Fixed { inverse_pi } => {
                if !(inverse_pi > 0.0 && inverse_pi <= 1.0) {
                    return Err(Error::Config(format!(
                        "1/pi_n must lie in (0, 1], got {inverse_pi}"
                    )));
                }
                Ok(inverse_pi)
            }
        }
    }
}

/// Value used where the local fit is invalid or the cell is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    #[default]
    Zero,
    /// Adaptive estimation moves to the finest coarser level with a valid
    /// fit; a single level behaves like `Zero`.
    DemoteLevel,
    /// Mean of the valid neighbouring cells at the same level.
    NeighborAverage,
}

/// Estimator settings shared by all modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub order: usize,
    pub dim: usize,
    pub policy: ThresholdPolicy,
    pub kappa: f64,
    pub fallback: Fallback,
    /// `M` of the truncation `T_M` when a sup-norm bound is known.
    pub clamp: Option<f64>,
}

impl EstimatorConfig {
    pub fn new(order: usize, dim: usize) -> Self {
        Self {
            order,
            dim,
            policy: ThresholdPolicy::Theory,
            kappa: 1.0,
            fallback: Fallback::Zero,
            clamp: None,
        }
    }

    pub fn with_policy(mut self, policy: ThresholdPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn with_clamp(mut self, clamp: Option<f64>) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > crate::scaling::MAX_ORDER {
            return Err(Error::Config(format!("order r = {} out of range", self.order)));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension d must be positive".into()));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if let Some(m) = self.clamp {
            if !(m > 0.0) {
                return Err(Error::Config(format!("clamp M must be positive, got {m}")));
            }
        }
        Ok(())
    }
}

/// `T_M(z)`.
#[inline]
pub fn truncate(z: f64, bound: f64) -> f64 {
    z.clamp(-bound, bound)
}

/// Gram matrix and moment vector of one cell.
///
/// `rows` are the sample rows lying in `cell`; `n` in the normalization is
/// the full sample size.
pub fn gram_and_moment(
    cell: &CellIndex,
    sample: &DesignSample,
    rows: &[usize],
    basis: &ScalingBasis,
) -> (DMatrix<f64>, DVector<f64>) {
    let iter = rows.iter().map(|&i| (sample.point(i), sample.response(i)));
    accumulate(cell, iter, sample.len(), basis)
}

pub(crate) fn accumulate<'a>(
    cell: &CellIndex,
    points: impl Iterator<Item = (&'a [f64], f64)>,
    n_total: usize,
    basis: &ScalingBasis,
) -> (DMatrix<f64>, DVector<f64>) {
    let size = basis.span().pow(cell.dim() as u32);
    let mut gram = DMatrix::<f64>::zeros(size, size);
    let mut moment = DVector::<f64>::zeros(size);
    let mut phi = vec![0.0; size];
    for (x, y) in points {
        basis.local_values(cell, x, &mut phi);
        for a in 0..size {
            let pa = phi[a];
            if pa == 0.0 {
                continue;
            }
            moment[a] += pa * y;
            for b in a..size {
                gram[(a, b)] += pa * phi[b];
            }
        }
    }
    if n_total > 0 {
        let inv_n = (n_total as f64).recip();
        gram *= inv_n;
        moment *= inv_n;
    }
    for a in 0..size {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    (gram, moment)
}

/// Fitted coefficients of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    #[serde(flatten)]
    pub cell: CellIndex,
    pub alpha: Vec<f64>,
    pub lambda_min: f64,
    pub n_points: usize,
    pub valid: bool,
}

impl LocalFit {
    /// `<alpha, phi_H(x)>` without the cell indicator; zero when invalid.
    pub fn expansion(&self, basis: &ScalingBasis, x: &[f64]) -> f64 {
        if !self.valid {
            return 0.0;
        }
        let mut phi = vec![0.0; self.alpha.len()];
        basis.local_values(&self.cell, x, &mut phi);
        phi.iter().zip(&self.alpha).map(|(p, a)| p * a).sum()
    }
}

/// Eigendecomposed local system, kept so that a fit can be re-thresholded
/// without touching the data again.
#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub cell: CellIndex,
    pub n_points: usize,
    moment: DVector<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl LocalSystem {
    pub fn new(cell: CellIndex, gram: DMatrix<f64>, moment: DVector<f64>, n_points: usize) -> Result<Self> {
        let eigen = SymmetricEigen::try_new(gram, 1e-15, 10_000).ok_or_else(|| Error::Fit {
            cell: cell.to_string(),
            reason: "symmetric eigensolver did not converge".into(),
        })?;
        if eigen.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit {
                cell: cell.to_string(),
                reason: "non-finite eigenvalue".into(),
            });
        }
        Ok(Self { cell, n_points, moment, eigen })
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
    }

    /// Thresholded fit: valid iff the cell is occupied and
    /// `lambda_min >= inverse_pi`.
    pub fn fit(&self, inverse_pi: f64) -> LocalFit {
        let lambda_min = self.lambda_min();
        let size = self.moment.len();
        let valid = self.n_points > 0 && lambda_min > 0.0 && lambda_min >= inverse_pi;
        let alpha = if valid {
            let projected = self.eigen.eigenvectors.transpose() * &self.moment;
            let scaled = DVector::from_iterator(
                size,
                projected.iter().zip(self.eigen.eigenvalues.iter()).map(|(p, l)| p / l),
            );
            (&self.eigen.eigenvectors * scaled).iter().copied().collect()
        } else {
            vec![0.0; size]
        };
        LocalFit {
            cell: self.cell.clone(),
            alpha,
            lambda_min,
            n_points: self.n_points,
            valid,
        }
    }
}

/// Single thresholded regression on `cell`.
pub fn local_fit(
    cell: &CellIndex,
    sample: &DesignSample,
    rows: &[usize],
    basis: &ScalingBasis,
    inverse_pi: f64,
) -> Result<LocalFit> {
    if !(inverse_pi > 0.0 && inverse_pi <= 1.0) {
        return Err(Error::InvalidArgument(format!("1/pi_n must lie in (0, 1], got {inverse_pi}")));
    }
    let (gram, moment) = gram_and_moment(cell, sample, rows, basis);
    Ok(LocalSystem::new(cell.clone(), gram, moment, rows.len())?.fit(inverse_pi))
}

/// Value of `fit` at `x`, after truncation when `clamp` is set. Invalid fits
/// give zero.
pub fn evaluate_fit(fit: &LocalFit, basis: &ScalingBasis, x: &[f64], clamp: Option<f64>) -> Result<f64> {
    if !fit.cell.contains(x) {
        return Err(Error::InvalidArgument(format!(
            "point {x:?} is not in cell {}",
            fit.cell
        )));
    }
    let raw = fit.expansion(basis, x);
    Ok(clamp.map_or(raw, |m| truncate(raw, m)))
}

/// Local systems of every occupied cell at one level.
#[derive(Debug, Clone)]
pub struct LevelSystems {
    pub level: u32,
    pub n: usize,
    systems: BTreeMap<CellIndex, LocalSystem>,
}

impl LevelSystems {
    pub fn assemble(sample: &DesignSample, level: u32, basis: &ScalingBasis) -> Result<Self> {
        let occupancy = OccupancyMap::build(sample, level);
        let cells: Vec<(&CellIndex, &[usize])> = occupancy.iter().collect();
        let built = par::map_collect(&cells, |(cell, rows)| {
            let (gram, moment) = gram_and_moment(cell, sample, rows, basis);
            LocalSystem::new((*cell).clone(), gram, moment, rows.len())
        });
        let mut systems = BTreeMap::new();
        for system in built {
            let system = system?;
            systems.insert(system.cell.clone(), system);
        }
        Ok(Self { level, n: sample.len(), systems })
    }

    /// Number of regressions, one per occupied cell.
    pub fn regressions(&self) -> usize {
        self.systems.len()
    }

    pub fn lambdas(&self) -> impl Iterator<Item = f64> + '_ {
        self.systems.values().map(LocalSystem::lambda_min)
    }

    pub fn fit(&self, basis: &ScalingBasis, inverse_pi: f64, clamp: Option<f64>, fallback: Fallback) -> CellFitTable {
        CellFitTable {
            level: self.level,
            order: basis.order(),
            inverse_pi,
            clamp,
            fallback,
            fits: self.systems.iter().map(|(c, s)| (c.clone(), s.fit(inverse_pi))).collect(),
        }
    }
}

/// Fitted estimator `eta_j` at one level: cell -> local fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFitTable {
    #[serde(rename = "j")]
    pub level: u32,
    pub order: usize,
    pub inverse_pi: f64,
    pub clamp: Option<f64>,
    pub fallback: Fallback,
    #[serde(with = "fit_list")]
    pub fits: BTreeMap<CellIndex, LocalFit>,
}

mod fit_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(fits: &BTreeMap<CellIndex, LocalFit>, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(fits.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<CellIndex, LocalFit>, D::Error> {
        let list = Vec::<LocalFit>::deserialize(d)?;
        Ok(list.into_iter().map(|f| (f.cell.clone(), f)).collect())
    }
}

impl CellFitTable {
    pub fn regressions(&self) -> usize {
        self.fits.len()
    }

    pub fn get(&self, cell: &CellIndex) -> Option<&LocalFit> {
        self.fits.get(cell)
    }

    /// Whether `x` falls in a cell carrying a valid fit.
    pub fn is_valid_at(&self, x: &[f64]) -> bool {
        self.fits.get(&locate(x, self.level)).is_some_and(|f| f.valid)
    }

    /// `eta_j(x)` including the fallback rule.
    pub fn evaluate(&self, basis: &ScalingBasis, x: &[f64]) -> f64 {
        let cell = locate(x, self.level);
        let value = match self.fits.get(&cell) {
            Some(fit) if fit.valid => fit.expansion(basis, x),
            _ => match self.fallback {
                Fallback::Zero | Fallback::DemoteLevel => 0.0,
                Fallback::NeighborAverage => self.neighbor_average(basis, &cell, x),
            },
        };
        self.clamp.map_or(value, |m| truncate(value, m))
    }

    fn neighbor_average(&self, basis: &ScalingBasis, cell: &CellIndex, x: &[f64]) -> f64 {
        let d = cell.dim();
        let h = dyadic(self.level).recip();
        let mut total = 0.0;
        let mut count = 0usize;
        for flat in 0..3usize.pow(d as u32) {
            let mut rest = flat;
            let coords: Vec<i64> = cell
                .coords
                .iter()
                .map(|&m| {
                    let step = (rest % 3) as i64 - 1;
                    rest /= 3;
                    m + step
                })
                .collect();
            if coords == cell.coords {
                continue;
            }
            let neighbor = CellIndex::new(self.level, coords);
            if let Some(fit) = self.fits.get(&neighbor).filter(|f| f.valid) {
                let inside: Vec<f64> = x
                    .iter()
                    .zip(&neighbor.coords)
                    .map(|(&xi, &m)| xi.clamp(h * m as f64, (h * (m + 1) as f64).next_down()))
                    .collect();
                total += fit.expansion(basis, &inside);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Fixed-level estimator `eta_j`. The empirical-decile policy uses the
/// eigenvalues of this level only; see [`crate::adapt`] for the multi-level
/// version.
pub fn estimate(
    sample: &DesignSample,
    level: u32,
    basis: &ScalingBasis,
    config: &EstimatorConfig,
) -> Result<CellFitTable> {
    config.validate()?;
    check_dims(sample, basis, config)?;
    let systems = LevelSystems::assemble(sample, level, basis)?;
    let lambdas: Vec<f64> = systems.lambdas().collect();
    let inverse_pi = config.policy.inverse_pi(sample.len(), &lambdas)?;
    Ok(systems.fit(basis, inverse_pi, config.clamp, config.fallback))
}

pub(crate) fn check_dims(sample: &DesignSample, basis: &ScalingBasis, config: &EstimatorConfig) -> Result<()> {
    if sample.dim() != config.dim {
        return Err(Error::Config(format!(
            "sample dimension {} differs from configured d = {}",
            sample.dim(),
            config.dim
        )));
    }
    if basis.order() != config.order {
        return Err(Error::Config(format!(
            "basis order {} differs from configured r = {}",
            basis.order(),
            config.order
        )));
    }
    Ok(())
}

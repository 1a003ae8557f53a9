//! Resolution ranges and pointwise Lepski selection of the level.
//!
//! With `t(n)^2 = kappa pi_n^2 log n` and
//! `g(j, k) = (2^{jd/2} + 2^{kd/2}) t(n) / sqrt(n)`, the selected level at
//! `x` is the smallest `j` in the range whose estimate stays within `g(j, k)`
//! of every finer estimate `k > j`. The finest level always qualifies, so the
//! rule falls back to `J` when nothing coarser does.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::lattice::DesignSample;
use crate::regress::{check_dims, CellFitTable, EstimatorConfig, Fallback, LevelSystems};
use crate::scaling::{dyadic, ScalingBasis};
use crate::{par, Error, Result};

/// How the coarsest level of the range is picked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerLevel {
    /// `2^{j_r} = floor(n^{1/(2r+d)})`.
    KnownR,
    /// `2^{j_s} = floor(n^{1/(2s+d)})`.
    KnownS(f64),
    Fixed(u32),
}

/// How the finest level of the range is picked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperLevel {
    /// `2^{Jd} = floor(n t(n)^{-2})`.
    Theory,
    /// `J = ceil(log2(n / log10 n))`, the rule used for the benchmark study.
    Practical,
    Fixed(u32),
}

/// Levels `j_low ..= J` together with the Lepski threshold scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionGrid {
    pub j_low: u32,
    pub j_high: u32,
    pub n: usize,
    pub dim: usize,
    pub kappa: f64,
    pub pi_n: f64,
    pub t_n: f64,
}

fn floor_log2(v: f64) -> Option<u32> {
    let v = v.floor();
    if v < 1.0 {
        None
    } else {
        Some(63 - (v as u64).leading_zeros())
    }
}

/// `j` with `2^j = floor(n^{1/(2s+d)})`.
pub fn balance_level(n: usize, smoothness: f64, dim: usize) -> u32 {
    floor_log2((n as f64).powf(1.0 / (2.0 * smoothness + dim as f64))).unwrap_or(0)
}

/// `J = ceil(log2(n / log10 n))`.
pub fn practical_top_level(n: usize) -> Result<u32> {
    if n < 11 {
        return Err(Error::Config(format!("practical level rule needs n > 10, got {n}")));
    }
    let n = n as f64;
    Ok((n / n.log10()).log2().ceil() as u32)
}

/// `t(n) = sqrt(kappa pi_n^2 log n)`.
pub fn threshold_scale(n: usize, kappa: f64, pi_n: f64) -> f64 {
    (kappa * pi_n * pi_n * (n as f64).ln()).sqrt()
}

/// Range `J_n` from the sample size and the tuning constants.
pub fn resolution_grid(
    n: usize,
    dim: usize,
    order: usize,
    kappa: f64,
    pi_n: f64,
    lower: LowerLevel,
    upper: UpperLevel,
) -> Result<ResolutionGrid> {
    if n < 3 {
        return Err(Error::Config(format!("n = {n} is too small: need log n > 1")));
    }
    if !(kappa > 0.0) || !(pi_n >= 1.0) {
        return Err(Error::Config(format!(
            "need kappa > 0 and pi_n >= 1 (kappa = {kappa}, pi_n = {pi_n})"
        )));
    }
    let t_n = threshold_scale(n, kappa, pi_n);
    let j_low = match lower {
        LowerLevel::KnownR => balance_level(n, order as f64, dim),
        LowerLevel::KnownS(s) => {
            if !(s > 0.0 && s < order as f64) {
                return Err(Error::Config(format!("smoothness s = {s} must lie in (0, r = {order})")));
            }
            balance_level(n, s, dim)
        }
        LowerLevel::Fixed(j) => j,
    };
    let j_high = match upper {
        UpperLevel::Theory => {
            let cells = n as f64 / (t_n * t_n);
            match floor_log2(cells) {
                Some(bits) => bits / dim as u32,
                None => {
                    return Err(Error::Config(format!(
                        "n t(n)^-2 = {cells:.4} < 1: no admissible level (n = {n}, t(n)^2 = {:.4})",
                        t_n * t_n
                    )))
                }
            }
        }
        UpperLevel::Practical => practical_top_level(n)?,
        UpperLevel::Fixed(j) => j,
    };
    if j_high < j_low {
        return Err(Error::Config(format!(
            "empty resolution range: J = {j_high} < j_low = {j_low} for n = {n}, kappa = {kappa}, pi_n = {pi_n} \
             (need 2^(J d) <= n / t(n)^2 with t(n)^2 = {:.4})",
            t_n * t_n
        )));
    }
    Ok(ResolutionGrid { j_low, j_high, n, dim, kappa, pi_n, t_n })
}

impl ResolutionGrid {
    /// Explicit range; `t(n)` is derived from `kappa` and `pi_n`.
    pub fn explicit(levels: RangeInclusive<u32>, n: usize, dim: usize, kappa: f64, pi_n: f64) -> Result<Self> {
        resolution_grid(
            n,
            dim,
            1,
            kappa,
            pi_n,
            LowerLevel::Fixed(*levels.start()),
            UpperLevel::Fixed(*levels.end()),
        )
    }

    pub fn levels(&self) -> RangeInclusive<u32> {
        self.j_low..=self.j_high
    }

    pub fn len(&self) -> usize {
        (self.j_high - self.j_low + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same range with a different `pi_n`.
    pub fn with_pi_n(&self, pi_n: f64) -> Self {
        Self {
            pi_n,
            t_n: threshold_scale(self.n, self.kappa, pi_n),
            ..self.clone()
        }
    }

    /// `g(j, k)`.
    pub fn threshold(&self, j: u32, k: u32) -> f64 {
        let half_d = 0.5 * self.dim as f64;
        (dyadic(j).powf(half_d) + dyadic(k).powf(half_d)) * self.t_n / (self.n as f64).sqrt()
    }
}

/// Lepski rule on the values `values[j - j_low]` of every level at one point.
pub fn lepski_select(values: &[f64], grid: &ResolutionGrid) -> u32 {
    lepski_select_among(values, &vec![true; values.len()], grid)
}

/// Lepski rule restricted to the levels flagged in `usable`: a level is
/// only compared with the finer usable levels. Falls back to the finest
/// usable level, or to `J` when none is usable.
pub fn lepski_select_among(values: &[f64], usable: &[bool], grid: &ResolutionGrid) -> u32 {
    debug_assert_eq!(values.len(), grid.len());
    debug_assert_eq!(usable.len(), grid.len());
    let levels: Vec<(usize, u32)> = grid.levels().enumerate().filter(|&(a, _)| usable[a]).collect();
    for (i, &(a, j)) in levels.iter().enumerate() {
        let agrees = levels[i + 1..]
            .iter()
            .all(|&(b, k)| (values[a] - values[b]).abs() <= grid.threshold(j, k));
        if agrees {
            return j;
        }
    }
    grid.j_high
}

/// Adaptive estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivePoint {
    pub value: f64,
    /// Level used for `value`, after demotion.
    pub level: u32,
    /// Level picked by the Lepski rule.
    pub selected: u32,
}

/// `x -> eta_{j(x)}(x)` over a resolution range, reusing one fit table per
/// level.
#[derive(Debug, Clone)]
pub struct AdaptiveEstimator {
    pub grid: ResolutionGrid,
    pub tables: Vec<CellFitTable>,
    pub inverse_pi: f64,
    fallback: Fallback,
}

impl AdaptiveEstimator {
    pub fn table(&self, level: u32) -> Option<&CellFitTable> {
        level.checked_sub(self.grid.j_low).and_then(|i| self.tables.get(i as usize))
    }

    /// Total regressions across all levels.
    pub fn regressions(&self) -> usize {
        self.tables.iter().map(CellFitTable::regressions).sum()
    }

    /// With the demote-level fallback, levels whose fit at `x` is invalid
    /// are left out of the Lepski comparisons, and the selected level is
    /// moved down to the finest valid one if needed.
    pub fn evaluate(&self, basis: &ScalingBasis, x: &[f64]) -> AdaptivePoint {
        let values: Vec<f64> = self.tables.iter().map(|t| t.evaluate(basis, x)).collect();
        if self.fallback != Fallback::DemoteLevel {
            let selected = lepski_select(&values, &self.grid);
            let value = values[(selected - self.grid.j_low) as usize];
            return AdaptivePoint { value, level: selected, selected };
        }
        let usable: Vec<bool> = self.tables.iter().map(|t| t.is_valid_at(x)).collect();
        let selected = lepski_select_among(&values, &usable, &self.grid);
        let demoted = (self.grid.j_low..=selected).rev().find(|&j| usable[(j - self.grid.j_low) as usize]);
        match demoted {
            Some(level) => AdaptivePoint { value: values[(level - self.grid.j_low) as usize], level, selected },
            None => AdaptivePoint { value: 0.0, level: selected, selected },
        }
    }

    pub fn evaluate_many<'a>(&self, basis: &ScalingBasis, points: impl Iterator<Item = &'a [f64]>) -> Vec<AdaptivePoint> {
        let points: Vec<&[f64]> = points.collect();
        par::map_collect(&points, |x| self.evaluate(basis, x))
    }
}

/// Builds every level of `grid`, resolves the threshold, and wires the Lepski
/// rule. For the empirical-decile policy `pi_n` (and `t(n)`) are taken from
/// the eigenvalues of all levels.
pub fn adaptive_estimate(
    sample: &DesignSample,
    grid: &ResolutionGrid,
    basis: &ScalingBasis,
    config: &EstimatorConfig,
) -> Result<AdaptiveEstimator> {
    config.validate()?;
    check_dims(sample, basis, config)?;
    let levels: Vec<u32> = grid.levels().collect();
    let systems = levels
        .iter()
        .map(|&j| LevelSystems::assemble(sample, j, basis))
        .collect::<Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = systems.iter().flat_map(|s| s.lambdas()).collect();
    let inverse_pi = config.policy.inverse_pi(sample.len(), &lambdas)?;
    let grid = match config.policy {
        crate::regress::ThresholdPolicy::EmpiricalDecile => grid.with_pi_n(inverse_pi.recip()),
        _ => grid.clone(),
    };
    let tables = systems
        .iter()
        .map(|s| s.fit(basis, inverse_pi, config.clamp, config.fallback))
        .collect();
    Ok(AdaptiveEstimator { grid, tables, inverse_pi, fallback: config.fallback })
}

/// Writes `x1..xd,j_at` rows.
pub fn write_level_map<W: Write>(mut w: W, points: &[Vec<f64>], levels: &[u32]) -> std::io::Result<()> {
    let d = points.first().map_or(1, Vec::len);
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(w, "{},j_at", header.join(","))?;
    for (x, j) in points.iter().zip(levels) {
        let coords: Vec<String> = x.iter().map(f64::to_string).collect();
        writeln!(w, "{},{j}", coords.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(levels: RangeInclusive<u32>, t_n: f64) -> ResolutionGrid {
        ResolutionGrid { j_low: *levels.start(), j_high: *levels.end(), n: 100, dim: 1, kappa: 1.0, pi_n: 1.0, t_n }
    }

    #[test]
    fn practical_rule_gives_ten_for_benchmark_sizes() {
        assert_eq!(practical_top_level(2850).unwrap(), 10);
        let g = resolution_grid(2850, 1, 3, 1.0, 2850f64.ln(), LowerLevel::Fixed(3), UpperLevel::Practical).unwrap();
        assert_eq!(g.levels(), 3..=10);
    }

    #[test]
    fn balance_levels() {
        // floor((2^20)^(1/3)) = 101 -> j_r = 6
        assert_eq!(balance_level(1 << 20, 1.0, 1), 6);
        let g = resolution_grid(1 << 20, 1, 1, 1e-3, 1.0, LowerLevel::KnownR, UpperLevel::Theory).unwrap();
        assert_eq!(g.j_low, 6);
        assert!(dyadic(g.j_high * g.dim as u32) <= g.n as f64 / (g.t_n * g.t_n));
    }

    #[test]
    fn empty_range_is_reported() {
        let err = resolution_grid(100, 1, 3, 1.0, 100f64.ln(), LowerLevel::Fixed(3), UpperLevel::Theory).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("t(n)"));
    }

    #[test]
    fn threshold_formula() {
        let g = grid(2..=6, 3.0);
        assert!((g.threshold(3, 3) - 2.0 * 8f64.sqrt() * 3.0 / 10.0).abs() < 1e-12);
        assert_eq!(g.threshold(2, 5), g.threshold(5, 2));
        assert!(g.threshold(2, 5) < g.threshold(2, 6));
    }

    #[test]
    fn selection_extremes() {
        let g = grid(3..=6, 1.0);
        assert_eq!(lepski_select(&[0.0; 4], &g), 3);
        assert_eq!(lepski_select(&[0.0, 100.0, 0.0, 100.0], &g), 6);
        // level 4 agrees with 5 and 6 but 3 does not agree with 4
        assert_eq!(lepski_select(&[10.0, 0.0, 0.1, 0.0], &g), 4);
    }

    #[test]
    fn selection_ignores_common_offsets() {
        let g = grid(2..=5, 0.5);
        let v = [0.3, -0.2, 0.4, 0.1];
        let shifted: Vec<f64> = v.iter().map(|x| x + 7.5).collect();
        assert_eq!(lepski_select(&v, &g), lepski_select(&shifted, &g));
    }

    #[test]
    fn known_s_inequalities() {
        let (s, d, r) = (1.5f64, 1usize, 3u32);
        for n in [1usize << 10, 5000, 1 << 16, 123_457] {
            assert!((n as f64).ln() >= (2.0 * s + d as f64) * 2f64.ln());
            let j = balance_level(n, s, d);
            let lhs_a = (n as f64).powf(-0.5) * dyadic(j).powf(0.5 * d as f64);
            let bias = dyadic(j).powf(-s);
            assert!(lhs_a <= bias);
            assert!(bias <= dyadic(r) * (n as f64).powf(-s / (2.0 * s + d as f64)));
        }
    }

    #[test]
    fn level_map_csv() {
        let mut buf = Vec::new();
        write_level_map(&mut buf, &[vec![0.25], vec![0.5]], &[3, 4]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x1,j_at\n0.25,3\n0.5,4\n");
    }
}

//! Moving-grid estimation when the support of the design is unknown.
//!
//! A sample of size `2n` is split in two halves. The anchor half only
//! locates the support: a query `x` is served by an anchor point `a` with
//! `|x - a|_inf <= 2^{-j-1}`. The fit half is shifted so that `a` sits at the
//! center of `H_0 = 2^-j [0,1)^d`, and the usual thresholded regression is
//! run on `H_0`. Fits are cached per anchor, so the number of regressions
//! never exceeds the number of anchor points however many queries are made.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::adapt::{lepski_select, ResolutionGrid};
use crate::lattice::{locate, shift, CellIndex, DesignSample};
use crate::regress::{accumulate, truncate, EstimatorConfig, LocalFit, LocalSystem};
use crate::scaling::{dyadic, ScalingBasis};
use crate::{par, Error, Result};

/// Disjoint halves of a `2n` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSample {
    /// `D_n`, used for the regressions.
    pub fit: DesignSample,
    /// `D'_n`, used to find anchors.
    pub anchors: DesignSample,
}

/// Random equipartition of `sample`, reproducible from `seed`.
pub fn split(sample: &DesignSample, seed: u64) -> Result<SplitSample> {
    if sample.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "sample splitting needs an even size, got {}",
            sample.len()
        )));
    }
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.shuffle(&mut crate::rng::stream(seed, 0));
    let half = sample.len() / 2;
    Ok(SplitSample {
        anchors: sample.select(&order[..half]),
        fit: sample.select(&order[half..]),
    })
}

/// Bucket index of a sample at one level, for box queries.
#[derive(Debug, Clone)]
struct PointGrid {
    level: u32,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl PointGrid {
    fn build(sample: &DesignSample, level: u32) -> Self {
        let mut grid = Self { level, buckets: HashMap::new() };
        for (i, x) in sample.points().enumerate() {
            grid.insert(i, x);
        }
        grid
    }

    fn insert(&mut self, i: usize, x: &[f64]) {
        self.buckets.entry(bucket(x, self.level)).or_default().push(i);
    }

    /// Rows in the closed box `[lo, hi]` (a superset filter; callers refine).
    fn candidates(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let a = bucket(lo, self.level);
        let b = bucket(hi, self.level);
        let d = a.len();
        let mut out = Vec::new();
        let mut key = a.clone();
        loop {
            if let Some(rows) = self.buckets.get(&key) {
                out.extend_from_slice(rows);
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    out.sort_unstable();
                    return out;
                }
                if key[axis] < b[axis] {
                    key[axis] += 1;
                    break;
                }
                key[axis] = a[axis];
                axis += 1;
            }
        }
    }
}

fn bucket(x: &[f64], level: u32) -> Vec<i64> {
    let scale = dyadic(level);
    x.iter().map(|&v| (scale * v).floor() as i64).collect()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fits keyed by anchor index.
#[derive(Debug, Default)]
pub struct AnchorCache {
    fits: RwLock<HashMap<usize, LocalFit>>,
    hits: AtomicUsize,
}

impl AnchorCache {
    pub fn contains(&self, anchor: usize) -> bool {
        self.fits.read().expect("anchor cache poisoned").contains_key(&anchor)
    }

    /// Distinct anchors fitted so far, i.e. regressions performed.
    pub fn len(&self) -> usize {
        self.fits.read().expect("anchor cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    fn get(&self, anchor: usize) -> Option<LocalFit> {
        let found = self.fits.read().expect("anchor cache poisoned").get(&anchor).cloned();
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    fn insert(&self, anchor: usize, fit: LocalFit) -> LocalFit {
        self.fits
            .write()
            .expect("anchor cache poisoned")
            .entry(anchor)
            .or_insert(fit)
            .clone()
    }
}

/// `eta^maltese_j` at a fixed level.
#[derive(Debug)]
pub struct MovingGridEstimator {
    split: SplitSample,
    basis: ScalingBasis,
    level: u32,
    inverse_pi: f64,
    clamp: Option<f64>,
    anchor_grid: PointGrid,
    fit_grid: PointGrid,
    cache: AnchorCache,
    /// Anchors already fitted, bucketed like `anchor_grid`.
    cached_grid: RwLock<PointGrid>,
}

impl MovingGridEstimator {
    /// `config.policy` is resolved against the fit-half size; the empirical
    /// decile policy is not available here because fits are built lazily.
    pub fn new(split: SplitSample, basis: ScalingBasis, level: u32, config: &EstimatorConfig) -> Result<Self> {
        config.validate()?;
        if split.fit.dim() != config.dim || split.anchors.dim() != config.dim {
            return Err(Error::Config(format!("sample dimension differs from configured d = {}", config.dim)));
        }
        if basis.order() != config.order {
            return Err(Error::Config(format!(
                "basis order {} differs from configured r = {}",
                basis.order(),
                config.order
            )));
        }
        if config.policy == crate::regress::ThresholdPolicy::EmpiricalDecile {
            return Err(Error::Config(
                "the moving-grid estimator needs a theory, density-floor or fixed threshold policy".into(),
            ));
        }
        let inverse_pi = config.policy.inverse_pi(split.fit.len(), &[])?;
        Ok(Self {
            anchor_grid: PointGrid::build(&split.anchors, level),
            fit_grid: PointGrid::build(&split.fit, level),
            split,
            basis,
            level,
            inverse_pi,
            clamp: config.clamp,
            cache: AnchorCache::default(),
            cached_grid: RwLock::new(PointGrid { level, buckets: HashMap::new() }),
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn inverse_pi(&self) -> f64 {
        self.inverse_pi
    }

    pub fn split(&self) -> &SplitSample {
        &self.split
    }

    pub fn cache(&self) -> &AnchorCache {
        &self.cache
    }

    /// Regressions performed so far.
    pub fn regressions(&self) -> usize {
        self.cache.len()
    }

    /// Anchor for `x`: an anchor point in `H_0(x)`, preferring one already
    /// fitted, else the nearest in the sup norm (ties to the lowest index).
    pub fn find_anchor(&self, x: &[f64]) -> Option<usize> {
        self.find_anchor_with(x, &self.cached_grid.read().expect("anchor grid poisoned"))
    }

    /// Nearest point of `preferred` within reach, else nearest of all.
    fn find_anchor_with(&self, x: &[f64], preferred: &PointGrid) -> Option<usize> {
        let half = 0.5 * dyadic(self.level).recip();
        let lo: Vec<f64> = x.iter().map(|v| v - half).collect();
        let hi: Vec<f64> = x.iter().map(|v| v + half).collect();
        self.nearest(preferred.candidates(&lo, &hi), x, half)
            .or_else(|| self.nearest(self.anchor_grid.candidates(&lo, &hi), x, half))
    }

    /// Ties go to the lowest index.
    fn nearest(&self, rows: Vec<usize>, x: &[f64], half: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for i in rows {
            let dist = linf(self.split.anchors.point(i), x);
            if dist <= half && best.is_none_or(|b| (dist, i) < b) {
                best = Some((dist, i));
            }
        }
        best.map(|(_, i)| i)
    }

    fn fit_anchor(&self, anchor: usize) -> Result<LocalFit> {
        if let Some(fit) = self.cache.get(anchor) {
            return Ok(fit);
        }
        let fit = self.compute_fit(anchor)?;
        Ok(self.remember(anchor, fit))
    }

    fn remember(&self, anchor: usize, fit: LocalFit) -> LocalFit {
        if !self.cache.contains(anchor) {
            let mut grid = self.cached_grid.write().expect("anchor grid poisoned");
            grid.insert(anchor, self.split.anchors.point(anchor));
        }
        self.cache.insert(anchor, fit)
    }

    fn compute_fit(&self, anchor: usize) -> Result<LocalFit> {
        let a = self.split.anchors.point(anchor);
        let d = a.len();
        let half = 0.5 * dyadic(self.level).recip();
        let cell = CellIndex::new(self.level, vec![0; d]);
        let lo: Vec<f64> = a.iter().map(|v| v - half).collect();
        let hi: Vec<f64> = a.iter().map(|v| v + half).collect();
        let mut shifted = Vec::new();
        for i in self.fit_grid.candidates(&lo, &hi) {
            let moved = shift(self.split.fit.point(i), a, self.level);
            if locate(&moved, self.level) == cell {
                shifted.push((moved, self.split.fit.response(i)));
            }
        }
        let (gram, moment) = accumulate(
            &cell,
            shifted.iter().map(|(x, y)| (x.as_slice(), *y)),
            self.split.fit.len(),
            &self.basis,
        );
        Ok(LocalSystem::new(cell, gram, moment, shifted.len())?.fit(self.inverse_pi))
    }

    fn value_with(&self, fit: &LocalFit, anchor: usize, x: &[f64]) -> f64 {
        let moved = shift(x, self.split.anchors.point(anchor), self.level);
        let raw = fit.expansion(&self.basis, &moved);
        self.clamp.map_or(raw, |m| truncate(raw, m))
    }

    /// `eta^maltese_j(x)`; zero without an anchor or with an invalid fit.
    pub fn estimate(&self, x: &[f64]) -> Result<f64> {
        match self.find_anchor(x) {
            None => Ok(0.0),
            Some(anchor) => {
                let fit = self.fit_anchor(anchor)?;
                Ok(self.value_with(&fit, anchor, x))
            }
        }
    }

    /// Batch queries. Anchors are chosen in query order, as repeated calls
    /// to [`Self::estimate`] would, then the distinct fits run in parallel.
    pub fn estimate_many(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut chosen: HashSet<usize> = HashSet::new();
        let mut preferred = self.cached_grid.read().expect("anchor grid poisoned").clone();
        let anchors: Vec<Option<usize>> = points
            .iter()
            .map(|x| {
                let pick = self.find_anchor_with(x, &preferred);
                if let Some(i) = pick {
                    if chosen.insert(i) && !self.cache.contains(i) {
                        preferred.insert(i, self.split.anchors.point(i));
                    }
                }
                pick
            })
            .collect();
        let mut fresh: Vec<usize> = chosen.into_iter().filter(|&i| !self.cache.contains(i)).collect();
        fresh.sort_unstable();
        let fits = par::map_collect(&fresh, |&i| self.compute_fit(i).map(|f| (i, f)));
        for fit in fits {
            let (i, f) = fit?;
            self.remember(i, f);
        }
        points
            .iter()
            .zip(anchors)
            .map(|(x, anchor)| match anchor {
                None => Ok(0.0),
                Some(i) => {
                    let fit = self.fit_anchor(i)?;
                    Ok(self.value_with(&fit, i, x))
                }
            })
            .collect()
    }
}

/// Lepski selection over moving-grid estimators at every level of `grid`.
#[derive(Debug)]
pub struct AdaptiveMovingGrid {
    pub grid: ResolutionGrid,
    levels: Vec<MovingGridEstimator>,
}

impl AdaptiveMovingGrid {
    pub fn new(split: &SplitSample, basis: &ScalingBasis, grid: ResolutionGrid, config: &EstimatorConfig) -> Result<Self> {
        let levels = grid
            .levels()
            .map(|j| MovingGridEstimator::new(split.clone(), basis.clone(), j, config))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, levels })
    }

    pub fn regressions(&self) -> usize {
        self.levels.iter().map(MovingGridEstimator::regressions).sum()
    }

    /// Values and selected levels at `points`.
    pub fn estimate_many(&self, points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<u32>)> {
        let per_level = self
            .levels
            .iter()
            .map(|e| e.estimate_many(points))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(points.len());
        let mut chosen = Vec::with_capacity(points.len());
        for p in 0..points.len() {
            let column: Vec<f64> = per_level.iter().map(|v| v[p]).collect();
            let j = lepski_select(&column, &self.grid);
            values.push(column[(j - self.grid.j_low) as usize]);
            chosen.push(j);
        }
        Ok((values, chosen))
    }
}

/// Fraction of `m` probes drawn by `probe` that find an anchor at `level`.
pub fn coverage_diagnostic<R: Rng>(
    anchors: &DesignSample,
    level: u32,
    mut probe: impl FnMut(&mut R) -> Vec<f64>,
    rng: &mut R,
    m: usize,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("coverage needs at least one probe".into()));
    }
    if anchors.is_empty() {
        return Ok(0.0);
    }
    let grid = PointGrid::build(anchors, level);
    let half = 0.5 * dyadic(level).recip();
    let mut covered = 0usize;
    for _ in 0..m {
        let x = probe(rng);
        let lo: Vec<f64> = x.iter().map(|v| v - half).collect();
        let hi: Vec<f64> = x.iter().map(|v| v + half).collect();
        if grid.candidates(&lo, &hi).into_iter().any(|i| linf(anchors.point(i), &x) <= half) {
            covered += 1;
        }
    }
    Ok(covered as f64 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{estimate, ThresholdPolicy};

    fn uniform(n: usize, seed: u64, f: impl Fn(f64) -> f64) -> DesignSample {
        let mut rng = crate::rng::stream(seed, 1);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y = x.iter().map(|&v| f(v)).collect();
        DesignSample::from_1d(x, y).unwrap()
    }

    fn haar_config() -> EstimatorConfig {
        EstimatorConfig::new(1, 1).with_policy(ThresholdPolicy::Fixed { inverse_pi: 0.05 })
    }

    #[test]
    fn split_examples() {
        let s = DesignSample::from_1d((0..8).map(|i| i as f64 / 8.0).collect(), (0..8).map(f64::from).collect()).unwrap();
        let a = split(&s, 3).unwrap();
        let b = split(&s, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fit.len(), 4);
        assert_eq!(a.anchors.len(), 4);
        let mut all: Vec<f64> = a.fit.responses().iter().chain(a.anchors.responses()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..8).map(f64::from).collect::<Vec<_>>());
        let odd = DesignSample::from_1d(vec![0.1; 3], vec![0.0; 3]).unwrap();
        assert!(split(&odd, 1).is_err());
    }

    #[test]
    fn anchor_search_rules() {
        let anchors = DesignSample::from_1d(vec![0.30, 0.34, 0.9], vec![0.0; 3]).unwrap();
        let fit = uniform(200, 2, |_| 1.0);
        let split = SplitSample { fit, anchors };
        let e = MovingGridEstimator::new(split, ScalingBasis::haar(), 3, &haar_config()).unwrap();
        // radius 1/16 around 0.6 holds no anchor
        assert_eq!(e.find_anchor(&[0.6]), None);
        assert_eq!(e.find_anchor(&[0.9]), Some(2));
        // both qualify, nearest wins, until the other one is cached
        assert_eq!(e.find_anchor(&[0.335]), Some(1));
        e.estimate(&[0.301]).unwrap();
        assert_eq!(e.find_anchor(&[0.335]), Some(0));
    }

    #[test]
    fn haar_shifted_fit_is_shifted_cell_mean() {
        let s = uniform(2000, 5, |x| (6.0 * x).sin());
        let sp = split(&s, 9).unwrap();
        let e = MovingGridEstimator::new(sp.clone(), ScalingBasis::haar(), 4, &haar_config()).unwrap();
        for x in [0.2, 0.47, 0.81] {
            let a = sp.anchors.point(e.find_anchor(&[x]).unwrap())[0];
            let h = 1.0 / 16.0;
            let inside: Vec<f64> = sp
                .fit
                .points()
                .zip(sp.fit.responses())
                .filter(|(p, _)| p[0] >= a - h / 2.0 && p[0] < a + h / 2.0)
                .map(|(_, &y)| y)
                .collect();
            let mean = inside.iter().sum::<f64>() / inside.len() as f64;
            assert!((e.estimate(&[x]).unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_point_gets_zero() {
        let s = uniform(400, 6, |_| 2.0);
        let mut sp = split(&s, 1).unwrap();
        sp.anchors = DesignSample::from_1d(
            sp.anchors.points().map(|p| p[0] * 0.4).collect(),
            sp.anchors.responses().to_vec(),
        )
        .unwrap();
        let e = MovingGridEstimator::new(sp, ScalingBasis::haar(), 4, &haar_config()).unwrap();
        assert_eq!(e.estimate(&[0.8]).unwrap(), 0.0);
    }

    #[test]
    fn one_regression_per_anchor() {
        let s = uniform(1000, 7, |x| x);
        let sp = split(&s, 2).unwrap();
        let e = MovingGridEstimator::new(sp, ScalingBasis::new(2, 10).unwrap(), 3, &EstimatorConfig::new(2, 1)).unwrap();
        let a = e.find_anchor(&[0.5]).unwrap();
        let anchor_x = e.split().anchors.point(a)[0];
        for dx in [-0.01, 0.0, 0.005, 0.02] {
            e.estimate(&[anchor_x + dx]).unwrap();
        }
        assert_eq!(e.regressions(), 1);
        assert_eq!(e.cache().hits(), 3);
    }

    #[test]
    fn centered_anchor_matches_fixed_grid() {
        let s = uniform(3000, 8, |x| x * x - x);
        let basis = ScalingBasis::new(2, 12).unwrap();
        let config = EstimatorConfig::new(2, 1);
        let table = estimate(&s, 3, &basis, &config).unwrap();
        let centers: Vec<f64> = (0..8).map(|m| (m as f64 + 0.5) / 8.0).collect();
        let sp = SplitSample {
            fit: s.clone(),
            anchors: DesignSample::from_1d(centers.clone(), vec![0.0; 8]).unwrap(),
        };
        let e = MovingGridEstimator::new(sp, basis.clone(), 3, &config).unwrap();
        for (m, c) in centers.iter().enumerate() {
            let x = c + 0.03;
            assert_eq!(e.find_anchor(&[x]), Some(m));
            let fixed = table.evaluate(&basis, &[x]);
            assert!((e.estimate(&[x]).unwrap() - fixed).abs() < 1e-10, "cell {m}");
        }
    }

    #[test]
    fn batch_matches_sequential() {
        let s = uniform(600, 3, |x| (3.0 * x).cos());
        let sp = split(&s, 4).unwrap();
        let config = EstimatorConfig::new(2, 1);
        let basis = ScalingBasis::new(2, 10).unwrap();
        let queries: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let a = MovingGridEstimator::new(sp.clone(), basis.clone(), 3, &config).unwrap();
        let b = MovingGridEstimator::new(sp, basis, 3, &config).unwrap();
        let batch = a.estimate_many(&queries).unwrap();
        let seq: Vec<f64> = queries.iter().map(|q| b.estimate(q).unwrap()).collect();
        assert_eq!(batch, seq);
        assert_eq!(a.regressions(), b.regressions());
    }

    #[test]
    fn coverage_examples() {
        let mut rng = crate::rng::stream(1, 0);
        let one = DesignSample::from_1d(vec![0.5], vec![0.0]).unwrap();
        let full = coverage_diagnostic(&one, 0, |r: &mut crate::rng::StreamRng| vec![r.random::<f64>()], &mut rng, 100).unwrap();
        assert_eq!(full, 1.0);
        let none = coverage_diagnostic(&DesignSample::empty(1), 3, |r: &mut crate::rng::StreamRng| vec![r.random::<f64>()], &mut rng, 10).unwrap();
        assert_eq!(none, 0.0);
        assert!(coverage_diagnostic(&one, 0, |_: &mut crate::rng::StreamRng| vec![0.0], &mut rng, 0).is_err());
    }
}

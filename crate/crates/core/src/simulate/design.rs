//! Piecewise-constant random design densities and snapped samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

pub const SEGMENTS: usize = 10;

/// `mu = sum_k p_k 10 1_{A_k}` with `A_k = [k/10, (k+1)/10)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDensity {
    pub probs: [f64; SEGMENTS],
}

impl PiecewiseDensity {
    pub fn uniform() -> Self {
        Self { probs: [1.0 / SEGMENTS as f64; SEGMENTS] }
    }

    fn segment(x: f64) -> usize {
        ((x * SEGMENTS as f64).floor() as usize).min(SEGMENTS - 1)
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        self.probs[Self::segment(x)] * SEGMENTS as f64
    }

    pub fn min_density(&self) -> f64 {
        self.probs.iter().fold(f64::INFINITY, |m, &p| m.min(p)) * SEGMENTS as f64
    }

    pub fn max_density(&self) -> f64 {
        self.probs.iter().fold(0.0, |m: f64, &p| m.max(p)) * SEGMENTS as f64
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = SEGMENTS - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                k = i;
                break;
            }
        }
        (k as f64 + rng.random::<f64>()) / SEGMENTS as f64
    }
}

/// `u_k ~ U[1/4, 1]` i.i.d., `p_k = u_k / sum u`.
pub fn random_density(seed: u64) -> PiecewiseDensity {
    let mut rng = rng::stream(seed, 0);
    let u: Vec<f64> = (0..SEGMENTS).map(|_| rng.random_range(0.25..=1.0)).collect();
    let total: f64 = u.iter().sum();
    let mut probs = [0.0; SEGMENTS];
    for (p, v) in probs.iter_mut().zip(&u) {
        *p = v / total;
    }
    PiecewiseDensity { probs }
}

/// Nearest node of the `2^-grid_exp` grid.
pub fn snap(x: f64, grid_exp: u32) -> f64 {
    let scale = (grid_exp as f64).exp2();
    (x * scale).round() / scale
}

/// Draws `n_raw` points, snaps them to the grid and keeps the first point
/// landing on each node.
pub fn sample_design<R: Rng>(density: &PiecewiseDensity, n_raw: usize, grid_exp: u32, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_raw).map(|_| snap(density.draw(rng), grid_exp)).collect();
    dedupe(&raw, grid_exp)
}

/// First occurrence per grid node, input order preserved.
pub fn dedupe(snapped: &[f64], grid_exp: u32) -> Vec<f64> {
    let scale = (grid_exp as f64).exp2();
    let mut seen = std::collections::HashSet::with_capacity(snapped.len());
    snapped
        .iter()
        .copied()
        .filter(|x| seen.insert((x * scale).round() as i64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_floor_and_mass() {
        for seed in 0..50 {
            let d = random_density(seed);
            assert!(d.min_density() >= 0.25 - 1e-12);
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_weights_are_uniform() {
        let d = PiecewiseDensity::uniform();
        assert!((d.density(0.05) - 1.0).abs() < 1e-12);
        assert!((d.density(0.95) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dedupe_keeps_first() {
        let h = 2f64.powi(-15);
        let v = dedupe(&[3.0 * h, 5.0 * h, 3.0 * h], 15);
        assert_eq!(v, vec![3.0 * h, 5.0 * h]);
    }

    #[test]
    fn snapped_design() {
        let d = random_density(3);
        let mut total = 0usize;
        for seed in 0..20 {
            let mut rng = rng::stream(seed, 1);
            let x = sample_design(&d, 3000, 15, &mut rng);
            assert!(x.iter().all(|v| (v * 32768.0).fract() == 0.0 && (0.0..=1.0).contains(v)));
            total += 3000 - x.len();
        }
        let removed = total as f64 / 20.0;
        assert!(removed > 90.0 && removed < 220.0, "removed {removed}");
    }
}

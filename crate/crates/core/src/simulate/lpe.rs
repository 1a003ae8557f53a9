//! Local polynomial estimator with a box kernel, one regression per
//! evaluation point. Used as the cost baseline.

use nalgebra::{DMatrix, DVector};

use crate::lattice::DesignSample;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpeResult {
    pub estimates: Vec<f64>,
    pub valid: Vec<bool>,
    pub regressions: usize,
}

/// Fits a degree-`degree` polynomial by least squares on
/// `{i : |X_i - x0| <= bandwidth}` for every `x0` in `eval_points`.
/// Rank-deficient windows give `0` and `valid = false`. One-dimensional
/// designs only.
pub fn lpe_baseline(sample: &DesignSample, eval_points: &[f64], bandwidth: f64, degree: usize) -> Result<LpeResult> {
    if sample.dim() != 1 {
        return Err(Error::InvalidArgument("the local polynomial baseline is one-dimensional".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample.point(a)[0].total_cmp(&sample.point(b)[0]));
    let xs: Vec<f64> = order.iter().map(|&i| sample.point(i)[0]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| sample.response(i)).collect();
    let p = degree + 1;

    let mut estimates = Vec::with_capacity(eval_points.len());
    let mut valid = Vec::with_capacity(eval_points.len());
    for &x0 in eval_points {
        let lo = xs.partition_point(|&x| x < x0 - bandwidth);
        let hi = xs.partition_point(|&x| x <= x0 + bandwidth);
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut powers = vec![0.0; p];
        for (x, y) in xs[lo..hi].iter().zip(&ys[lo..hi]) {
            let u = (x - x0) / bandwidth;
            let mut v = 1.0;
            for pw in powers.iter_mut() {
                *pw = v;
                v *= u;
            }
            for a in 0..p {
                rhs[a] += powers[a] * y;
                for b in 0..p {
                    gram[(a, b)] += powers[a] * powers[b];
                }
            }
        }
        let solved = if hi - lo >= p {
            gram.clone().cholesky().map(|c| c.solve(&rhs)).filter(|_| {
                let eig = gram.clone().symmetric_eigenvalues();
                let (min, max) = eig.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
                min > 1e-12 * max
            })
        } else {
            None
        };
        match solved {
            Some(beta) => {
                estimates.push(beta[0]);
                valid.push(true);
            }
            None => {
                estimates.push(0.0);
                valid.push(false);
            }
        }
    }
    Ok(LpeResult { estimates, valid, regressions: eval_points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_window_mean() {
        let s = DesignSample::from_1d(vec![0.1, 0.2, 0.3, 0.9], vec![1.0, 2.0, 6.0, 10.0]).unwrap();
        let r = lpe_baseline(&s, &[0.2], 0.11, 0).unwrap();
        assert!((r.estimates[0] - 3.0).abs() < 1e-12);
        assert_eq!(r.regressions, 1);
    }

    #[test]
    fn reproduces_polynomials() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let y: Vec<f64> = x.iter().map(|t| 1.0 - 2.0 * t + 3.0 * t * t).collect();
        let s = DesignSample::from_1d(x.clone(), y).unwrap();
        let r = lpe_baseline(&s, &x[20..180], 0.05, 2).unwrap();
        for (x0, e) in x[20..180].iter().zip(&r.estimates) {
            assert!((e - (1.0 - 2.0 * x0 + 3.0 * x0 * x0)).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_window_flagged() {
        let s = DesignSample::from_1d(vec![0.1, 0.2], vec![1.0, 1.0]).unwrap();
        let r = lpe_baseline(&s, &[0.8], 0.05, 1).unwrap();
        assert_eq!((r.estimates[0], r.valid[0]), (0.0, false));
    }
}

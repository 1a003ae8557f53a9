//! Finite-sample tail bounds for the fixed-level and moving-grid
//! estimators, and Monte-Carlo frequencies to hold them against.
//!
//! Every bound is computed as a log value first; `raw` is its exponential
//! and `clipped` caps it at one.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::lattice::locate;
use crate::regress::{accumulate, evaluate_fit, LocalSystem};
use crate::scaling::{dyadic, ScalingBasis};
use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// `|Y - eta(X)| <= K`.
    Bounded { k: f64 },
    /// `Y - eta(X) ~ N(0, sigma^2)`.
    Gaussian { sigma: f64 },
}

impl NoiseModel {
    /// One noise draw; the bounded model is a standard normal truncated to
    /// `[-K, K]`.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * Distribution::<f64>::sample(&StandardNormal, rng),
            NoiseModel::Bounded { k } => loop {
                let z: f64 = StandardNormal.sample(rng);
                if z.abs() <= k {
                    break z;
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub j: u32,
    pub d: usize,
    pub r: usize,
    pub pi_n: f64,
    pub mu_max: f64,
    pub noise: NoiseModel,
    pub s: f64,
    pub m: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.pi_n, self.mu_max, self.s, self.m];
        if self.n == 0 || self.d == 0 || self.r == 0 || positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("bound parameters must be positive: {self:?}")));
        }
        if self.pi_n < 1.0 {
            return Err(Error::InvalidArgument(format!("pi_n must be >= 1, got {}", self.pi_n)));
        }
        match self.noise {
            NoiseModel::Bounded { k } if !(k > 0.0) => Err(Error::InvalidArgument(format!("K must be positive, got {k}"))),
            NoiseModel::Gaussian { sigma } if !(sigma > 0.0) => {
                Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    /// `R = 2r - 1`.
    pub fn big_r(&self) -> f64 {
        (2 * self.r - 1) as f64
    }

    fn rd(&self) -> f64 {
        self.big_r().powi(self.d as i32)
    }

    fn half_scale(&self) -> f64 {
        dyadic(self.j).powf(self.d as f64 / 2.0)
    }

    /// Smallest admissible `delta` (exclusive):
    /// `2 M 2^{-js} max(1, 3 pi_n R^d mu_max)`.
    pub fn validity_floor(&self) -> f64 {
        2.0 * self.m * (-(self.j as f64) * self.s).exp2() * (3.0 * self.pi_n * self.rd() * self.mu_max).max(1.0)
    }
}

/// A probability bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub ln_raw: f64,
    pub raw: f64,
    pub clipped: f64,
}

impl Bound {
    fn from_ln(ln_raw: f64) -> Self {
        let raw = ln_raw.exp();
        Self { ln_raw, raw, clipped: raw.min(1.0) }
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

fn ln_lambda(delta: f64, p: &BoundParams) -> f64 {
    let n = p.n as f64;
    let h = p.half_scale();
    match p.noise {
        NoiseModel::Bounded { k } => {
            std::f64::consts::LN_2 - n * delta * delta / (18.0 * k * k * p.mu_max + 4.0 * k * h * delta)
        }
        NoiseModel::Gaussian { sigma } => {
            let v = p.mu_max + h * delta;
            let gauss = (2.0 * sigma).ln() + 0.5 * v.ln()
                - delta.ln()
                - 0.5 * (2.0 * std::f64::consts::PI * n).ln()
                - n * delta * delta / (sigma * sigma * v);
            let bernstein = std::f64::consts::LN_2 - n * delta * delta / (2.0 * p.mu_max + 4.0 / 3.0 * h * delta);
            ln_add(gauss.min(0.0), bernstein)
        }
    }
}

/// `Lambda(delta)` of the noise model.
pub fn lambda_tail(delta: f64, p: &BoundParams) -> Result<Bound> {
    p.validate()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    Ok(Bound::from_ln(ln_lambda(delta, p)))
}

/// Exponent of the small-eigenvalue term at threshold `t`.
fn ln_eig_exponent(t: f64, p: &BoundParams) -> f64 {
    let rd = p.rd();
    let n_cell = p.n as f64 * dyadic(p.j).powi(p.d as i32).recip();
    -n_cell * t * t / (2.0 * p.mu_max * rd.powi(4) + 4.0 / 3.0 * rd * rd * t)
}

fn ln_deviation(delta: f64, p: &BoundParams, coefficient: f64) -> Result<f64> {
    p.validate()?;
    let floor = p.validity_floor();
    if !(delta > floor) {
        return Err(Error::BelowValidityFloor { delta, floor });
    }
    let rd = p.rd();
    let eig = if delta <= p.m {
        (coefficient * rd * rd).ln() + ln_eig_exponent(p.pi_n.recip(), p)
    } else {
        f64::NEG_INFINITY
    };
    let arg = delta / (p.half_scale() * 2.0 * p.pi_n * rd);
    Ok(ln_add(eig, rd.ln() + ln_lambda(arg, p)))
}

/// Bound on `P(|eta(x) - eta_j(x)| >= delta)` for the fixed-grid estimator.
pub fn deviation_bound(delta: f64, p: &BoundParams) -> Result<Bound> {
    ln_deviation(delta, p, 2.0).map(Bound::from_ln)
}

/// Same bound for the moving-grid estimator: the eigenvalue term carries
/// `3 R^{2d}` instead of `2 R^{2d}`.
pub fn maltese_deviation_bound(delta: f64, p: &BoundParams) -> Result<Bound> {
    ln_deviation(delta, p, 3.0).map(Bound::from_ln)
}

/// Bound on `P(lambda_min(Q_H) <= t)`. The caller is responsible for
/// `t <= g_min / 2`.
pub fn eig_tail(t: f64, p: &BoundParams) -> Result<Bound> {
    p.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let rd = p.rd();
    Ok(Bound::from_ln((2.0 * rd * rd).ln() + ln_eig_exponent(t, p)))
}

/// Fraction of `true` entries.
pub fn empirical_frequency(events: &[bool]) -> f64 {
    if events.is_empty() {
        return 0.0;
    }
    events.iter().filter(|&&e| e).count() as f64 / events.len() as f64
}

/// Monte-Carlo frequencies for `eta = 0` on a uniform design over
/// `[0,1]^d`, at one query point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    /// `P(|eta_j(x)| >= delta)` for each requested `delta`.
    pub deviation: Vec<f64>,
    /// `P(lambda_min(Q_H) < t)` for each requested `t`.
    pub eigen: Vec<f64>,
}

/// Runs `reps` samples of size `p.n` and records the deviation of the
/// fixed-level estimator (threshold `1/pi_n`, clamp `M`) at `x` and the
/// smallest Gram eigenvalue of the cell holding `x`.
pub fn monte_carlo_frequencies(
    p: &BoundParams,
    x: &[f64],
    deltas: &[f64],
    ts: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Frequencies> {
    p.validate()?;
    if x.len() != p.d {
        return Err(Error::InvalidArgument(format!("query point has dimension {}, expected {}", x.len(), p.d)));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    let basis = if p.r == 1 { ScalingBasis::haar() } else { ScalingBasis::new(p.r, crate::scaling::DEFAULT_DEPTH)? };
    let cell = locate(x, p.j);
    let jobs: Vec<u64> = (0..reps as u64).collect();
    let outcomes = par::map_collect(&jobs, |&rep| -> Result<(f64, f64)> {
        let mut rng = rng::stream(seed, rep);
        let mut inside: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut u = vec![0.0; p.d];
        for _ in 0..p.n {
            for ui in u.iter_mut() {
                *ui = rng.random();
            }
            let y = p.noise.draw(&mut rng);
            if cell.contains(&u) {
                inside.extend_from_slice(&u);
                ys.push(y);
            }
        }
        let rows = inside.chunks_exact(p.d).zip(ys.iter().copied());
        let (gram, moment) = accumulate(&cell, rows, p.n, &basis);
        let system = LocalSystem::new(cell.clone(), gram, moment, ys.len())?;
        let fit = system.fit(p.pi_n.recip());
        let value = evaluate_fit(&fit, &basis, x, Some(p.m))?;
        Ok((value.abs(), fit.lambda_min))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let deviation = deltas
        .iter()
        .map(|&d| empirical_frequency(&outcomes.iter().map(|o| o.0 >= d).collect::<Vec<_>>()))
        .collect();
    let eigen = ts
        .iter()
        .map(|&t| empirical_frequency(&outcomes.iter().map(|o| o.1 < t).collect::<Vec<_>>()))
        .collect();
    Ok(Frequencies { deviation, eigen })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BoundParams {
        BoundParams {
            n: 4096,
            j: 5,
            d: 1,
            r: 1,
            pi_n: 2.0,
            mu_max: 1.0,
            noise: NoiseModel::Gaussian { sigma: 1.0 },
            s: 0.99,
            m: 1.0,
        }
    }

    #[test]
    fn lambda_decreases_in_delta() {
        let p = params();
        let mut last = f64::INFINITY;
        for i in 1..60 {
            let v = lambda_tail(i as f64 * 0.05, &p).unwrap().raw;
            assert!(v <= last);
            last = v;
        }
        assert!(last < 1e-100);
    }

    #[test]
    fn bounded_lambda_inverts_to_one() {
        let k = 1.5;
        let p = BoundParams { noise: NoiseModel::Bounded { k }, ..params() };
        // n d^2 = ln2 (18 K^2 mu + 4 K h d): quadratic in d
        let (n, h) = (p.n as f64, p.half_scale());
        let a = n;
        let b = -std::f64::consts::LN_2 * 4.0 * k * h;
        let c = -std::f64::consts::LN_2 * 18.0 * k * k;
        let delta = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((lambda_tail(delta, &p).unwrap().raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_lambda_dominates_bernstein_part() {
        let p = params();
        for delta in [0.01, 0.1, 0.5] {
            let h = p.half_scale();
            let bern = 2.0 * (-(p.n as f64) * delta * delta / (2.0 + 4.0 / 3.0 * h * delta)).exp();
            assert!(lambda_tail(delta, &p).unwrap().raw >= bern);
        }
    }

    #[test]
    fn deviation_floor_enforced() {
        let p = params();
        let floor = p.validity_floor();
        assert!(matches!(deviation_bound(floor * 0.99, &p), Err(Error::BelowValidityFloor { .. })));
        assert!(deviation_bound(floor * 1.01, &p).is_ok());
    }

    #[test]
    fn indicator_drops_above_m() {
        let p = params();
        let delta = 1.2;
        let b = deviation_bound(delta, &p).unwrap();
        let rest = lambda_tail(delta / (p.half_scale() * 2.0 * p.pi_n), &p).unwrap();
        assert!((b.raw - rest.raw).abs() <= 1e-15 * rest.raw.max(1e-300));
        assert_eq!(b, maltese_deviation_bound(delta, &p).unwrap());
    }

    #[test]
    fn r_one_reduces() {
        let p = params();
        let delta = 0.8;
        let n_cell = p.n as f64 / 32.0;
        let inv = 0.5;
        let first = 2.0 * (-n_cell * inv * inv / (2.0 + 4.0 / 3.0 * inv)).exp();
        let second = lambda_tail(delta * 32f64.sqrt().recip() / 4.0, &p).unwrap().raw;
        let got = deviation_bound(delta, &p).unwrap().raw;
        assert!((got - (first + second)).abs() < 1e-12 * got.max(1e-12));
        let eig = eig_tail(inv, &p).unwrap().raw;
        assert!((eig - first).abs() < 1e-15);
    }

    #[test]
    fn maltese_coefficient_identity() {
        for r in 1..=3 {
            let p = BoundParams { r, j: 8, n: 1 << 22, ..params() };
            let delta = p.validity_floor() * 1.5;
            assert!(delta <= p.m);
            let rd2 = ((2 * r - 1) as f64).powi(2);
            let extra = rd2 * (ln_eig_exponent(0.5, &p)).exp();
            let a = deviation_bound(delta, &p).unwrap().raw;
            let b = maltese_deviation_bound(delta, &p).unwrap().raw;
            assert!((b - (a + extra)).abs() <= 1e-12 * b, "r={r}");
        }
    }

    #[test]
    fn doubling_n_decreases() {
        let mut p = params();
        let delta = 0.7;
        let mut last = deviation_bound(delta, &p).unwrap().raw;
        for _ in 0..8 {
            p.n *= 2;
            let v = deviation_bound(delta, &p).unwrap().raw;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn eig_tail_limits() {
        let p = BoundParams { r: 2, ..params() };
        let b = eig_tail(1e-12, &p).unwrap();
        assert!((b.raw - 18.0).abs() < 1e-6);
        assert_eq!(b.clipped, 1.0);
    }

    #[test]
    fn log_space_survives_large_n() {
        let p = BoundParams { n: 1 << 40, ..params() };
        let b = deviation_bound(0.5, &p).unwrap();
        assert!(b.ln_raw < -1e4 && b.ln_raw.is_finite());
        assert_eq!(b.raw, 0.0);
    }

    #[test]
    fn monte_carlo_below_bounds() {
        let p = BoundParams { n: 4096, j: 6, ..params() };
        let deltas = [0.2, 0.3];
        let ts = [0.25, 0.5];
        let f = monte_carlo_frequencies(&p, &[0.3], &deltas, &ts, 50, 9).unwrap();
        for (d, fr) in deltas.iter().zip(&f.deviation) {
            assert!(*fr <= deviation_bound(*d, &p).unwrap().clipped);
        }
        for (t, fr) in ts.iter().zip(&f.eigen) {
            assert!(*fr <= eig_tail(*t, &p).unwrap().clipped);
        }
    }

    #[test]
    fn bounded_noise_respects_k() {
        let mut rng = rng::stream(1, 1);
        let m = NoiseModel::Bounded { k: 0.5 };
        assert!((0..1000).all(|_| m.draw(&mut rng).abs() <= 0.5));
    }
}

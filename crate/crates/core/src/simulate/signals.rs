//! Doppler, HeaviSine, Bumps and Blocks (Donoho and Johnstone), plus custom
//! closed forms.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const POSITIONS: [f64; 11] = [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
const BLOCK_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMP_HEIGHTS: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMP_WIDTHS: [f64; 11] = [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005];

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Doppler,
    HeaviSine,
    Bumps,
    Blocks,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [Benchmark::Doppler, Benchmark::HeaviSine, Benchmark::Bumps, Benchmark::Blocks];

    pub fn eval(self, t: f64) -> f64 {
        match self {
            Benchmark::Doppler => (t * (1.0 - t)).max(0.0).sqrt() * (2.0 * std::f64::consts::PI * 1.05 / (t + 0.05)).sin(),
            Benchmark::HeaviSine => {
                4.0 * (4.0 * std::f64::consts::PI * t).sin() - sgn(t - 0.3) - sgn(0.72 - t)
            }
            Benchmark::Bumps => POSITIONS
                .iter()
                .zip(BUMP_HEIGHTS.iter().zip(&BUMP_WIDTHS))
                .map(|(p, (h, w))| h * (1.0 + ((t - p) / w).abs()).powi(-4))
                .sum(),
            Benchmark::Blocks => POSITIONS
                .iter()
                .zip(&BLOCK_HEIGHTS)
                .map(|(p, h)| h * (1.0 + sgn(t - p)) / 2.0)
                .sum(),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Benchmark::Doppler => "doppler",
            Benchmark::HeaviSine => "heavisine",
            Benchmark::Bumps => "bumps",
            Benchmark::Blocks => "blocks",
        })
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "doppler" => Ok(Benchmark::Doppler),
            "heavisine" => Ok(Benchmark::HeaviSine),
            "bumps" => Ok(Benchmark::Bumps),
            "blocks" => Ok(Benchmark::Blocks),
            other => Err(Error::InvalidArgument(format!(
                "unknown signal '{other}' (expected doppler, heavisine, bumps or blocks)"
            ))),
        }
    }
}

#[derive(Clone)]
enum Shape {
    Benchmark(Benchmark),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A signal on `[0,1]` with an amplitude factor.
#[derive(Clone)]
pub struct SignalSpec {
    name: String,
    shape: Shape,
    scale: f64,
}

impl fmt::Debug for SignalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignalSpec").field("name", &self.name).field("scale", &self.scale).finish()
    }
}

impl SignalSpec {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), shape: Shape::Custom(Arc::new(f)), scale: 1.0 }
    }

    pub fn benchmark(which: Benchmark) -> Self {
        Self { name: which.to_string(), shape: Shape::Benchmark(which), scale: 1.0 }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn eval(&self, t: f64) -> f64 {
        let base = match &self.shape {
            Shape::Benchmark(b) => b.eval(t),
            Shape::Custom(f) => f(t),
        };
        self.scale * base
    }

    /// Values at `k 2^-grid_exp`, `k = 0..=2^grid_exp`.
    pub fn on_grid(&self, grid_exp: u32) -> Vec<f64> {
        let size = 1usize << grid_exp;
        (0..=size).map(|k| self.eval(k as f64 / size as f64)).collect()
    }
}

/// Named benchmark signal.
pub fn benchmark_signal(name: &str) -> Result<SignalSpec> {
    Ok(SignalSpec::benchmark(name.parse()?))
}

/// Rescales `signal` so that its root mean square over the dyadic grid is
/// `snr * sigma`.
pub fn scale_snr(signal: &SignalSpec, grid_exp: u32, sigma: f64, snr: f64) -> Result<SignalSpec> {
    if !(sigma > 0.0) || !(snr > 0.0) {
        return Err(Error::InvalidArgument(format!("need sigma > 0 and snr > 0 (sigma = {sigma}, snr = {snr})")));
    }
    let base = signal.clone().with_scale(1.0);
    let rms = grid_rms(&base, grid_exp);
    if !(rms > 0.0) || !rms.is_finite() {
        return Err(Error::InvalidArgument(format!("signal '{}' has zero or non-finite grid RMS", signal.name)));
    }
    Ok(base.with_scale(snr * sigma / rms))
}

pub fn grid_rms(signal: &SignalSpec, grid_exp: u32) -> f64 {
    let values = signal.on_grid(grid_exp);
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// `max |eta|` over the dyadic grid.
pub fn grid_sup(signal: &SignalSpec, grid_exp: u32) -> f64 {
    signal.on_grid(grid_exp).iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavisine_reference_values() {
        assert!((Benchmark::HeaviSine.eval(0.5) + 2.0).abs() < 1e-12);
        // sign terms: t < 0.3 gives +1 - 1
        assert!((Benchmark::HeaviSine.eval(0.1) - 4.0 * (0.4 * std::f64::consts::PI).sin()).abs() < 1e-12);
    }

    #[test]
    fn blocks_piecewise_constant() {
        let a = Benchmark::Blocks.eval(0.3);
        let b = Benchmark::Blocks.eval(0.35);
        assert_eq!(a, b);
        assert_eq!(Benchmark::Blocks.eval(0.05), 0.0);
        assert!((Benchmark::Blocks.eval(0.11) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn doppler_vanishes_at_zero() {
        assert!(Benchmark::Doppler.eval(1e-9).abs() < 1e-4);
        assert_eq!(Benchmark::Doppler.eval(0.0), 0.0);
    }

    #[test]
    fn bumps_peak() {
        let v = Benchmark::Bumps.eval(0.1);
        assert!(v > 4.0 && v < 4.1, "{v}");
    }

    #[test]
    fn snr_scaling() {
        for b in Benchmark::ALL {
            let s = scale_snr(&SignalSpec::benchmark(b), 15, 1.0, 7.0).unwrap();
            assert!((grid_rms(&s, 15) - 7.0).abs() < 1e-10);
            let one = scale_snr(&SignalSpec::benchmark(b), 12, 1.0, 1.0).unwrap();
            assert!((grid_rms(&one, 12) - 1.0).abs() < 1e-12);
        }
        assert!(scale_snr(&SignalSpec::custom("zero", |_| 0.0), 10, 1.0, 7.0).is_err());
    }

    #[test]
    fn names_parse() {
        assert_eq!("HeaviSine".parse::<Benchmark>().unwrap(), Benchmark::HeaviSine);
        assert!(benchmark_signal("wiggle").is_err());
        assert!(benchmark_signal("bumps").unwrap().on_grid(15).iter().all(|v| v.is_finite()));
    }
}

//! Browser demo bindings.
//!
//! Three operations: the scaling function of a given order, a fit of a
//! benchmark signal (fixed level or Lepski-adaptive), and the deviation
//! bound as a function of `n`.

use mrproj::bounds::{deviation_bound, BoundParams, NoiseModel};
use mrproj::lattice::DesignSample;
use mrproj::regress::{estimate, EstimatorConfig, Fallback, ThresholdPolicy};
use mrproj::scaling::{ScalingBasis, MAX_ORDER};
use mrproj::simulate::{NoiseKind, Study, StudyConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: mrproj::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[x0, phi0, x1, phi1, ...]` for the order-`order` scaling function,
/// thinned to about `points` samples.
#[wasm_bindgen]
pub fn scaling_curve(order: usize, points: usize) -> Result<Vec<f64>, JsError> {
    if order == 0 || order > MAX_ORDER {
        return Err(JsError::new(&format!("order must lie in 1..={MAX_ORDER}")));
    }
    let basis = if order == 1 { ScalingBasis::haar() } else { ScalingBasis::new(order, 8).map_err(js_err)? };
    let table: Vec<(f64, f64)> = basis.table().collect();
    let step = (table.len() / points.max(2)).max(1);
    Ok(table.iter().step_by(step).flat_map(|&(x, v)| [x, v]).collect())
}

/// A noisy benchmark signal and its estimate.
#[wasm_bindgen]
pub struct SignalFit {
    x: Vec<f64>,
    y_true: Vec<f64>,
    y_noisy: Vec<f64>,
    eta_hat: Vec<f64>,
    levels: Vec<u32>,
    rel_rmse: f64,
    regressions: usize,
}

#[wasm_bindgen]
impl SignalFit {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn y_true(&self) -> Vec<f64> {
        self.y_true.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn y_noisy(&self) -> Vec<f64> {
        self.y_noisy.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn eta_hat(&self) -> Vec<f64> {
        self.eta_hat.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> Vec<u32> {
        self.levels.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn rel_rmse(&self) -> f64 {
        self.rel_rmse
    }
    #[wasm_bindgen(getter)]
    pub fn regressions(&self) -> usize {
        self.regressions
    }
}

/// Fits `signal` on a random design of `n_raw` draws. `level < 0` selects
/// the adaptive estimator.
#[wasm_bindgen]
pub fn fit_signal(signal: &str, n_raw: usize, snr: f64, order: usize, level: i32, seed: u64) -> Result<SignalFit, JsError> {
    let config = StudyConfig {
        signal: signal.to_lowercase(),
        n_raw,
        snr,
        order,
        seed,
        reps: 1,
        noise: NoiseKind::Gaussian,
        timing: false,
        ..StudyConfig::default()
    };
    let study = Study::new(config).map_err(js_err)?;
    let (report, trial) = study.run_trial(0).map_err(js_err)?;
    if level < 0 {
        return Ok(SignalFit {
            x: trial.x,
            y_true: trial.y_true,
            y_noisy: trial.y_noisy,
            eta_hat: trial.eta_hat,
            levels: trial.j_at,
            rel_rmse: report.rel_rmse,
            regressions: report.regressions_total,
        });
    }
    let j = level as u32;
    let sample = DesignSample::from_1d(trial.x.clone(), trial.y_noisy.clone()).map_err(js_err)?;
    // a single-level decile always rejects some cells; borrow from their neighbors
    let config = EstimatorConfig::new(order, 1)
        .with_policy(ThresholdPolicy::EmpiricalDecile)
        .with_fallback(Fallback::NeighborAverage);
    let table = estimate(&sample, j, &study.basis, &config).map_err(js_err)?;
    let eta_hat: Vec<f64> = sample.points().map(|p| table.evaluate(&study.basis, p)).collect();
    let sup = trial.y_true.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mse = eta_hat.iter().zip(&trial.y_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / eta_hat.len() as f64;
    Ok(SignalFit {
        levels: vec![j; eta_hat.len()],
        rel_rmse: mse.sqrt() / sup,
        regressions: table.regressions(),
        x: trial.x,
        y_true: trial.y_true,
        y_noisy: trial.y_noisy,
        eta_hat,
    })
}

/// `[n, clipped bound, ...]` for `n = 2^lo ..= 2^hi` at a Haar cell with
/// uniform design and standard Gaussian noise.
#[wasm_bindgen]
pub fn bound_curve(level: u32, delta: f64, lo: u32, hi: u32) -> Result<Vec<f64>, JsError> {
    if lo > hi || hi > 40 {
        return Err(JsError::new("need lo <= hi <= 40"));
    }
    let mut out = Vec::new();
    for e in lo..=hi {
        let n = 1usize << e;
        let p = BoundParams {
            n,
            j: level,
            d: 1,
            r: 1,
            pi_n: 2.0,
            mu_max: 1.0,
            noise: NoiseModel::Gaussian { sigma: 1.0 },
            s: 0.99,
            m: 1.0,
        };
        let b = deviation_bound(delta, &p).map_err(js_err)?;
        out.extend([n as f64, b.clipped]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_curve_pairs() {
        let c = scaling_curve(2, 100).unwrap();
        assert_eq!(c.len() % 2, 0);
        assert!(c.len() >= 200);
        assert_eq!(c[0], -1.0);
    }

    #[test]
    fn fixed_and_adaptive_fits() {
        let fixed = fit_signal("HeaviSine", 600, 7.0, 3, 5, 1).unwrap();
        assert!(fixed.levels().iter().all(|&j| j == 5));
        assert_eq!(fixed.regressions(), 32);
        let adaptive = fit_signal("heavisine", 600, 7.0, 3, -1, 1).unwrap();
        assert_eq!(adaptive.x().len(), fixed.x().len());
        assert!(adaptive.rel_rmse() > 0.0 && adaptive.rel_rmse() < 1.0);
    }

    #[test]
    fn bound_curve_is_monotone() {
        let c = bound_curve(6, 0.5, 11, 15).unwrap();
        let b: Vec<f64> = c.chunks(2).map(|p| p[1]).collect();
        assert!(b.windows(2).all(|w| w[1] <= w[0]));
    }
}

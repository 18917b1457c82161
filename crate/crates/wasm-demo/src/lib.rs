//! WebAssembly bindings for the static demo page in `www/`.
//!
//! The plain functions return `Result<_, String>` so they can be tested on
//! the host; the exported wrappers turn errors into JS exceptions.

use gpv::bootstrap::{uniform_band, BootstrapConfig, Setup};
use gpv::dgp::{self, DgpSpec};
use gpv::estimator::GpvEstimator;
use gpv::harness::DEFAULT_TRIM_SCALE;
use gpv::kernels::{triweight, triweight_order4};
use gpv::oracles::ratio_qb_over_gpv;
use wasm_bindgen::prelude::*;

/// Simulated data, point estimate and uniform band on a grid.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Band {
    grid: Vec<f64>,
    f_hat: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    truth: Vec<f64>,
    zeta: f64,
    covered: bool,
}

#[wasm_bindgen]
impl Band {
    #[wasm_bindgen(getter)]
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn f_hat(&self) -> Vec<f64> {
        self.f_hat.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    #[wasm_bindgen(getter)]
    pub fn covered(&self) -> bool {
        self.covered
    }
}

fn simulate(theta: f64, n: usize, auctions: usize, seed: u64) -> Result<(DgpSpec, gpv::sample::AuctionSample), String> {
    let spec = DgpSpec::homogeneous(theta, n, auctions, seed).map_err(|e| e.to_string())?;
    let s = dgp::sample(&spec).map_err(|e| e.to_string())?;
    Ok((spec, s))
}

#[allow(clippy::too_many_arguments)]
pub fn band_core(
    theta: f64,
    n: usize,
    auctions: usize,
    seed: u64,
    boot_reps: usize,
    alpha: f64,
    lo: f64,
    hi: f64,
) -> Result<Band, String> {
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(format!("need 0 < lo < hi < 1, got [{lo}, {hi}]"));
    }
    let (_, s) = simulate(theta, n, auctions, seed)?;
    let est = GpvEstimator::rule_of_thumb(s.observed(), DEFAULT_TRIM_SCALE, triweight(), triweight_order4()).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..=80).map(|i| lo + (hi - lo) * i as f64 / 80.0).collect();
    let cfg = BootstrapConfig::new(boot_reps, alpha, seed ^ 0x5eed).map_err(|e| e.to_string())?;
    let b = uniform_band(s.observed(), &grid, &cfg, &Setup::of(&est)).map_err(|e| e.to_string())?;
    let f = |v: f64| theta * v.powf(theta - 1.0);
    let truth: Vec<f64> = grid.iter().map(|&v| f(v)).collect();
    Ok(Band {
        covered: b.contains(f),
        grid,
        f_hat: b.f_hat,
        lower: b.lower,
        upper: b.upper,
        truth,
        zeta: b.zeta_star,
    })
}

/// `V_QB / V_GPV` for `θ` on `points` values in `[theta_lo, theta_hi]`,
/// returned as interleaved `(θ, ratio)` pairs.
pub fn ratio_curve_core(n: usize, theta_lo: f64, theta_hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || !(theta_lo > 0.0 && theta_lo < theta_hi) {
        return Err("need at least two points and 0 < theta_lo < theta_hi".into());
    }
    let k = triweight();
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let t = theta_lo + (theta_hi - theta_lo) * i as f64 / (points - 1) as f64;
        out.push(t);
        out.push(ratio_qb_over_gpv(t, n, &k).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Interleaved `(valuation, pseudo-valuation)` pairs of the kept observations.
pub fn pseudo_values_core(theta: f64, n: usize, auctions: usize, seed: u64) -> Result<Vec<f64>, String> {
    let (_, s) = simulate(theta, n, auctions, seed)?;
    let est = GpvEstimator::rule_of_thumb(s.observed(), DEFAULT_TRIM_SCALE, triweight(), triweight_order4()).map_err(|e| e.to_string())?;
    let vals = s.oracle_valuations().ok_or("simulation has no valuations")?;
    let fit = &est.fit;
    Ok(vals
        .iter()
        .flatten()
        .zip(fit.pseudo_values())
        .zip(fit.trim_flags())
        .filter(|(_, &k)| k)
        .flat_map(|((&v, &p), _)| [v, p])
        .collect())
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn density_band(
    theta: f64,
    n: usize,
    auctions: usize,
    seed: u32,
    boot_reps: usize,
    alpha: f64,
    lo: f64,
    hi: f64,
) -> Result<Band, JsError> {
    band_core(theta, n, auctions, seed as u64, boot_reps, alpha, lo, hi).map_err(js)
}

#[wasm_bindgen]
pub fn ratio_curve(n: usize, theta_lo: f64, theta_hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    ratio_curve_core(n, theta_lo, theta_hi, points).map_err(js)
}

#[wasm_bindgen]
pub fn pseudo_values(theta: f64, n: usize, auctions: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    pseudo_values_core(theta, n, auctions, seed as u64).map_err(js)
}

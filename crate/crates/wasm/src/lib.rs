//! Browser bindings. Each export takes plain numbers and returns a JSON
//! document; the page in `www/` draws it on a canvas.

use serde::Serialize;
use sprt_info::ensemble::{decision_time_stats, run_ensemble};
use sprt_info::info::{kappa_series, mutual_information, KappaOptions};
use sprt_info::oracle::{oracle_tables, propagate};
use sprt_info::sprt::{run_trajectory, trajectory_rng, Outcome};
use sprt_info::{EnsembleTable, Hypothesis, NoiseModel, Result, TestConfig};
use wasm_bindgen::prelude::*;

/// Curves are cut once this little pooled mass is left undecided.
const DISPLAY_SURVIVAL: f64 = 1e-6;
/// Monte Carlo runs in the browser are single-threaded; keep them short.
pub const MAX_BROWSER_TRIALS: u64 = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct Curves {
    pub source: &'static str,
    pub threshold: f64,
    pub horizon: usize,
    pub alpha_hat: f64,
    pub mi_final: f64,
    pub mean_time: f64,
    pub wald_mean_time: f64,
    pub ideal_kappa: f64,
    pub censored_fraction: f64,
    /// `P(U_k = +1 | X = +1)`.
    pub p_correct: Vec<f64>,
    /// `P(U_k = −1 | X = +1)`.
    pub p_wrong: Vec<f64>,
    pub p_erased: Vec<f64>,
    /// `I(X; U_k)`, bits.
    pub mi: Vec<f64>,
    pub kappa_at: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Path {
    pub threshold: f64,
    pub llr: Vec<f64>,
    pub state: Vec<&'static str>,
    pub decision: Option<i8>,
    pub decided_at: Option<usize>,
    pub overshoot: Option<f64>,
}

fn config(rho: f64, alpha: f64, max_steps: usize) -> Result<TestConfig> {
    let c = TestConfig::new(rho, alpha, NoiseModel::Gaussian)?;
    if max_steps > 0 {
        c.with_max_steps(max_steps)
    } else {
        Ok(c)
    }
}

fn curves(source: &'static str, c: &TestConfig, t: &EnsembleTable, mean_time: f64) -> Result<Curves> {
    let shown = t
        .rows
        .iter()
        .position(|r| r.survive_pooled() < DISPLAY_SURVIVAL)
        .unwrap_or(t.horizon);
    let rows = &t.rows[..=shown];
    let ks = kappa_series(t, KappaOptions::for_config(c), Some(c.ideal_kappa()));
    let mi = (0..=shown)
        .map(|k| mutual_information(t, k).map(|m| m.direct))
        .collect::<Result<Vec<_>>>()?;
    Ok(Curves {
        source,
        threshold: c.threshold(),
        horizon: shown,
        alpha_hat: t.alpha_hat(),
        mi_final: sprt_info::info::binary_mi_final(t.alpha_hat()),
        mean_time,
        wald_mean_time: c.wald_mean_time(),
        ideal_kappa: c.ideal_kappa(),
        censored_fraction: t.censored_fraction,
        p_correct: rows.iter().map(|r| r.term_upto[0][0]).collect(),
        p_wrong: rows.iter().map(|r| r.term_upto[0][1]).collect(),
        p_erased: rows.iter().map(|r| r.survive[0]).collect(),
        mi,
        kappa_at: ks.kappa_at[..=shown].to_vec(),
    })
}

/// Exact curves from the density oracle.
pub fn oracle_curves_native(rho: f64, alpha: f64, grid_points: usize) -> Result<Curves> {
    let c = config(rho, alpha, 0)?;
    let g = propagate(&c, c.max_steps(), grid_points)?;
    curves("oracle", &c, &oracle_tables(&g), g.absorption_time_moments().0)
}

/// Monte Carlo curves; `max_steps = 0` keeps the default horizon.
pub fn simulate_native(rho: f64, alpha: f64, trials: u64, seed: u64, max_steps: usize) -> Result<Curves> {
    let c = config(rho, alpha, max_steps)?;
    let t = run_ensemble(&c, trials.clamp(1, MAX_BROWSER_TRIALS), seed)?;
    let mean = decision_time_stats(&t).map_or(f64::NAN, |s| s.mean);
    curves("monte_carlo", &c, &t, mean)
}

/// One sample path under `X = +1` (`hypothesis ≥ 0`) or `X = −1`.
pub fn trajectory_native(rho: f64, alpha: f64, seed: u64, hypothesis: i32) -> Result<Path> {
    let c = config(rho, alpha, 0)?;
    let x = if hypothesis >= 0 { Hypothesis::Plus } else { Hypothesis::Minus };
    let tr = run_trajectory(x, &c, &mut trajectory_rng(seed, 0))?;
    let d = match tr.outcome {
        Outcome::Decided(d) => Some(d),
        Outcome::Censored { .. } => None,
    };
    Ok(Path {
        threshold: c.threshold(),
        llr: tr.trace.iter().map(|s| s.cum_llr).collect(),
        state: tr.trace.iter().map(|s| s.state.label()).collect(),
        decision: d.map(|d| d.value.sign() as i8),
        decided_at: d.map(|d| d.decided_at),
        overshoot: d.map(|d| d.overshoot),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen]
pub fn oracle_curves(rho: f64, alpha: f64, grid_points: usize) -> Result<String, JsValue> {
    to_js(oracle_curves_native(rho, alpha, grid_points))
}

#[wasm_bindgen]
pub fn simulate(rho: f64, alpha: f64, trials: u32, seed: u32, max_steps: u32) -> Result<String, JsValue> {
    to_js(simulate_native(rho, alpha, trials.into(), seed.into(), max_steps as usize))
}

#[wasm_bindgen]
pub fn trajectory(rho: f64, alpha: f64, seed: u32, hypothesis: i32) -> Result<String, JsValue> {
    to_js(trajectory_native(rho, alpha, seed.into(), hypothesis))
}

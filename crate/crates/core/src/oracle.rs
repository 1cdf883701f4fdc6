//! Exact state probabilities by propagating the surviving density of `S_k`.
//!
//! Under Gaussian noise the increment `L = 2√ρ·y` is `N(±2ρ, 4ρ)`. The open
//! interval `(−T, T)` is cut into `N` equal cells and the surviving mass is
//! carried as one number per cell. Mass leaving the cell centred at `c` lands
//! in cell `[e, e + h)` with probability `Φ((e + h − c − μ)/σ) − Φ((e − c − μ)/σ)`,
//! and is absorbed at `±T` with the exact Gaussian tail beyond the boundary.
//! Each column of this transition kernel sums to one, so total mass is
//! conserved to rounding and the discretisation error lives only in where
//! surviving mass sits inside the interval (second order in `h`).
//!
//! The in-interval part of the kernel is a Toeplitz matrix and is applied with
//! an FFT. The surviving mass is renormalised after every step and the
//! survival probability is tracked separately, so conditional hazards stay
//! accurate long after the surviving mass has become astronomically small.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;
use crate::model::{Hypothesis, NoiseModel, TestConfig};
use crate::table::{EnsembleTable, StateRow, TableSource};

pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const DEFAULT_MASS_TOLERANCE: f64 = 1e-9;
/// Hazards below this are dominated by FFT rounding (≈1e-16 of the peak
/// mass) and are flagged low-confidence.
pub const HAZARD_FLOOR: f64 = 1e-9;
/// Once survival drops below this the hazards are held at their last value;
/// by then the surviving density has long settled on its decay mode.
pub const FREEZE_SURVIVAL: f64 = 1e-30;

#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Hypothesis whose drift is propagated.
    pub hypothesis: Hypothesis,
    /// Also propagate on half the grid to bound the discretisation error.
    pub refine: bool,
    pub mass_tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            hypothesis: Hypothesis::Plus,
            refine: true,
            mass_tolerance: DEFAULT_MASS_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleGrid {
    pub hypothesis: Hypothesis,
    pub grid_points: usize,
    pub spacing: f64,
    pub threshold: f64,
    pub steps: usize,
    /// `P(U_k = ε | X)`, `k = 0..=steps`.
    pub survival: Vec<f64>,
    /// Mass newly absorbed at `+T` at step `k` (index 0 is zero).
    pub absorbed_plus: Vec<f64>,
    /// Mass newly absorbed at `−T` at step `k`.
    pub absorbed_minus: Vec<f64>,
    /// `[P(U_k=+1 | U_{k−1}=ε, X), P(U_k=−1 | U_{k−1}=ε, X)]`.
    pub hazard: Vec<Option<[f64; 2]>>,
    /// Surviving density after the last step, at the cell centres.
    pub surviving_density: Vec<f64>,
    /// Largest `|survival_k + Σ_{l≤k} absorbed_l − 1|` over all k.
    pub mass_residual: f64,
    /// Smallest density value seen at any step (nonnegative by construction).
    pub min_density: f64,
    /// Largest change of any reported probability between this grid and half of it.
    pub tail_error_bound: Option<f64>,
    /// First step whose hazards were held rather than propagated.
    pub frozen_from: Option<usize>,
}

struct Propagator {
    n: usize,
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex<f64>>,
    tail_plus: Vec<f64>,
    tail_minus: Vec<f64>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Propagator {
    fn new(n: usize, h: f64, threshold: f64, mu: f64, sigma: f64) -> Self {
        let len = 3 * n;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);

        // kernel[m] = P(d = m − (n − 1)), mass moving d cells up
        let mut kernel_hat = vec![Complex::new(0.0, 0.0); len];
        for (m, slot) in kernel_hat.iter_mut().take(2 * n - 1).enumerate() {
            let d = m as f64 - (n as f64 - 1.0);
            let a = ((d - 0.5) * h - mu) / sigma;
            let b = ((d + 0.5) * h - mu) / sigma;
            *slot = Complex::new(gauss::mass(a, b), 0.0);
        }
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
        fwd.process_with_scratch(&mut kernel_hat, &mut scratch);

        let centre = |j: usize| -threshold + (j as f64 + 0.5) * h;
        let tail_plus = (0..n).map(|j| gauss::sf((threshold - centre(j) - mu) / sigma)).collect();
        let tail_minus = (0..n).map(|j| gauss::cdf((-threshold - centre(j) - mu) / sigma)).collect();

        Propagator {
            n,
            len,
            fwd,
            inv,
            kernel_hat,
            tail_plus,
            tail_minus,
            buf: vec![Complex::new(0.0, 0.0); len],
            scratch,
        }
    }

    /// One step of normalised mass `q` into `out`; returns `(h₊, h₋, retained)`.
    fn step(&mut self, q: &[f64], out: &mut [f64]) -> (f64, f64, f64) {
        let hp: f64 = q.iter().zip(&self.tail_plus).map(|(a, b)| a * b).sum();
        let hm: f64 = q.iter().zip(&self.tail_minus).map(|(a, b)| a * b).sum();

        for (slot, &v) in self.buf.iter_mut().zip(q) {
            *slot = Complex::new(v, 0.0);
        }
        for slot in &mut self.buf[self.n..] {
            *slot = Complex::new(0.0, 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (b, k) in self.buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / self.len as f64;
        let mut kept = 0.0;
        for (i, o) in out.iter_mut().enumerate() {
            let v = (self.buf[i + self.n - 1].re * scale).max(0.0);
            *o = v;
            kept += v;
        }
        (hp, hm, kept)
    }
}

/// Propagates the surviving density of `S_k` under `X = +1` for `steps` steps.
pub fn propagate(config: &TestConfig, steps: usize, grid_points: usize) -> Result<OracleGrid> {
    propagate_with(config, steps, grid_points, &OracleOptions::default())
}

pub fn propagate_with(config: &TestConfig, steps: usize, grid_points: usize, opts: &OracleOptions) -> Result<OracleGrid> {
    if !matches!(config.noise(), NoiseModel::Gaussian) {
        return Err(Error::UnsupportedNoise(config.noise().name().to_string()));
    }
    if grid_points < 3 {
        return Err(Error::Domain {
            name: "grid_points",
            value: grid_points as f64,
            domain: "[3, ∞)",
        });
    }
    if steps == 0 {
        return Err(Error::Domain {
            name: "steps",
            value: 0.0,
            domain: "[1, ∞)",
        });
    }
    let mut grid = propagate_raw(config, steps, grid_points, opts.hypothesis);
    if grid.mass_residual > opts.mass_tolerance {
        return Err(Error::MassResidual {
            residual: grid.mass_residual,
            tolerance: opts.mass_tolerance,
        });
    }
    if opts.refine && grid_points / 2 >= 3 {
        let coarse = propagate_raw(config, steps, grid_points / 2, opts.hypothesis);
        grid.tail_error_bound = Some(max_probability_gap(&grid, &coarse));
    }
    Ok(grid)
}

fn propagate_raw(config: &TestConfig, steps: usize, n: usize, x: Hypothesis) -> OracleGrid {
    let threshold = config.threshold();
    let mu = 2.0 * config.rho() * x.sign();
    let sigma = 2.0 * config.signal();
    let h = 2.0 * threshold / n as f64;

    let mut survival = Vec::with_capacity(steps + 1);
    let mut absorbed_plus = vec![0.0; steps + 1];
    let mut absorbed_minus = vec![0.0; steps + 1];
    let mut hazard = vec![None; steps + 1];
    survival.push(1.0);

    // Step 1 starts from the point mass at S_0 = 0.
    let mut q: Vec<f64> = (0..n)
        .map(|i| {
            let e = -threshold + i as f64 * h;
            gauss::mass((e - mu) / sigma, (e + h - mu) / sigma)
        })
        .collect();
    let hp = gauss::sf((threshold - mu) / sigma);
    let hm = gauss::cdf((-threshold - mu) / sigma);
    let kept: f64 = q.iter().sum();
    let mut min_density = q.iter().cloned().fold(f64::INFINITY, f64::min);
    hazard[1] = Some([hp, hm]);
    absorbed_plus[1] = hp;
    absorbed_minus[1] = hm;
    survival.push(kept);
    let mut cum_absorbed = hp + hm;
    let mut mass_residual = (kept + cum_absorbed - 1.0).abs();
    normalise(&mut q, kept);

    let mut prop = (steps > 1).then(|| Propagator::new(n, h, threshold, mu, sigma));
    let mut next = vec![0.0; n];
    let mut frozen_from = None;
    let mut last = [hp, hm];

    for k in 2..=steps {
        let s_prev = survival[k - 1];
        if s_prev == 0.0 {
            survival.push(0.0);
            continue;
        }
        let (hp, hm, kept) = if s_prev >= FREEZE_SURVIVAL && kept_is_live(&q) {
            let p = prop.as_mut().expect("propagator exists for steps > 1");
            let r = p.step(&q, &mut next);
            std::mem::swap(&mut q, &mut next);
            min_density = min_density.min(q.iter().cloned().fold(f64::INFINITY, f64::min));
            r
        } else {
            frozen_from.get_or_insert(k);
            (last[0], last[1], 1.0 - last[0] - last[1])
        };
        last = [hp, hm];
        hazard[k] = Some([hp, hm]);
        absorbed_plus[k] = s_prev * hp;
        absorbed_minus[k] = s_prev * hm;
        let s = s_prev * kept;
        survival.push(s);
        cum_absorbed += absorbed_plus[k] + absorbed_minus[k];
        mass_residual = mass_residual.max((s + cum_absorbed - 1.0).abs());
        if frozen_from.is_none() {
            if kept > 0.0 {
                normalise(&mut q, kept);
            } else {
                q.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    let s_final = *survival.last().unwrap();
    let surviving_density = q.iter().map(|v| v * s_final / h).collect();
    OracleGrid {
        hypothesis: x,
        grid_points: n,
        spacing: h,
        threshold,
        steps,
        survival,
        absorbed_plus,
        absorbed_minus,
        hazard,
        surviving_density,
        mass_residual,
        min_density,
        tail_error_bound: None,
        frozen_from,
    }
}

fn kept_is_live(q: &[f64]) -> bool {
    q.iter().any(|&v| v > 0.0)
}

fn normalise(q: &mut [f64], total: f64) {
    let inv = 1.0 / total;
    q.iter_mut().for_each(|v| *v *= inv);
}

fn confident(h: Option<[f64; 2]>) -> Option<[f64; 2]> {
    h.filter(|h| h[0] >= HAZARD_FLOOR && h[1] >= HAZARD_FLOOR)
}

/// Largest difference of any reported probability between two grids.
pub fn max_probability_gap(a: &OracleGrid, b: &OracleGrid) -> f64 {
    let steps = a.steps.min(b.steps);
    let (mut ca, mut cb) = ([0.0; 2], [0.0; 2]);
    let mut gap: f64 = 0.0;
    for k in 0..=steps {
        ca[0] += a.absorbed_plus[k];
        ca[1] += a.absorbed_minus[k];
        cb[0] += b.absorbed_plus[k];
        cb[1] += b.absorbed_minus[k];
        gap = gap
            .max((ca[0] - cb[0]).abs())
            .max((ca[1] - cb[1]).abs())
            .max((a.survival[k] - b.survival[k]).abs());
        if let (Some(ha), Some(hb)) = (confident(a.hazard[k]), confident(b.hazard[k])) {
            if a.frozen_from.is_none_or(|f| k < f) && b.frozen_from.is_none_or(|f| k < f) {
                gap = gap.max((ha[0] - hb[0]).abs()).max((ha[1] - hb[1]).abs());
            }
        }
    }
    gap
}

impl OracleGrid {
    /// `P(U_k = a | X)` for both boundaries, `k = 0..=steps`.
    pub fn cumulative(&self) -> Vec<[f64; 2]> {
        let mut acc = [0.0; 2];
        (0..=self.steps)
            .map(|k| {
                acc[0] += self.absorbed_plus[k];
                acc[1] += self.absorbed_minus[k];
                acc
            })
            .collect()
    }

    /// Error probability over decided mass: the share absorbed at the wrong boundary.
    pub fn error_probability(&self) -> f64 {
        let c = self.cumulative()[self.steps];
        let wrong = match self.hypothesis {
            Hypothesis::Plus => c[1],
            Hypothesis::Minus => c[0],
        };
        wrong / (c[0] + c[1])
    }

    /// Mean and variance of the absorption time, conditional on absorption within the horizon.
    pub fn absorption_time_moments(&self) -> (f64, f64) {
        let w: Vec<f64> = (0..=self.steps).map(|k| self.absorbed_plus[k] + self.absorbed_minus[k]).collect();
        let total: f64 = w.iter().sum();
        let mean = w.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() / total;
        let var = w.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum::<f64>() / total;
        (mean, var)
    }
}

/// The oracle as a state table. The other hypothesis is filled in by the
/// mirror symmetry `P(U_k = a | X = x) = P(U_k = −a | X = −x)`.
pub fn oracle_tables(g: &OracleGrid) -> EnsembleTable {
    let cum = g.cumulative();
    let xi = g.hypothesis.index();
    let rows = (0..=g.steps)
        .map(|k| {
            let mut term_at = [[None; 2]; 2];
            let mut term_upto = [[0.0; 2]; 2];
            let mut survive = [0.0; 2];
            let mut low_confidence = [true; 2];
            for x in 0..2 {
                // boundary slot a under x maps to slot (a XOR flip) under the propagated hypothesis
                let flip = x != xi;
                let src = |a: usize| if flip { 1 - a } else { a };
                for a in 0..2 {
                    term_upto[x][a] = cum[k][src(a)];
                    term_at[x][a] = g.hazard[k].map(|h| h[src(a)]);
                }
                survive[x] = g.survival[k];
                low_confidence[x] = confident(g.hazard[k]).is_none();
            }
            StateRow {
                k,
                term_at,
                term_upto,
                survive,
                low_confidence,
                counts: None,
            }
        })
        .collect();
    EnsembleTable {
        source: TableSource::Oracle,
        horizon: g.steps,
        trials_per_hypothesis: None,
        censored_fraction: g.survival[g.steps],
        confidence_floor: 0,
        rows,
    }
}

//! Hypotheses, noise models, per-observation log-likelihood ratios and the
//! configuration of a single symmetric test instance.
//!
//! Observations follow `y = √ρ·x + z` with `x ∈ {−1, +1}` and `z` drawn from a
//! zero-mean, unit-variance noise density that is symmetric about zero. The
//! test accumulates natural-log likelihood ratios and stops at `±T` with
//! `T = ln((1 − α)/α)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;

/// The binary variable under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Hypothesis {
    pub const BOTH: [Hypothesis; 2] = [Hypothesis::Plus, Hypothesis::Minus];

    /// Signal level, `+1.0` or `−1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Hypothesis::Plus => 1.0,
            Hypothesis::Minus => -1.0,
        }
    }

    /// Array slot used by every table in this crate: `+1 → 0`, `−1 → 1`.
    pub fn index(self) -> usize {
        match self {
            Hypothesis::Plus => 0,
            Hypothesis::Minus => 1,
        }
    }

    pub fn flip(self) -> Hypothesis {
        match self {
            Hypothesis::Plus => Hypothesis::Minus,
            Hypothesis::Minus => Hypothesis::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::Plus => "+1",
            Hypothesis::Minus => "-1",
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A user-supplied symmetric noise density with its sampler.
pub trait SymmetricDensity: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    fn density(&self, z: f64) -> f64;
}

/// Laplace noise scaled to unit variance (`b = 1/√2`).
#[derive(Debug, Clone, Copy, Default)]
pub struct Laplace;

impl Laplace {
    const SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;
}

impl SymmetricDensity for Laplace {
    fn name(&self) -> &str {
        "laplace"
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        // inverse CDF on u ∈ (−½, ½)
        let u: f64 = rng.random::<f64>() - 0.5;
        let mag = -(1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln();
        Self::SCALE * mag * u.signum()
    }

    fn density(&self, z: f64) -> f64 {
        (-z.abs() / Self::SCALE).exp() / (2.0 * Self::SCALE)
    }
}

/// Uniform noise on `[−√3, √3]`: symmetric and unit variance, but with
/// compact support, so the likelihood ratio is undefined for large `|y|`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl SymmetricDensity for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt()
    }

    fn density(&self, z: f64) -> f64 {
        let half = 3f64.sqrt();
        if z.abs() <= half {
            0.5 / half
        } else {
            0.0
        }
    }
}

/// Noise model of the observation channel.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    /// Standard normal noise.
    Gaussian,
    /// Test double: observations carry no noise, but the test still uses the
    /// Gaussian likelihood ratio. Increments become the constant `2ρ·x`.
    Noiseless,
    /// A validated user density (see [`NoiseModel::custom`]).
    Custom(Arc<dyn SymmetricDensity>),
}

/// Samples drawn when validating a custom density.
const VALIDATION_SAMPLES: usize = 400_000;
const VALIDATION_SEED: u64 = 0x5EED_D15C;

impl NoiseModel {
    /// Wraps a user density after checking symmetry on a grid and zero mean /
    /// unit variance by moment estimation (5σ tolerances).
    pub fn custom(density: Arc<dyn SymmetricDensity>) -> Result<Self> {
        for i in 0..=400 {
            let z = i as f64 * 0.02;
            let (p, q) = (density.density(z), density.density(-z));
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidNoise(format!(
                    "{}: density({z}) = {p} is not a finite nonnegative value",
                    density.name()
                )));
            }
            if (p - q).abs() > 1e-12 * p.max(q).max(1e-300) {
                return Err(Error::InvalidNoise(format!(
                    "{}: density is not symmetric at z = {z} ({p} vs {q})",
                    density.name()
                )));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..VALIDATION_SAMPLES {
            let z = density.sample(&mut rng);
            s1 += z;
            s2 += z * z;
            s4 += z * z * z * z;
        }
        let n = VALIDATION_SAMPLES as f64;
        let mean = s1 / n;
        let m2 = s2 / n;
        let m4 = s4 / n;
        let mean_se = (m2 / n).sqrt();
        let var_se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
        if mean.abs() > 5.0 * mean_se {
            return Err(Error::InvalidNoise(format!(
                "{}: sample mean {mean:.5} is not zero (se {mean_se:.2e})",
                density.name()
            )));
        }
        if (m2 - 1.0).abs() > 5.0 * var_se {
            return Err(Error::InvalidNoise(format!(
                "{}: sample variance {m2:.5} is not one (se {var_se:.2e})",
                density.name()
            )));
        }
        Ok(NoiseModel::Custom(density))
    }

    pub fn laplace() -> Self {
        NoiseModel::custom(Arc::new(Laplace)).expect("unit-variance Laplace validates")
    }

    pub fn name(&self) -> &str {
        match self {
            NoiseModel::Gaussian => "gaussian",
            NoiseModel::Noiseless => "noiseless",
            NoiseModel::Custom(d) => d.name(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, NoiseModel::Gaussian)
    }

    /// Draws one noise sample.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseModel::Gaussian => rng.sample(StandardNormal),
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Custom(d) => d.sample(rng),
        }
    }

    /// Density `p_Z(z)`. The noiseless double reports the Gaussian density it
    /// pretends to have.
    pub fn density(&self, z: f64) -> f64 {
        match self {
            NoiseModel::Gaussian | NoiseModel::Noiseless => gauss::pdf(z),
            NoiseModel::Custom(d) => d.density(z),
        }
    }
}

/// Lower and upper thresholds `(T0, T1)` for a symmetric error budget.
pub fn thresholds_from_alpha(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(0, 0.5)",
        });
    }
    let t1 = ((1.0 - alpha) / alpha).ln();
    Ok((-t1, t1))
}

/// One instance of the symmetric test.
#[derive(Debug, Clone)]
pub struct TestConfig {
    rho: f64,
    alpha: f64,
    threshold: f64,
    noise: NoiseModel,
    max_steps: usize,
}

impl TestConfig {
    /// Builds a configuration with `T = ln((1−α)/α)` and the default horizon
    /// `50·⌈T/(2ρ)⌉`.
    pub fn new(rho: f64, alpha: f64, noise: NoiseModel) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain {
                name: "rho",
                value: rho,
                domain: "(0, ∞)",
            });
        }
        let (_, threshold) = thresholds_from_alpha(alpha)?;
        let max_steps = default_horizon(threshold, rho);
        Ok(TestConfig {
            rho,
            alpha,
            threshold,
            noise,
            max_steps,
        })
    }

    /// The setting of the published simulation study: α = 0.1, ρ = 0.04, Gaussian noise.
    pub fn reference() -> Self {
        TestConfig::new(0.04, 0.1, NoiseModel::Gaussian).expect("reference parameters are valid")
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::Domain {
                name: "max_steps",
                value: 0.0,
                domain: "[1, ∞)",
            });
        }
        self.max_steps = max_steps;
        Ok(self)
    }

    /// Overrides the threshold while keeping α as the nominal error budget.
    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::Domain {
                name: "threshold",
                value: threshold,
                domain: "(0, ∞)",
            });
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// `√ρ`, the signal amplitude.
    pub fn signal(&self) -> f64 {
        self.rho.sqrt()
    }

    /// `T/(2ρ)`: steps a noise-free walk needs to reach the threshold.
    pub fn drift_time(&self) -> f64 {
        self.threshold / (2.0 * self.rho)
    }

    /// Wald's approximation of the mean decision time, `(1 − 2α)·T/(2ρ)`.
    pub fn wald_mean_time(&self) -> f64 {
        (1.0 - 2.0 * self.alpha) * self.drift_time()
    }

    /// Idealized boundary-ratio constant `(1 − α)/α`.
    pub fn ideal_kappa(&self) -> f64 {
        (1.0 - self.alpha) / self.alpha
    }

    /// Steps treated as the initial transient: the first fifth of `T/(2ρ)`,
    /// at least one.
    pub fn transient_steps(&self) -> usize {
        ((self.drift_time() / 5.0).floor() as usize).max(1)
    }
}

fn default_horizon(threshold: f64, rho: f64) -> usize {
    50 * (threshold / (2.0 * rho)).ceil().max(1.0) as usize
}

/// Draws `y = √ρ·x + z`.
pub fn sample_observation<R: Rng>(x: Hypothesis, config: &TestConfig, rng: &mut R) -> f64 {
    config.signal() * x.sign() + config.noise.sample(rng)
}

/// `ln[p_Z(y − √ρ) / p_Z(y + √ρ)]`, using the closed form `2√ρ·y` for
/// Gaussian likelihoods.
pub fn llr_increment(y: f64, config: &TestConfig) -> Result<f64> {
    match config.noise {
        NoiseModel::Gaussian | NoiseModel::Noiseless => Ok(2.0 * config.signal() * y),
        NoiseModel::Custom(_) => llr_from_density(y, config),
    }
}

/// Generic density-ratio path, shared by every noise model.
pub fn llr_from_density(y: f64, config: &TestConfig) -> Result<f64> {
    let s = config.signal();
    let num = config.noise.density(y - s);
    let den = config.noise.density(y + s);
    if num <= 0.0 {
        return Err(Error::ZeroDensity { at: y - s });
    }
    if den <= 0.0 {
        return Err(Error::ZeroDensity { at: y + s });
    }
    Ok((num / den).ln())
}

//! The Wald test as an absorbing ternary state machine over one trajectory.
//!
//! `U_k` is `ε` until the cumulative log-likelihood ratio first reaches `T`
//! (state `+1`) or `−T` (state `−1`); both decided states are absorbing, so
//! later increments leave the state and the frozen sum untouched.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{llr_increment, sample_observation, Hypothesis, TestConfig};

/// Public state `U_k` of the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TernaryState {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "e")]
    Erasure,
}

impl TernaryState {
    pub const ALL: [TernaryState; 3] = [TernaryState::Plus, TernaryState::Minus, TernaryState::Erasure];

    pub fn is_absorbed(self) -> bool {
        self != TernaryState::Erasure
    }

    /// The decided hypothesis, if any.
    pub fn decision(self) -> Option<Hypothesis> {
        match self {
            TernaryState::Plus => Some(Hypothesis::Plus),
            TernaryState::Minus => Some(Hypothesis::Minus),
            TernaryState::Erasure => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TernaryState::Plus => "+1",
            TernaryState::Minus => "-1",
            TernaryState::Erasure => "e",
        }
    }
}

impl From<Hypothesis> for TernaryState {
    fn from(h: Hypothesis) -> Self {
        match h {
            Hypothesis::Plus => TernaryState::Plus,
            Hypothesis::Minus => TernaryState::Minus,
        }
    }
}

impl fmt::Display for TernaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One trajectory's `(k, S_k, U_k)` plus absorption bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprtState {
    pub k: usize,
    /// `S_k` in nats; frozen once absorbed.
    pub cum_llr: f64,
    pub state: TernaryState,
    pub absorbed_at: Option<usize>,
    /// `|S| − T` at the absorbing step.
    pub overshoot: Option<f64>,
}

/// `U_0 = ε`, `S_0 = 0`.
pub fn init_state() -> SprtState {
    SprtState {
        k: 0,
        cum_llr: 0.0,
        state: TernaryState::Erasure,
        absorbed_at: None,
        overshoot: None,
    }
}

/// Advances one step. Reaching `±T` exactly absorbs.
pub fn step_state(s: &SprtState, llr: f64, threshold: f64) -> SprtState {
    let k = s.k + 1;
    if s.state.is_absorbed() {
        return SprtState { k, ..*s };
    }
    let cum_llr = s.cum_llr + llr;
    let state = if cum_llr >= threshold {
        TernaryState::Plus
    } else if cum_llr <= -threshold {
        TernaryState::Minus
    } else {
        TernaryState::Erasure
    };
    let (absorbed_at, overshoot) = if state.is_absorbed() {
        (Some(k), Some(cum_llr.abs() - threshold))
    } else {
        (None, None)
    };
    SprtState {
        k,
        cum_llr,
        state,
        absorbed_at,
        overshoot,
    }
}

/// The test's final decision `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub value: Hypothesis,
    pub decided_at: usize,
    pub overshoot: f64,
}

impl Decision {
    /// `None` while the state is still `ε`.
    pub fn from_state(s: &SprtState) -> Option<Decision> {
        Some(Decision {
            value: s.state.decision()?,
            decided_at: s.absorbed_at?,
            overshoot: s.overshoot?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Decided(Decision),
    /// Horizon reached without absorption.
    Censored { steps: usize },
}

impl Outcome {
    pub fn decision(&self) -> Option<&Decision> {
        match self {
            Outcome::Decided(d) => Some(d),
            Outcome::Censored { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States for `k = 0..=min(absorbed_at, max_steps)`.
    pub trace: Vec<SprtState>,
    pub outcome: Outcome,
}

/// Per-trajectory random stream: ChaCha8 keyed by the master seed, stream
/// selected by the trajectory index. Independent of scheduling order.
pub fn trajectory_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Runs one trajectory under hypothesis `x` until absorption or the horizon.
pub fn run_trajectory(x: Hypothesis, config: &TestConfig, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let mut trace = Vec::new();
    let outcome = walk(x, config, rng, false, Some(&mut trace))?;
    Ok(Trajectory { trace, outcome })
}

/// Core loop shared by single runs and the ensemble. With `mirror_noise`
/// every noise draw is negated, which pairs `(x, z)` with `(−x, −z)`.
pub(crate) fn walk(
    x: Hypothesis,
    config: &TestConfig,
    rng: &mut ChaCha8Rng,
    mirror_noise: bool,
    mut trace: Option<&mut Vec<SprtState>>,
) -> Result<Outcome> {
    let threshold = config.threshold();
    let signal = config.signal() * x.sign();
    let mut s = init_state();
    if let Some(t) = trace.as_deref_mut() {
        t.push(s);
    }
    while s.k < config.max_steps() {
        let y = if mirror_noise {
            signal - config.noise().sample(rng)
        } else {
            sample_observation(x, config, rng)
        };
        s = step_state(&s, llr_increment(y, config)?, threshold);
        if let Some(t) = trace.as_deref_mut() {
            t.push(s);
        }
        if let Some(d) = Decision::from_state(&s) {
            return Ok(Outcome::Decided(d));
        }
    }
    Ok(Outcome::Censored { steps: s.k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseModel;
    use proptest::prelude::*;

    const T: f64 = 2.197_224_577_336_219_6;

    #[test]
    fn initial_state() {
        let s = init_state();
        assert_eq!(s.k, 0);
        assert_eq!(s.cum_llr, 0.0);
        assert_eq!(s.state, TernaryState::Erasure);
        assert_eq!(s.absorbed_at, None);
        assert_eq!(init_state(), s);
        assert_eq!(step_state(&s, 0.0, T).state, TernaryState::Erasure);
    }

    #[test]
    fn crossing_arithmetic() {
        let s = SprtState { k: 5, cum_llr: 2.0, ..init_state() };
        let n = step_state(&s, 0.3, T);
        assert_eq!(n.state, TernaryState::Plus);
        assert!((n.cum_llr - 2.3).abs() < 1e-15);
        assert!((n.overshoot.unwrap() - 0.10278).abs() < 1e-5);
        assert_eq!(n.absorbed_at, Some(6));
    }

    #[test]
    fn absorbed_state_is_frozen() {
        let s = SprtState {
            k: 3,
            cum_llr: 0.0,
            state: TernaryState::Plus,
            absorbed_at: Some(3),
            overshoot: Some(0.0),
        };
        let n = step_state(&s, -5.0, T);
        assert_eq!(n.state, TernaryState::Plus);
        assert_eq!(n.cum_llr, 0.0);
        assert_eq!(n.k, 4);
        assert_eq!(n.absorbed_at, Some(3));
    }

    #[test]
    fn strict_interior_stays_erased() {
        let s = SprtState { cum_llr: -2.0, ..init_state() };
        assert_eq!(step_state(&s, -0.1, T).state, TernaryState::Erasure);
        // −2.2 lies beyond −T = −2.19722 and absorbs
        let s = SprtState { cum_llr: -2.1, ..init_state() };
        assert_eq!(step_state(&s, -0.1, T).state, TernaryState::Minus);
    }

    #[test]
    fn exact_threshold_absorbs() {
        let s = step_state(&init_state(), 1.5, 1.5);
        assert_eq!(s.state, TernaryState::Plus);
        assert_eq!(s.overshoot, Some(0.0));
        let s = step_state(&init_state(), -1.5, 1.5);
        assert_eq!(s.state, TernaryState::Minus);
    }

    #[test]
    fn noiseless_walk_absorbs_at_28() {
        let c = TestConfig::new(0.04, 0.1, NoiseModel::Noiseless).unwrap();
        let mut rng = trajectory_rng(0, 0);
        let t = run_trajectory(Hypothesis::Plus, &c, &mut rng).unwrap();
        let d = t.outcome.decision().unwrap();
        assert_eq!(d.value, Hypothesis::Plus);
        assert_eq!(d.decided_at, 28);
        assert_eq!(t.trace.len(), 29);
        assert_eq!(t.trace[27].state, TernaryState::Erasure);
    }

    #[test]
    fn horizon_censors() {
        let c = TestConfig::reference().with_threshold(1e6).unwrap().with_max_steps(1).unwrap();
        let mut rng = trajectory_rng(0, 0);
        let t = run_trajectory(Hypothesis::Plus, &c, &mut rng).unwrap();
        assert_eq!(t.outcome, Outcome::Censored { steps: 1 });
        assert_eq!(t.trace.len(), 2);
    }

    #[test]
    fn determinism_per_seed_and_stream() {
        let c = TestConfig::reference();
        let a = run_trajectory(Hypothesis::Minus, &c, &mut trajectory_rng(9, 4)).unwrap();
        let b = run_trajectory(Hypothesis::Minus, &c, &mut trajectory_rng(9, 4)).unwrap();
        assert_eq!(a, b);
        let other = run_trajectory(Hypothesis::Minus, &c, &mut trajectory_rng(9, 5)).unwrap();
        assert_ne!(a.trace, other.trace);
    }

    #[test]
    fn exchange_symmetry_is_bit_exact() {
        let c = TestConfig::reference();
        for stream in 0..200 {
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            let a = walk(Hypothesis::Plus, &c, &mut trajectory_rng(1, stream), false, Some(&mut plus)).unwrap();
            let b = walk(Hypothesis::Minus, &c, &mut trajectory_rng(1, stream), true, Some(&mut minus)).unwrap();
            assert_eq!(plus.len(), minus.len());
            for (p, m) in plus.iter().zip(&minus) {
                assert_eq!(p.cum_llr, -m.cum_llr);
            }
            match (a, b) {
                (Outcome::Decided(p), Outcome::Decided(m)) => {
                    assert_eq!(p.value, m.value.flip());
                    assert_eq!(p.decided_at, m.decided_at);
                    assert_eq!(p.overshoot, m.overshoot);
                }
                (Outcome::Censored { .. }, Outcome::Censored { .. }) => {}
                other => panic!("asymmetric outcome {other:?}"),
            }
        }
    }

    #[test]
    fn crossing_is_tight() {
        let c = TestConfig::reference();
        for stream in 0..500 {
            let t = run_trajectory(Hypothesis::Plus, &c, &mut trajectory_rng(2, stream)).unwrap();
            if let Outcome::Decided(d) = t.outcome {
                let before = t.trace[d.decided_at - 1].cum_llr;
                assert!(before.abs() < c.threshold());
                assert!(d.overshoot >= 0.0);
            }
        }
    }

    #[test]
    fn mean_decision_time_obeys_walds_identity() {
        // E[τ]·2ρ = E[S_τ]; overshoot puts E[τ] above (1 − 2α)T/(2ρ).
        let c = TestConfig::reference();
        let n = 100_000u64;
        let (mut s1, mut s2) = (0.0, 0.0);
        let mut taus = 0.0;
        for i in 0..n {
            let mut trace = Vec::new();
            let o = walk(Hypothesis::Plus, &c, &mut trajectory_rng(77, i), false, Some(&mut trace)).unwrap();
            let d = o.decision().expect("default horizon never censors here");
            let gap = d.decided_at as f64 - trace.last().unwrap().cum_llr / (2.0 * c.rho());
            s1 += gap;
            s2 += gap * gap;
            taus += d.decided_at as f64;
        }
        let nf = n as f64;
        let mean_gap = s1 / nf;
        let se = ((s2 / nf - mean_gap * mean_gap) / nf).sqrt();
        assert!(mean_gap.abs() < 4.0 * se, "gap {mean_gap} se {se}");
        assert!(taus / nf > c.wald_mean_time());
    }

    proptest! {
        #[test]
        fn absorption_is_permanent(incs in proptest::collection::vec(-1.5f64..1.5, 1..200)) {
            let mut s = init_state();
            let mut seen: Option<SprtState> = None;
            for l in incs {
                s = step_state(&s, l, 2.0);
                if let Some(first) = seen {
                    prop_assert_eq!(s.state, first.state);
                    prop_assert_eq!(s.cum_llr, first.cum_llr);
                    prop_assert_eq!(s.absorbed_at, first.absorbed_at);
                } else if s.state.is_absorbed() {
                    prop_assert!(s.absorbed_at.unwrap() <= s.k);
                    match s.state {
                        TernaryState::Plus => prop_assert!(s.cum_llr >= 2.0),
                        TernaryState::Minus => prop_assert!(s.cum_llr <= -2.0),
                        TernaryState::Erasure => unreachable!(),
                    }
                    seen = Some(s);
                }
            }
        }
    }
}

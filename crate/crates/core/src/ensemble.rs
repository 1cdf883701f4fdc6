//! Monte Carlo estimation of the state tables.
//!
//! Trajectory `i` under `X = +1` draws from stream `i` of the master seed;
//! under `X = −1` it draws from stream `trials + i`, or, in antithetic mode,
//! from stream `i` with negated noise. Work is cut into fixed chunks whose
//! tallies are merged in chunk order, so tables are bit-identical for any
//! thread count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Hypothesis, TestConfig};
use crate::sprt::{trajectory_rng, walk, Outcome, SprtState};
use crate::table::EnsembleTable;

/// Hazard cells with fewer survivors than this are flagged low-confidence.
pub const DEFAULT_CONFIDENCE_FLOOR: u64 = 100;
/// Default budget for retained traces.
pub const DEFAULT_TRACE_BUDGET: u128 = 1 << 30;

const CHUNK: u64 = 2048;

#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    /// Pair each `X = −1` trajectory with the mirrored noise of its `X = +1` twin.
    pub antithetic: bool,
    /// Keep full per-step traces.
    pub tracing: bool,
    pub trace_budget_bytes: u128,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub confidence_floor: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            antithetic: false,
            tracing: false,
            trace_budget_bytes: DEFAULT_TRACE_BUDGET,
            threads: None,
            confidence_floor: DEFAULT_CONFIDENCE_FLOOR,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub table: EnsembleTable,
    /// Mean overshoot `|S| − T` over decided trajectories, per hypothesis.
    pub mean_overshoot: [Option<f64>; 2],
    /// `traces[x][i]`, present only with tracing.
    pub traces: Option<[Vec<Vec<SprtState>>; 2]>,
}

struct Tally {
    absorbed: [[Vec<u64>; 2]; 2],
    overshoot_sum: [f64; 2],
    decided: [u64; 2],
    traces: [Vec<Vec<SprtState>>; 2],
}

impl Tally {
    fn new(horizon: usize) -> Self {
        let z = || vec![0u64; horizon + 1];
        Tally {
            absorbed: [[z(), z()], [z(), z()]],
            overshoot_sum: [0.0; 2],
            decided: [0; 2],
            traces: [Vec::new(), Vec::new()],
        }
    }

    fn merge(&mut self, other: Tally) {
        for x in 0..2 {
            for a in 0..2 {
                for (d, s) in self.absorbed[x][a].iter_mut().zip(&other.absorbed[x][a]) {
                    *d += s;
                }
            }
            self.overshoot_sum[x] += other.overshoot_sum[x];
            self.decided[x] += other.decided[x];
        }
        let [p, m] = other.traces;
        self.traces[0].extend(p);
        self.traces[1].extend(m);
    }
}

/// Runs `trials` trajectories per hypothesis with default options.
pub fn run_ensemble(config: &TestConfig, trials: u64, master_seed: u64) -> Result<EnsembleTable> {
    Ok(run_ensemble_with(config, trials, master_seed, &EnsembleOptions::default())?.table)
}

pub fn run_ensemble_with(
    config: &TestConfig,
    trials: u64,
    master_seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleRun> {
    if trials == 0 {
        return Err(Error::Domain {
            name: "trials",
            value: 0.0,
            domain: "[1, ∞)",
        });
    }
    let horizon = config.max_steps();
    if opts.tracing {
        let required = 2 * trials as u128 * (horizon as u128 + 1) * std::mem::size_of::<SprtState>() as u128;
        if required > opts.trace_budget_bytes {
            return Err(Error::MemoryBudget {
                required,
                budget: opts.trace_budget_bytes,
            });
        }
    }

    let chunks: Vec<(u64, u64)> = (0..trials)
        .step_by(CHUNK as usize)
        .map(|start| (start, (start + CHUNK).min(trials)))
        .collect();
    let run_chunk = |&(start, end): &(u64, u64)| -> Result<Tally> {
        let mut tally = Tally::new(horizon);
        for i in start..end {
            for x in Hypothesis::BOTH {
                let (stream, mirror) = match (x, opts.antithetic) {
                    (Hypothesis::Plus, _) => (i, false),
                    (Hypothesis::Minus, true) => (i, true),
                    (Hypothesis::Minus, false) => (trials + i, false),
                };
                let mut rng = trajectory_rng(master_seed, stream);
                let mut trace = opts.tracing.then(Vec::new);
                let outcome = walk(x, config, &mut rng, mirror, trace.as_mut())?;
                let xi = x.index();
                if let Outcome::Decided(d) = outcome {
                    tally.absorbed[xi][d.value.index()][d.decided_at] += 1;
                    tally.overshoot_sum[xi] += d.overshoot;
                    tally.decided[xi] += 1;
                }
                if let Some(t) = trace {
                    tally.traces[xi].push(t);
                }
            }
        }
        Ok(tally)
    };

    let partials = map_chunks(&chunks, opts.threads, run_chunk)?;
    let mut total = Tally::new(horizon);
    for p in partials {
        total.merge(p);
    }

    let table = EnsembleTable::from_absorptions(&total.absorbed, trials, opts.confidence_floor);
    let mean_overshoot = [0, 1].map(|x| (total.decided[x] > 0).then(|| total.overshoot_sum[x] / total.decided[x] as f64));
    Ok(EnsembleRun {
        table,
        mean_overshoot,
        traces: opts.tracing.then_some(total.traces),
    })
}

#[cfg(feature = "parallel")]
fn map_chunks<F>(chunks: &[(u64, u64)], threads: Option<usize>, f: F) -> Result<Vec<Tally>>
where
    F: Fn(&(u64, u64)) -> Result<Tally> + Sync,
{
    use rayon::prelude::*;
    let go = || chunks.par_iter().map(&f).collect::<Result<Vec<_>>>();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Io(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<F>(chunks: &[(u64, u64)], _threads: Option<usize>, f: F) -> Result<Vec<Tally>>
where
    F: Fn(&(u64, u64)) -> Result<Tally>,
{
    chunks.iter().map(f).collect()
}

/// A residual with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Largest |residual| over k.
    pub max_abs: f64,
    /// Step where it occurs.
    pub at_k: usize,
    /// Standard error at that step; `None` when undefined (fewer than two trials, or no counts).
    pub sigma: Option<f64>,
    /// Largest |residual|/σ over steps with a defined σ (infinite if σ = 0 but the residual is not).
    pub max_z: Option<f64>,
}

impl Residual {
    fn scan(items: impl Iterator<Item = (usize, f64, Option<f64>)>) -> Self {
        let mut out = Residual {
            max_abs: 0.0,
            at_k: 0,
            sigma: None,
            max_z: None,
        };
        let mut first = true;
        for (k, r, s) in items {
            if first || r.abs() > out.max_abs {
                out.max_abs = r.abs();
                out.at_k = k;
                out.sigma = s;
                first = false;
            }
            if let Some(s) = s {
                let z = if s > 0.0 {
                    r.abs() / s
                } else if r == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                out.max_z = Some(out.max_z.map_or(z, |m: f64| m.max(z)));
            }
        }
        out
    }

    /// `true` when every step lies within `n` standard errors (zero residuals always pass).
    pub fn within_sigmas(&self, n: f64) -> bool {
        self.max_abs == 0.0 || self.max_z.is_some_and(|z| z <= n)
    }
}

/// Symmetry residuals of a table between the two hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// `P(U_k=+1|X=+1) − P(U_k=−1|X=−1)`.
    pub correct_decision: Residual,
    /// `P(U_k=+1) − P(U_k=−1)`.
    pub unconditional: Residual,
    /// `P(U_k=+1|U_{k−1}=ε) − P(U_k=−1|U_{k−1}=ε)`, over steps whose pooled
    /// survivors reach the confidence floor.
    pub conditional_on_erasure: Residual,
    /// `P(U_k=ε|X=+1) − P(U_k=ε|X=−1)`.
    pub survival: Residual,
    /// Standard errors could not be formed.
    pub degenerate: bool,
}

fn binom_var(p: f64, n: f64) -> f64 {
    p * (1.0 - p) / n
}

pub fn symmetry_report(t: &EnsembleTable) -> SymmetryReport {
    let n = t.trials_per_hypothesis.map(|n| n as f64);
    let degenerate = !matches!(n, Some(n) if n >= 2.0);
    let se = |v: f64| if degenerate { None } else { Some(v.sqrt()) };
    let n = n.unwrap_or(1.0);

    let correct = Residual::scan(t.rows.iter().map(|r| {
        let (p, q) = (r.term_upto[0][0], r.term_upto[1][1]);
        (r.k, p - q, se(binom_var(p, n) + binom_var(q, n)))
    }));

    // P(U=+1) − P(U=−1) = ½[(A − D) + (B − C)], with A,B,C,D the four
    // cumulative cells; covariance within a hypothesis is −p·q/n.
    let uncond = Residual::scan(t.rows.iter().map(|r| {
        let [[a, b], [c, d]] = r.term_upto;
        let var_x = |p: f64, q: f64| (p * (1.0 - p) + q * (1.0 - q) + 2.0 * p * q) / n;
        (r.k, 0.5 * ((a + c) - (b + d)), se(0.25 * (var_x(a, b) + var_x(c, d))))
    }));

    let cond = Residual::scan(t.rows.iter().skip(1).filter_map(|r| {
        let c = r.counts?;
        let prev = t.rows[r.k - 1].counts?.survivors;
        let pooled = prev[0] + prev[1];
        if pooled == 0 || pooled < t.confidence_floor {
            return None;
        }
        let m = pooled as f64;
        let plus = (c.absorbed[0][0] + c.absorbed[1][0]) as f64 / m;
        let minus = (c.absorbed[0][1] + c.absorbed[1][1]) as f64 / m;
        let sigma = if degenerate {
            None
        } else {
            Some(((plus * (1.0 - plus) + minus * (1.0 - minus) + 2.0 * plus * minus) / m).sqrt())
        };
        Some((r.k, plus - minus, sigma))
    }));

    let survival = Residual::scan(t.rows.iter().map(|r| {
        let (p, q) = (r.survive[0], r.survive[1]);
        (r.k, p - q, se(binom_var(p, n) + binom_var(q, n)))
    }));

    SymmetryReport {
        correct_decision: correct,
        unconditional: uncond,
        conditional_on_erasure: cond,
        survival,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTimeStats {
    pub mean: f64,
    /// Variance of the decision time over decided trajectories.
    pub variance: f64,
    /// Standard error of the mean; Monte Carlo tables only.
    pub mean_se: Option<f64>,
    /// `(level, k)` pairs: smallest k with decided-CDF ≥ level.
    pub quantiles: Vec<(f64, usize)>,
    pub decided_fraction: f64,
    pub censored_fraction: f64,
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Moments and quantiles of the decision time over decided trajectories,
/// pooled across both hypotheses.
pub fn decision_time_stats(t: &EnsembleTable) -> Result<DecisionTimeStats> {
    let mass: Vec<f64> = t
        .rows
        .windows(2)
        .map(|w| {
            let d = |r: &crate::table::StateRow| r.term_upto[0][0] + r.term_upto[0][1] + r.term_upto[1][0] + r.term_upto[1][1];
            0.5 * (d(&w[1]) - d(&w[0]))
        })
        .collect();
    let decided: f64 = mass.iter().sum();
    if decided <= 0.0 {
        return Err(Error::AllCensored { horizon: t.horizon });
    }
    let mean = mass.iter().enumerate().map(|(i, m)| (i + 1) as f64 * m).sum::<f64>() / decided;
    let second = mass.iter().enumerate().map(|(i, m)| ((i + 1) as f64 - mean).powi(2) * m).sum::<f64>() / decided;

    let (variance, mean_se) = match t.trials_per_hypothesis {
        Some(n) => {
            let count = (decided * 2.0 * n as f64).round();
            let var = if count > 1.0 { second * count / (count - 1.0) } else { 0.0 };
            (var, Some((var / count).sqrt()))
        }
        None => (second, None),
    };

    let mut quantiles = Vec::with_capacity(QUANTILE_LEVELS.len());
    let mut acc = 0.0;
    let mut level = QUANTILE_LEVELS.iter().peekable();
    for (i, m) in mass.iter().enumerate() {
        acc += m;
        while let Some(&&q) = level.peek() {
            if acc >= q * decided * (1.0 - 1e-12) {
                quantiles.push((q, i + 1));
                level.next();
            } else {
                break;
            }
        }
    }

    Ok(DecisionTimeStats {
        mean,
        variance,
        mean_se,
        quantiles,
        decided_fraction: decided,
        censored_fraction: t.censored_fraction,
    })
}

/// Half-width of the 95% normal-approximation binomial interval for a cell estimated from `n` trials.
pub fn binomial_ci_halfwidth(p: f64, n: u64) -> f64 {
    1.959_963_984_540_054 * binom_var(p, n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseModel;
    use crate::table::check_conservation;

    fn noiseless() -> TestConfig {
        TestConfig::new(0.04, 0.1, NoiseModel::Noiseless).unwrap()
    }

    #[test]
    fn single_noiseless_trial() {
        let t = run_ensemble(&noiseless(), 1, 0).unwrap();
        for r in &t.rows[1..] {
            for a in 0..2 {
                let expected = if r.k == 28 && a == 0 { 1.0 } else { 0.0 };
                if let Some(p) = r.term_at[0][a] {
                    assert_eq!(p, expected, "k={} a={a}", r.k);
                }
            }
        }
        assert_eq!(t.rows[28].term_at[0][0], Some(1.0));
        assert_eq!(t.rows[29].term_at[0][0], None);
        let s = decision_time_stats(&t).unwrap();
        assert_eq!(s.mean, 28.0);
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn all_censored_is_an_error() {
        let c = TestConfig::reference().with_threshold(1e3).unwrap().with_max_steps(5).unwrap();
        let t = run_ensemble(&c, 50, 1).unwrap();
        assert_eq!(t.censored_fraction, 1.0);
        assert!(matches!(decision_time_stats(&t), Err(Error::AllCensored { horizon: 5 })));
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(run_ensemble(&noiseless(), 0, 0).is_err());
    }

    #[test]
    fn trace_budget_enforced() {
        let opts = EnsembleOptions {
            tracing: true,
            trace_budget_bytes: 1_000,
            ..Default::default()
        };
        let err = run_ensemble_with(&TestConfig::reference(), 100, 0, &opts).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));

        let opts = EnsembleOptions {
            tracing: true,
            ..Default::default()
        };
        let run = run_ensemble_with(&TestConfig::reference(), 10, 0, &opts).unwrap();
        let traces = run.traces.unwrap();
        assert_eq!(traces[0].len(), 10);
        assert_eq!(traces[0][0][0].k, 0);
    }

    #[test]
    fn thread_count_invariance() {
        let c = TestConfig::reference();
        let tables: Vec<_> = [1, 2, 5]
            .iter()
            .map(|&n| {
                let opts = EnsembleOptions {
                    threads: Some(n),
                    ..Default::default()
                };
                run_ensemble_with(&c, 5_000, 42, &opts).unwrap()
            })
            .collect();
        for t in &tables[1..] {
            assert_eq!(t.table, tables[0].table);
            assert_eq!(t.mean_overshoot, tables[0].mean_overshoot);
        }
    }

    #[test]
    fn counts_conserve_and_cumulative_is_monotone() {
        let t = run_ensemble(&TestConfig::reference(), 3_000, 5).unwrap();
        assert!(check_conservation(&t).passed());
        for w in t.rows.windows(2) {
            for x in 0..2 {
                for a in 0..2 {
                    assert!(w[1].term_upto[x][a] >= w[0].term_upto[x][a]);
                }
            }
        }
    }

    #[test]
    fn antithetic_streams_make_symmetry_exact() {
        let opts = EnsembleOptions {
            antithetic: true,
            ..Default::default()
        };
        let t = run_ensemble_with(&TestConfig::reference(), 4_000, 3, &opts).unwrap().table;
        let rep = symmetry_report(&t);
        assert_eq!(rep.correct_decision.max_abs, 0.0);
        assert_eq!(rep.unconditional.max_abs, 0.0);
        assert_eq!(rep.conditional_on_erasure.max_abs, 0.0);
        assert_eq!(rep.survival.max_abs, 0.0);
    }

    #[test]
    fn independent_streams_within_four_sigma() {
        let t = run_ensemble(&TestConfig::reference(), 20_000, 8).unwrap();
        let rep = symmetry_report(&t);
        assert!(!rep.degenerate);
        for r in [rep.correct_decision, rep.unconditional, rep.conditional_on_erasure, rep.survival] {
            assert!(r.within_sigmas(4.0), "{r:?}");
        }
    }

    #[test]
    fn single_trial_symmetry_is_degenerate() {
        let t = run_ensemble(&TestConfig::reference(), 1, 0).unwrap();
        let rep = symmetry_report(&t);
        assert!(rep.degenerate);
        assert_eq!(rep.correct_decision.sigma, None);
    }

    #[test]
    fn quadrupling_trials_halves_the_interval() {
        let c = TestConfig::reference();
        let small = run_ensemble(&c, 10_000, 21).unwrap();
        let large = run_ensemble(&c, 40_000, 21).unwrap();
        let k = 20;
        let w1 = binomial_ci_halfwidth(small.rows[k].term_upto[0][0], 10_000);
        let w4 = binomial_ci_halfwidth(large.rows[k].term_upto[0][0], 40_000);
        assert!((w4 / w1 - 0.5).abs() < 0.05, "{w1} {w4}");
    }
}

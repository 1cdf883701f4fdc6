//! Per-step probability tables of the ternary state, conditioned on `X`.
//!
//! Indexing is `[x][a]` with `x, a ∈ {+1 → 0, −1 → 1}` (see
//! [`Hypothesis::index`]). Row `k` holds:
//!
//! * `term_at[x][a]`: `P(U_k = a | U_{k−1} = ε, X = x)`;
//! * `term_upto[x][a]`: `P(U_k = a | X = x)`;
//! * `survive[x]`: `P(U_k = ε | X = x)`.
//!
//! Monte Carlo tables carry the integer counts behind every estimate; oracle
//! tables carry none.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Hypothesis;
use crate::sprt::TernaryState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    MonteCarlo,
    Oracle,
}

impl TableSource {
    pub fn label(self) -> &'static str {
        match self {
            TableSource::MonteCarlo => "monte_carlo",
            TableSource::Oracle => "oracle",
        }
    }
}

/// Counts behind one Monte Carlo row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountRow {
    /// Trajectories still at `ε` after step `k`.
    pub survivors: [u64; 2],
    /// Absorbed exactly at step `k`, `[x][a]`.
    pub absorbed: [[u64; 2]; 2],
    /// Absorbed at or before step `k`, `[x][a]`.
    pub cumulative: [[u64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub k: usize,
    /// Undefined (`None`) when nothing survived step `k − 1`, and at `k = 0`.
    pub term_at: [[Option<f64>; 2]; 2],
    pub term_upto: [[f64; 2]; 2],
    pub survive: [f64; 2],
    /// Per hypothesis: the `term_at` cells are too poorly supported for ratio analyses.
    pub low_confidence: [bool; 2],
    pub counts: Option<CountRow>,
}

impl StateRow {
    /// `P(U_k = u | X = x)`.
    pub fn given(&self, x: Hypothesis, u: TernaryState) -> f64 {
        let xi = x.index();
        match u.decision() {
            Some(a) => self.term_upto[xi][a.index()],
            None => self.survive[xi],
        }
    }

    /// `P(U_k = u)` under equal priors.
    pub fn marginal(&self, u: TernaryState) -> f64 {
        0.5 * (self.given(Hypothesis::Plus, u) + self.given(Hypothesis::Minus, u))
    }

    /// Pooled survival `P(U_k = ε)`.
    pub fn survive_pooled(&self) -> f64 {
        self.marginal(TernaryState::Erasure)
    }
}

/// Probability table over `k = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTable {
    pub source: TableSource,
    pub horizon: usize,
    /// Monte Carlo only.
    pub trials_per_hypothesis: Option<u64>,
    /// Fraction of all trajectories still undecided at the horizon (mass, for oracle tables).
    pub censored_fraction: f64,
    /// Survivor floor below which Monte Carlo hazard cells are flagged.
    pub confidence_floor: u64,
    pub rows: Vec<StateRow>,
}

impl EnsembleTable {
    /// Assembles a Monte Carlo table from per-step absorption counts
    /// `absorbed[x][a][k]` (index 0 unused) and the per-hypothesis trial count.
    pub fn from_absorptions(absorbed: &[[Vec<u64>; 2]; 2], trials: u64, floor: u64) -> Self {
        let horizon = absorbed[0][0].len() - 1;
        let mut rows = Vec::with_capacity(horizon + 1);
        let mut survivors = [trials; 2];
        let mut cumulative = [[0u64; 2]; 2];
        let n = trials as f64;
        for k in 0..=horizon {
            let prev = survivors;
            let mut new = [[0u64; 2]; 2];
            if k > 0 {
                for x in 0..2 {
                    for a in 0..2 {
                        new[x][a] = absorbed[x][a][k];
                        cumulative[x][a] += new[x][a];
                    }
                    survivors[x] -= new[x][0] + new[x][1];
                }
            }
            let counts = CountRow {
                survivors,
                absorbed: new,
                cumulative,
            };
            rows.push(mc_row(k, &counts, prev, n, floor));
        }
        let censored_fraction = (survivors[0] + survivors[1]) as f64 / (2.0 * n);
        EnsembleTable {
            source: TableSource::MonteCarlo,
            horizon,
            trials_per_hypothesis: Some(trials),
            censored_fraction,
            confidence_floor: floor,
            rows,
        }
    }

    pub fn row(&self, k: usize) -> Result<&StateRow> {
        self.rows.get(k).ok_or(Error::OutOfRange {
            k,
            horizon: self.horizon,
        })
    }

    pub fn last(&self) -> &StateRow {
        self.rows.last().expect("tables hold at least row 0")
    }

    /// Measured error probability under `X = +1`, over decided trajectories:
    /// `P(D = −1 | X = +1)` at the horizon.
    pub fn alpha_hat(&self) -> f64 {
        let r = self.last();
        let wrong = r.term_upto[0][1];
        wrong / (r.term_upto[0][0] + wrong)
    }

    /// Survivors entering step `k` for hypothesis `x`, when counts exist.
    pub fn survivors_before(&self, k: usize, x: Hypothesis) -> Option<u64> {
        if k == 0 {
            return None;
        }
        Some(self.rows[k - 1].counts?.survivors[x.index()])
    }
}

/// Builds one row from its counts. `prev` are the survivors after step `k − 1`.
pub(crate) fn mc_row(k: usize, c: &CountRow, prev: [u64; 2], n: f64, floor: u64) -> StateRow {
    let mut term_at = [[None; 2]; 2];
    let mut term_upto = [[0.0; 2]; 2];
    let mut survive = [0.0; 2];
    let mut low_confidence = [true; 2];
    for x in 0..2 {
        for a in 0..2 {
            term_upto[x][a] = c.cumulative[x][a] as f64 / n;
            if k > 0 && prev[x] > 0 {
                term_at[x][a] = Some(c.absorbed[x][a] as f64 / prev[x] as f64);
            }
        }
        survive[x] = c.survivors[x] as f64 / n;
        low_confidence[x] = k == 0 || prev[x] < floor;
    }
    StateRow {
        k,
        term_at,
        term_upto,
        survive,
        low_confidence,
        counts: Some(*c),
    }
}

/// Outcome of the integer bookkeeping checks on a Monte Carlo table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub rows_checked: usize,
    /// Rows (k) where some identity failed, with a reason.
    pub violations: Vec<(usize, String)>,
}

impl ConservationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks, exactly on integers, that
/// `survivors(k−1) = survivors(k) + absorbed₊(k) + absorbed₋(k)`,
/// `cumulative(k) = cumulative(k−1) + absorbed(k)` and
/// `cumulative₊ + cumulative₋ + survivors = trials` at every `k`, and that the
/// published probabilities agree with their counts.
pub fn check_conservation(t: &EnsembleTable) -> ConservationReport {
    let mut violations = Vec::new();
    let Some(trials) = t.trials_per_hypothesis else {
        return ConservationReport {
            rows_checked: 0,
            violations: vec![(0, "table has no counts".into())],
        };
    };
    let mut prev: Option<CountRow> = None;
    for row in &t.rows {
        let Some(c) = row.counts else {
            violations.push((row.k, "row without counts".into()));
            continue;
        };
        for x in 0..2 {
            let total = c.cumulative[x][0] + c.cumulative[x][1] + c.survivors[x];
            if total != trials {
                violations.push((row.k, format!("x-slot {x}: cumulative + survivors = {total} ≠ {trials}")));
            }
            match prev {
                None => {
                    if c.survivors[x] != trials || c.absorbed[x] != [0, 0] {
                        violations.push((row.k, format!("x-slot {x}: row 0 must hold every trajectory")));
                    }
                }
                Some(p) => {
                    if p.survivors[x] != c.survivors[x] + c.absorbed[x][0] + c.absorbed[x][1] {
                        violations.push((row.k, format!("x-slot {x}: survivor flow does not balance")));
                    }
                    for a in 0..2 {
                        if c.cumulative[x][a] != p.cumulative[x][a] + c.absorbed[x][a] {
                            violations.push((row.k, format!("x-slot {x}, a-slot {a}: cumulative does not add up")));
                        }
                    }
                }
            }
            let n = trials as f64;
            let rel = |p: f64, count: u64| (p - count as f64 / n).abs() > 1e-12;
            if rel(row.survive[x], c.survivors[x])
                || rel(row.term_upto[x][0], c.cumulative[x][0])
                || rel(row.term_upto[x][1], c.cumulative[x][1])
            {
                violations.push((row.k, format!("x-slot {x}: probabilities disagree with counts")));
            }
        }
        prev = Some(c);
    }
    ConservationReport {
        rows_checked: t.rows.len(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EnsembleTable {
        // horizon 3, 10 trials per hypothesis
        let abs = [
            [vec![0, 2, 3, 1], vec![0, 0, 1, 0]],
            [vec![0, 0, 1, 0], vec![0, 3, 2, 1]],
        ];
        EnsembleTable::from_absorptions(&abs, 10, 1)
    }

    #[test]
    fn rows_follow_counts() {
        let t = toy();
        assert_eq!(t.horizon, 3);
        assert_eq!(t.rows[0].survive, [1.0, 1.0]);
        let r2 = &t.rows[2];
        assert_eq!(r2.counts.unwrap().survivors, [4, 4]);
        assert_eq!(r2.term_upto[0], [0.5, 0.1]);
        assert_eq!(r2.term_at[0][0], Some(3.0 / 8.0));
        assert_eq!(t.censored_fraction, 0.3);
        assert!((t.alpha_hat() - 1.0 / 7.0).abs() < 1e-15);
        assert!(check_conservation(&t).passed());
    }

    #[test]
    fn sums_to_one_exactly_on_counts() {
        let t = toy();
        for r in &t.rows {
            let c = r.counts.unwrap();
            for x in 0..2 {
                assert_eq!(c.cumulative[x][0] + c.cumulative[x][1] + c.survivors[x], 10);
            }
        }
    }

    #[test]
    fn tampering_is_detected() {
        let mut t = toy();
        t.rows[2].counts.as_mut().unwrap().absorbed[1][1] += 1;
        let rep = check_conservation(&t);
        assert!(!rep.passed());
        assert!(rep.violations.iter().any(|(k, _)| *k == 2));
    }
}

//! Information densities, mutual information and the boundary-ratio series,
//! computed from state tables. Every quantity is in bits.
//!
//! Functions take an [`EnsembleTable`] and work the same on Monte Carlo and
//! oracle tables. Uniform priors on `X` are assumed throughout.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Hypothesis, TestConfig};
use crate::sprt::TernaryState;
use crate::table::EnsembleTable;

pub fn bits_to_nats(b: f64) -> f64 {
    b * LN_2
}

pub fn nats_to_bits(n: f64) -> f64 {
    n / LN_2
}

/// A value in bits that may be the `−∞` sentinel for impossible outcomes.
/// Serializes `−∞` as the string `"-inf"` so it survives JSON.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bits(pub f64);

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bits(v)),
            Raw::Str(s) if s == "-inf" => Ok(Bits(f64::NEG_INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"-inf\", got {s:?}"))),
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `p·log2 p` with `0·log 0 = 0`.
fn plog2p(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    -plog2p(p) - plog2p(1.0 - p)
}

/// `I(X;U_∞) = 1 − H_b(α)` for error probability `α`.
pub fn binary_mi_final(alpha: f64) -> f64 {
    1.0 + plog2p(alpha) + plog2p(1.0 - alpha)
}

/// `log2(num/den)`: undefined for `den = 0`, `−∞` for `num = 0`.
fn log_ratio(num: f64, den: f64, k: usize, state: &'static str) -> Result<f64> {
    if den <= 0.0 {
        return Err(Error::UndefinedCell { k, state });
    }
    if num <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((num / den).log2())
}

const STATES: [TernaryState; 3] = TernaryState::ALL;

fn sidx(u: TernaryState) -> usize {
    match u {
        TernaryState::Plus => 0,
        TernaryState::Minus => 1,
        TernaryState::Erasure => 2,
    }
}

/// `i(X = x; U_k = u) = log2 P(U_k = u | X = x) / P(U_k = u)`.
pub fn info_density(t: &EnsembleTable, k: usize, x: Hypothesis, u: TernaryState) -> Result<f64> {
    let r = t.row(k)?;
    log_ratio(r.given(x, u), r.marginal(u), k, u.label())
}

/// `P(U_k = u | U_{k−1} = prev, X = x)`, or `None` where the table leaves it undefined.
fn transition(t: &EnsembleTable, k: usize, x: usize, prev: TernaryState, u: TernaryState) -> Option<f64> {
    if k == 0 {
        return None;
    }
    match prev.decision() {
        Some(_) => Some(if u == prev { 1.0 } else { 0.0 }),
        None => {
            let r = &t.rows[k];
            match u.decision() {
                Some(a) => r.term_at[x][a.index()],
                None => {
                    let before = t.rows[k - 1].survive[x];
                    (before > 0.0).then(|| r.survive[x] / before)
                }
            }
        }
    }
}

/// `i(X = x; U_k = u | U_{k−1} = prev) = log2 P(u | prev, x) / P(u | prev)`.
pub fn conditional_info_density(
    t: &EnsembleTable,
    k: usize,
    x: Hypothesis,
    u: TernaryState,
    prev: TernaryState,
) -> Result<f64> {
    t.row(k)?;
    if k == 0 {
        return Err(Error::UndefinedCell { k, state: "U_{k-1}" });
    }
    let before = &t.rows[k - 1];
    if before.marginal(prev) <= 0.0 {
        return Err(Error::UndefinedCell { k, state: prev.label() });
    }
    let mut cond = [0.0; 2];
    for y in Hypothesis::BOTH {
        cond[y.index()] = transition(t, k, y.index(), prev, u).ok_or(Error::UndefinedCell { k, state: u.label() })?;
    }
    // from an absorbed state the transition does not depend on x
    let pooled: f64 = if prev.is_absorbed() {
        cond[x.index()]
    } else {
        Hypothesis::BOTH
            .iter()
            .map(|y| 0.5 * before.given(*y, prev) / before.marginal(prev) * cond[y.index()])
            .sum()
    };
    log_ratio(cond[x.index()], pooled, k, u.label())
}

/// Joint `P(X = x, U_{k−1} = b, U_k = c)` indexed `[x][b][c]`, states ordered `+1, −1, ε`.
pub type Joint = [[[f64; 3]; 3]; 2];

/// Joint law of `(X, U_{k−1}, U_k)` for `k ≥ 1`.
pub fn pair_joint(t: &EnsembleTable, k: usize) -> Result<Joint> {
    t.row(k)?;
    if k == 0 {
        return Err(Error::UndefinedCell { k, state: "U_{k-1}" });
    }
    let (r, p) = (&t.rows[k], &t.rows[k - 1]);
    let mut j = [[[0.0; 3]; 3]; 2];
    for x in 0..2 {
        let e = sidx(TernaryState::Erasure);
        j[x][e][e] = 0.5 * r.survive[x];
        for a in 0..2 {
            j[x][a][a] = 0.5 * p.term_upto[x][a];
            j[x][e][a] = 0.5
                * match r.term_at[x][a] {
                    Some(h) => p.survive[x] * h,
                    None => (r.term_upto[x][a] - p.term_upto[x][a]).max(0.0),
                };
        }
    }
    Ok(j)
}

/// `I(X; B | C)` from a joint indexed `[x][b][c]`.
fn conditional_mi(j: &Joint) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        let pxc = [0, 1].map(|x| j[x][0][c] + j[x][1][c] + j[x][2][c]);
        let pc = pxc[0] + pxc[1];
        for b in 0..3 {
            let pbc = j[0][b][c] + j[1][b][c];
            for x in 0..2 {
                let p = j[x][b][c];
                if p > 0.0 {
                    total += p * ((p * pc) / (pxc[x] * pbc)).log2();
                }
            }
        }
    }
    total.max(0.0)
}

fn swap_bc(j: &Joint) -> Joint {
    let mut s = [[[0.0; 3]; 3]; 2];
    for x in 0..2 {
        for b in 0..3 {
            for c in 0..3 {
                s[x][c][b] = j[x][b][c];
            }
        }
    }
    s
}

/// `I(X; U_k | U_{k−1})`.
pub fn mi_increment(t: &EnsembleTable, k: usize) -> Result<f64> {
    Ok(conditional_mi(&swap_bc(&pair_joint(t, k)?)))
}

/// `I(X; U_{k−1} | U_k)`, zero for a Markov chain `X ↔ U_k ↔ U_{k−1}`.
pub fn markov_residual(t: &EnsembleTable, k: usize) -> Result<f64> {
    Ok(conditional_mi(&pair_joint(t, k)?))
}

/// Both evaluations of `I(X; U_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation {
    /// From the two `X = +1` termination probabilities; assumes the mirror symmetry.
    pub closed_form: f64,
    /// From the full joint of `X` and `U_k`; authoritative.
    pub direct: f64,
    pub discrepancy: f64,
}

pub fn mutual_information(t: &EnsembleTable, k: usize) -> Result<MutualInformation> {
    let r = t.row(k)?;
    let (p1, p2) = (r.term_upto[0][0], r.term_upto[0][1]);
    let s = p1 + p2;
    let closed_form = if s > 0.0 { s * (2.0 / s).log2() + plog2p(p1) + plog2p(p2) } else { 0.0 };
    let mut direct = 0.0;
    for u in STATES {
        let pu = r.marginal(u);
        for x in Hypothesis::BOTH {
            let p = r.given(x, u);
            if p > 0.0 {
                direct += 0.5 * p * (p / pu).log2();
            }
        }
    }
    let direct = direct.max(0.0);
    Ok(MutualInformation {
        closed_form,
        direct,
        discrepancy: (closed_form - direct).abs(),
    })
}

/// `Σ P(x, u)·i(x; u)` evaluated through [`info_density`].
pub fn expected_info_density(t: &EnsembleTable, k: usize) -> Result<f64> {
    let r = t.row(k)?;
    let mut total = 0.0;
    for x in Hypothesis::BOTH {
        for u in STATES {
            let p = 0.5 * r.given(x, u);
            if p > 0.0 {
                total += p * info_density(t, k, x, u)?;
            }
        }
    }
    Ok(total)
}

/// Largest deviation from `P(U_k = a | X = x) = P(U_k = −a | X = −x)` over the table.
pub fn asymmetry(t: &EnsembleTable) -> f64 {
    t.rows
        .iter()
        .map(|r| {
            let d = [
                r.term_upto[0][0] - r.term_upto[1][1],
                r.term_upto[0][1] - r.term_upto[1][0],
                r.survive[0] - r.survive[1],
            ];
            d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .fold(0.0, f64::max)
}

/// Which cells enter the flatness statistics of the κ series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaOptions {
    /// Steps `k < transient` are excluded.
    pub transient: usize,
    /// Per-step ratios need at least this much surviving mass entering step `k`.
    pub min_survival: f64,
}

impl Default for KappaOptions {
    fn default() -> Self {
        KappaOptions {
            transient: 5,
            min_survival: 1e-6,
        }
    }
}

impl KappaOptions {
    /// Transient scaled to the configuration's drift time.
    pub fn for_config(config: &TestConfig) -> Self {
        KappaOptions {
            transient: config.transient_steps(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    pub cells: usize,
    pub median: Option<f64>,
    /// `max |κ_k − median| / median` over the cells used.
    pub max_rel_deviation: Option<f64>,
    pub at_k: Option<usize>,
    /// `|median − (1 − α)/α|`, when the nominal α is known.
    pub ideal_gap: Option<f64>,
}

impl Flatness {
    fn of(series: &[Option<f64>], use_k: impl Fn(usize) -> bool, ideal: Option<f64>) -> Self {
        let cells: Vec<(usize, f64)> = series
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.filter(|v| v.is_finite()).filter(|_| use_k(k)).map(|v| (k, v)))
            .collect();
        let mut sorted: Vec<f64> = cells.iter().map(|c| c.1).collect();
        sorted.sort_by(f64::total_cmp);
        let median = match sorted.len() {
            0 => None,
            n if n % 2 == 1 => Some(sorted[n / 2]),
            n => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
        };
        let worst = median.and_then(|m| {
            cells
                .iter()
                .map(|&(k, v)| (k, (v - m).abs() / m))
                .max_by(|a, b| a.1.total_cmp(&b.1))
        });
        Flatness {
            cells: cells.len(),
            median,
            max_rel_deviation: worst.map(|w| w.1),
            at_k: worst.map(|w| w.0),
            ideal_gap: median.zip(ideal).map(|(m, i)| (m - i).abs()),
        }
    }
}

/// Boundary ratios under `X = +1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSeries {
    /// `P(U_k = +1 | ε, X = +1) / P(U_k = −1 | ε, X = +1)`.
    pub kappa_at: Vec<Option<f64>>,
    /// `P(U_k = +1 | X = +1) / P(U_k = −1 | X = +1)`.
    pub kappa_upto: Vec<Option<f64>>,
    pub at_flatness: Flatness,
    pub upto_flatness: Flatness,
    pub options: KappaOptions,
    /// Steps whose per-step ratio has a zero denominator.
    pub skipped: Vec<usize>,
}

/// Computes both κ series; `ideal` is `(1 − α)/α` when the nominal α is known.
pub fn kappa_series(t: &EnsembleTable, opts: KappaOptions, ideal: Option<f64>) -> KappaSeries {
    let mut skipped = Vec::new();
    let kappa_at: Vec<Option<f64>> = t
        .rows
        .iter()
        .map(|r| match r.term_at[0] {
            [Some(p), Some(m)] if m > 0.0 => Some(p / m),
            [Some(_), Some(_)] => {
                skipped.push(r.k);
                None
            }
            _ => None,
        })
        .collect();
    let kappa_upto: Vec<Option<f64>> = t
        .rows
        .iter()
        .map(|r| (r.term_upto[0][1] > 0.0).then(|| r.term_upto[0][0] / r.term_upto[0][1]))
        .collect();
    let confident_at = |k: usize| {
        k >= opts.transient.max(1) && !t.rows[k].low_confidence[0] && t.rows[k - 1].survive[0] >= opts.min_survival
    };
    let at_flatness = Flatness::of(&kappa_at, confident_at, ideal);
    let upto_flatness = Flatness::of(&kappa_upto, |k| k >= opts.transient.max(1), ideal);
    KappaSeries {
        kappa_at,
        kappa_upto,
        at_flatness,
        upto_flatness,
        options: opts,
        skipped,
    }
}

/// Per-step information quantities of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoCurve {
    pub horizon: usize,
    /// Error probability over decided mass at the horizon.
    pub alpha_hat: f64,
    /// `I(X; U_k)`, direct evaluation.
    pub mi: Vec<f64>,
    pub mi_closed_form: Vec<f64>,
    /// `1 − H_b(α̂)`.
    pub mi_final: f64,
    /// `I(X; U_k | U_{k−1})`, zero at `k = 0`.
    pub mi_increment: Vec<f64>,
    /// `I(X; U_{k−1} | U_k)`, zero at `k = 0`.
    pub markov: Vec<f64>,
    pub kappa_at: Vec<Option<f64>>,
    pub kappa_upto: Vec<Option<f64>>,
    /// `[k][x][u]`; `None` where undefined.
    pub info_density: Vec<[[Option<Bits>; 3]; 2]>,
    /// `[k][x][u][u_prev]`; `None` where undefined.
    pub cond_info_density: Vec<[[[Option<Bits>; 3]; 3]; 2]>,
}

pub fn info_curve(t: &EnsembleTable) -> Result<InfoCurve> {
    let n = t.rows.len();
    let mut mi = Vec::with_capacity(n);
    let mut mi_closed_form = Vec::with_capacity(n);
    let mut mi_inc = vec![0.0; n];
    let mut markov = vec![0.0; n];
    let mut dens = Vec::with_capacity(n);
    let mut cond = Vec::with_capacity(n);
    for k in 0..n {
        let m = mutual_information(t, k)?;
        mi.push(m.direct);
        mi_closed_form.push(m.closed_form);
        if k > 0 {
            mi_inc[k] = mi_increment(t, k)?;
            markov[k] = markov_residual(t, k)?;
        }
        let mut d = [[None; 3]; 2];
        let mut c = [[[None; 3]; 3]; 2];
        for x in Hypothesis::BOTH {
            for u in STATES {
                d[x.index()][sidx(u)] = info_density(t, k, x, u).ok().map(Bits);
                for prev in STATES {
                    c[x.index()][sidx(u)][sidx(prev)] = conditional_info_density(t, k, x, u, prev).ok().map(Bits);
                }
            }
        }
        dens.push(d);
        cond.push(c);
    }
    let ks = kappa_series(t, KappaOptions::default(), None);
    let alpha_hat = t.alpha_hat();
    Ok(InfoCurve {
        horizon: t.horizon,
        alpha_hat,
        mi,
        mi_closed_form,
        mi_final: binary_mi_final(alpha_hat),
        mi_increment: mi_inc,
        markov,
        kappa_at: ks.kappa_at,
        kappa_upto: ks.kappa_upto,
        info_density: dens,
        cond_info_density: cond,
    })
}

/// The transitions of the density recursion, named by `(U_{k−1}, U_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecursionCase {
    /// `+1 → +1`
    StayPlus,
    /// `ε → +1`
    EnterPlus,
    /// `ε → −1`
    EnterMinus,
    /// `−1 → −1`
    StayMinus,
    /// `ε → ε`
    StayErased,
}

impl RecursionCase {
    pub const ALL: [RecursionCase; 5] = [
        RecursionCase::StayPlus,
        RecursionCase::EnterPlus,
        RecursionCase::EnterMinus,
        RecursionCase::StayMinus,
        RecursionCase::StayErased,
    ];

    /// `(U_{k−1}, U_k)`.
    pub fn states(self) -> (TernaryState, TernaryState) {
        use TernaryState::*;
        match self {
            RecursionCase::StayPlus => (Plus, Plus),
            RecursionCase::EnterPlus => (Erasure, Plus),
            RecursionCase::EnterMinus => (Erasure, Minus),
            RecursionCase::StayMinus => (Minus, Minus),
            RecursionCase::StayErased => (Erasure, Erasure),
        }
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, RecursionCase::StayPlus | RecursionCase::StayMinus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResidual {
    pub case: RecursionCase,
    /// Cells (k, x) with finite densities on both sides.
    pub cells: usize,
    /// `max |i(x;U_k) − i(x;U_{k−1}) − i(x;U_k|U_{k−1})|`, bits.
    pub identity: f64,
    pub identity_at_k: usize,
    /// Largest magnitude of the term the case equation drops: the conditional
    /// density for absorbing cases, `i(x; U_{k−1} = ε)` otherwise.
    pub reduction: f64,
    /// Identity residual at `k = 1`, where `U_0` is deterministic.
    pub first_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecursionReport {
    pub cases: Vec<CaseResidual>,
}

impl DensityRecursionReport {
    pub fn case(&self, c: RecursionCase) -> &CaseResidual {
        self.cases.iter().find(|r| r.case == c).expect("every case is reported")
    }
}

/// Evaluates the information-density recursion for each transition, over
/// every `(k, x)` with positive probability whose rows are not flagged
/// low-confidence.
pub fn verify_density_recursion(t: &EnsembleTable) -> DensityRecursionReport {
    let cases = RecursionCase::ALL
        .iter()
        .map(|&case| {
            let (prev, u) = case.states();
            let mut out = CaseResidual {
                case,
                cells: 0,
                identity: 0.0,
                identity_at_k: 0,
                reduction: 0.0,
                first_step: None,
            };
            for k in 1..t.rows.len() {
                for x in Hypothesis::BOTH {
                    let r = &t.rows[k];
                    if r.given(x, u) <= 0.0 || t.rows[k - 1].given(x, prev) <= 0.0 {
                        continue;
                    }
                    if r.low_confidence[x.index()] || (case.is_absorbing() && t.rows[k - 1].low_confidence[x.index()]) {
                        continue;
                    }
                    let (Ok(now), Ok(before), Ok(cond)) = (
                        info_density(t, k, x, u),
                        info_density(t, k - 1, x, prev),
                        conditional_info_density(t, k, x, u, prev),
                    ) else {
                        continue;
                    };
                    if !(now.is_finite() && before.is_finite() && cond.is_finite()) {
                        continue;
                    }
                    let res = (now - before - cond).abs();
                    out.cells += 1;
                    if res > out.identity {
                        out.identity = res;
                        out.identity_at_k = k;
                    }
                    let dropped = if case.is_absorbing() { cond } else { before };
                    out.reduction = out.reduction.max(dropped.abs());
                    if k == 1 {
                        out.first_step = Some(out.first_step.unwrap_or(0.0).max(res));
                    }
                }
            }
            out
        })
        .collect();
    DensityRecursionReport { cases }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    /// `I(X; U_{k−1} | U_k)` per k, bits.
    pub series: Vec<f64>,
    pub max: f64,
    pub at_k: usize,
    /// Largest contribution of `U_k = ε` terms; zero since `ε` is only reachable from `ε`.
    pub erasure_contribution: f64,
}

pub fn verify_markov_chain(t: &EnsembleTable) -> Result<MarkovReport> {
    let mut series = vec![0.0; t.rows.len()];
    let mut erasure_contribution: f64 = 0.0;
    for (k, slot) in series.iter_mut().enumerate().skip(1) {
        let j = pair_joint(t, k)?;
        *slot = conditional_mi(&j);
        let e = sidx(TernaryState::Erasure);
        let mut only_e = [[[0.0; 3]; 3]; 2];
        for x in 0..2 {
            for b in 0..3 {
                only_e[x][b][e] = j[x][b][e];
            }
        }
        erasure_contribution = erasure_contribution.max(conditional_mi(&only_e));
    }
    let (at_k, max) = series
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    Ok(MarkovReport {
        series,
        max,
        at_k,
        erasure_contribution,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiEvolutionReport {
    pub alpha_hat: f64,
    pub mi_final: f64,
    /// `max_k |I(X;U_k) − P(U_k=+1|X=+1)/(1 − α̂)·mi_final|`.
    pub linearity: f64,
    pub linearity_at_k: usize,
    /// `linearity / mi_final`.
    pub linearity_relative: f64,
    /// `max_k |I(X;U_k) − Σ_{l≤k} I(X;U_l|U_{l−1})|`.
    pub chain_rule: f64,
    /// `max_k |I(X;U_k) − I(X;U_{k−1}) − I(X;U_k|U_{k−1})|`.
    pub increment: f64,
    /// `|I(X;U_horizon) − mi_final|`.
    pub final_gap: f64,
    /// Largest decrease of `I(X;U_k)` between consecutive steps.
    pub max_decrease: f64,
    pub max_mi: f64,
}

pub fn verify_mi_evolution(t: &EnsembleTable) -> Result<MiEvolutionReport> {
    let alpha_hat = t.alpha_hat();
    let mi_final = binary_mi_final(alpha_hat);
    let scale = mi_final / (1.0 - alpha_hat);
    let mut rep = MiEvolutionReport {
        alpha_hat,
        mi_final,
        linearity: 0.0,
        linearity_at_k: 0,
        linearity_relative: 0.0,
        chain_rule: 0.0,
        increment: 0.0,
        final_gap: 0.0,
        max_decrease: 0.0,
        max_mi: 0.0,
    };
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in 0..t.rows.len() {
        let mi = mutual_information(t, k)?.direct;
        let lin = (mi - t.rows[k].term_upto[0][0] * scale).abs();
        if lin > rep.linearity {
            rep.linearity = lin;
            rep.linearity_at_k = k;
        }
        if k > 0 {
            let inc = mi_increment(t, k)?;
            sum += inc;
            rep.increment = rep.increment.max((mi - last - inc).abs());
            rep.max_decrease = rep.max_decrease.max(last - mi);
        }
        rep.chain_rule = rep.chain_rule.max((mi - sum).abs());
        rep.max_mi = rep.max_mi.max(mi);
        last = mi;
    }
    rep.final_gap = (last - mi_final).abs();
    rep.linearity_relative = if mi_final > 0.0 { rep.linearity / mi_final } else { 0.0 };
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{EnsembleTable, StateRow, TableSource};

    fn prob_table(rows: &[([f64; 2], [f64; 2])]) -> EnsembleTable {
        // rows of (upto under X=+1 as [+1, −1], hazards under X=+1); mirrored for X=−1
        let rows = rows
            .iter()
            .enumerate()
            .map(|(k, &(u, h))| StateRow {
                k,
                term_at: if k == 0 { [[None; 2]; 2] } else { [[Some(h[0]), Some(h[1])], [Some(h[1]), Some(h[0])]] },
                term_upto: [u, [u[1], u[0]]],
                survive: [1.0 - u[0] - u[1]; 2],
                low_confidence: [k == 0; 2],
                counts: None,
            })
            .collect::<Vec<_>>();
        EnsembleTable {
            source: TableSource::Oracle,
            horizon: rows.len() - 1,
            trials_per_hypothesis: None,
            censored_fraction: rows.last().unwrap().survive[0],
            confidence_floor: 0,
            rows,
        }
    }

    fn perfect() -> EnsembleTable {
        prob_table(&[([0.0, 0.0], [0.0, 0.0]), ([1.0, 0.0], [1.0, 0.0])])
    }

    #[test]
    fn step_zero_carries_no_information() {
        let t = perfect();
        assert_eq!(info_density(&t, 0, Hypothesis::Plus, TernaryState::Erasure).unwrap(), 0.0);
        assert_eq!(mutual_information(&t, 0).unwrap().direct, 0.0);
        assert!(matches!(
            info_density(&t, 0, Hypothesis::Plus, TernaryState::Plus),
            Err(Error::UndefinedCell { .. })
        ));
    }

    #[test]
    fn perfect_test_yields_one_bit() {
        let t = perfect();
        assert_eq!(info_density(&t, 1, Hypothesis::Plus, TernaryState::Plus).unwrap(), 1.0);
        assert_eq!(
            info_density(&t, 1, Hypothesis::Minus, TernaryState::Plus).unwrap(),
            f64::NEG_INFINITY
        );
        let m = mutual_information(&t, 1).unwrap();
        assert_eq!(m.direct, 1.0);
        assert_eq!(m.closed_form, 1.0);
    }

    #[test]
    fn final_value_at_nominal_alpha() {
        assert!((binary_mi_final(0.1) - 0.531_004_406).abs() < 1e-8);
        assert_eq!(binary_mi_final(0.0), 1.0);
        assert!((binary_mi_final(0.5)).abs() < 1e-15);
        assert!((bits_to_nats(1.0) - LN_2).abs() < 1e-16);
        assert!((nats_to_bits(bits_to_nats(0.37)) - 0.37).abs() < 1e-16);
    }

    #[test]
    fn never_terminating_table_has_no_information() {
        let t = prob_table(&vec![([0.0, 0.0], [0.0, 0.0]); 6]);
        for k in 0..6 {
            let m = mutual_information(&t, k).unwrap();
            assert_eq!((m.direct, m.closed_form), (0.0, 0.0));
            assert_eq!(info_density(&t, k, Hypothesis::Minus, TernaryState::Erasure).unwrap(), 0.0);
        }
    }

    /// A table whose per-step ratio is exactly κ = 9 at every step.
    fn constant_kappa(steps: usize) -> EnsembleTable {
        let (hp, hm) = (0.09, 0.01);
        let mut rows = vec![([0.0, 0.0], [0.0, 0.0])];
        let (mut u, mut s) = ([0.0, 0.0], 1.0);
        for _ in 0..steps {
            u[0] += s * hp;
            u[1] += s * hm;
            s *= 1.0 - hp - hm;
            rows.push((u, [hp, hm]));
        }
        prob_table(&rows)
    }

    #[test]
    fn expectation_identity_and_closed_form() {
        let t = constant_kappa(40);
        for k in 0..=40 {
            let m = mutual_information(&t, k).unwrap();
            assert!(m.discrepancy < 1e-12, "k={k} {m:?}");
            assert!((expected_info_density(&t, k).unwrap() - m.direct).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_table_densities_mirror() {
        let t = constant_kappa(10);
        for k in 1..=10 {
            let a = info_density(&t, k, Hypothesis::Plus, TernaryState::Plus).unwrap();
            let b = info_density(&t, k, Hypothesis::Minus, TernaryState::Minus).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_ratio_satisfies_every_identity() {
        let t = constant_kappa(60);
        let ks = kappa_series(&t, KappaOptions::default(), Some(9.0));
        assert!(ks.at_flatness.max_rel_deviation.unwrap() < 1e-12);
        assert!(ks.upto_flatness.max_rel_deviation.unwrap() < 1e-12);
        assert!(ks.at_flatness.ideal_gap.unwrap() < 1e-12);

        let rec = verify_density_recursion(&t);
        for c in &rec.cases {
            assert!(c.identity < 1e-12, "{c:?}");
            assert_eq!(c.reduction, 0.0, "{c:?}");
        }
        let mk = verify_markov_chain(&t).unwrap();
        assert!(mk.max < 1e-12);
        assert_eq!(mk.erasure_contribution, 0.0);

        let ev = verify_mi_evolution(&t).unwrap();
        assert!((ev.alpha_hat - 0.1).abs() < 1e-12);
        assert!(ev.linearity < 1e-12);
        assert!(ev.chain_rule < 1e-12);
        assert!(ev.increment < 1e-12);
        assert!(ev.max_decrease <= 0.0);
    }

    #[test]
    fn drifting_ratio_is_measured_not_hidden() {
        // κ grows over time: recursion and Markov residuals must be visible
        let mut rows = vec![([0.0, 0.0], [0.0, 0.0])];
        let (mut u, mut s) = ([0.0, 0.0], 1.0);
        for k in 1..=30 {
            let hm = 0.02 / k as f64;
            u[0] += s * 0.08;
            u[1] += s * hm;
            s *= 1.0 - 0.08 - hm;
            rows.push((u, [0.08, hm]));
        }
        let t = prob_table(&rows);
        let rec = verify_density_recursion(&t);
        assert!(rec.case(RecursionCase::EnterPlus).identity > 1e-3);
        assert_eq!(rec.case(RecursionCase::StayPlus).reduction, 0.0);
        assert_eq!(rec.case(RecursionCase::StayErased).identity, 0.0);
        assert!(verify_markov_chain(&t).unwrap().max > 1e-6);
        let ev = verify_mi_evolution(&t).unwrap();
        // chain rule and increment identity differ from the MI path exactly by the Markov residual
        assert!(ev.increment > 1e-6);
    }

    #[test]
    fn first_step_reduces_exactly() {
        let t = constant_kappa(3);
        let rec = verify_density_recursion(&t);
        assert_eq!(rec.case(RecursionCase::EnterPlus).first_step, Some(0.0));
        assert_eq!(rec.case(RecursionCase::EnterMinus).first_step, Some(0.0));
    }

    #[test]
    fn conditional_density_from_absorbed_state_is_zero() {
        let t = constant_kappa(5);
        for k in 2..=5 {
            let c = conditional_info_density(&t, k, Hypothesis::Plus, TernaryState::Plus, TernaryState::Plus).unwrap();
            assert_eq!(c, 0.0);
            // leaving an absorbed state is impossible under either hypothesis: 0/0
            assert!(conditional_info_density(&t, k, Hypothesis::Plus, TernaryState::Minus, TernaryState::Plus).is_err());
        }
        assert!(conditional_info_density(&t, 1, Hypothesis::Plus, TernaryState::Plus, TernaryState::Plus).is_err());
    }

    #[test]
    fn bits_sentinel_round_trips() {
        let v = vec![Bits(f64::NEG_INFINITY), Bits(0.25)];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["-inf",0.25]"#);
        let back: Vec<Bits> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}

//! Verification reports: identity checks on one table, Monte Carlo versus
//! oracle cross-validation, and the residual sweep over ρ.
//!
//! Exact identities carry a tolerance and a pass/fail status. Quantities that
//! hold only for a test stopping exactly on its thresholds are reported with
//! status `info`; their decay under the sweep is what gets asserted.

use serde::{Deserialize, Serialize};

use crate::ensemble::{decision_time_stats, symmetry_report};
use crate::error::Result;
use crate::gauss;
use crate::info::{
    asymmetry, binary_mi_final, expected_info_density, kappa_series, mutual_information, verify_density_recursion,
    verify_markov_chain, verify_mi_evolution, KappaOptions, RecursionCase,
};
use crate::model::{NoiseModel, TestConfig};
use crate::oracle::{oracle_tables, propagate, OracleGrid};
use crate::table::{check_conservation, EnsembleTable, TableSource};

/// Standard errors allowed for statistical agreement.
pub const SIGMAS: f64 = 4.0;
/// Largest relative spread of the per-step boundary ratio on exact tables.
pub const KAPPA_FLATNESS_TOL: f64 = 0.02;
/// Largest linearity residual, relative to the final mutual information.
pub const LINEARITY_TOL: f64 = 0.01;
pub const IDENTITY_TOL: f64 = 1e-10;
/// Survival allowed at the horizon.
pub const SURVIVAL_TOL: f64 = 1e-6;
/// Default ρ values of the residual sweep.
pub const SWEEP_RHOS: [f64; 3] = [0.04, 0.01, 0.0025];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statement: String,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn bound(name: &str, statement: &str, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            statement: statement.into(),
            residual: Some(residual),
            tolerance: Some(tolerance),
            status: if residual <= tolerance { Status::Pass } else { Status::Fail },
            note: None,
        }
    }

    fn info(name: &str, statement: &str, value: f64) -> Self {
        Check {
            name: name.into(),
            statement: statement.into(),
            residual: Some(value),
            tolerance: None,
            status: Status::Info,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }
}

/// Identity checks on a single table. `nominal_alpha` adds the nominal
/// reference values; `kappa` selects the cells of the flatness statistic.
pub fn verify_table(t: &EnsembleTable, nominal_alpha: Option<f64>, kappa: KappaOptions) -> Result<VerificationReport> {
    let exact = t.source == TableSource::Oracle;
    let mut checks = Vec::new();

    if exact {
        let mass = t
            .rows
            .iter()
            .map(|r| {
                (0..2)
                    .map(|x| (r.term_upto[x][0] + r.term_upto[x][1] + r.survive[x] - 1.0).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        checks.push(Check::bound(
            "conservation",
            "absorbed plus surviving probability is one at every k",
            mass,
            crate::oracle::DEFAULT_MASS_TOLERANCE,
        ));
        checks.push(Check::bound(
            "symmetry",
            "P(U_k=a|X=x) = P(U_k=-a|X=-x)",
            asymmetry(t),
            1e-12,
        ));
    } else {
        let c = check_conservation(t);
        let mut chk = Check::bound(
            "conservation",
            "survivor counts balance absorptions exactly at every k",
            c.violations.len() as f64,
            0.0,
        );
        if let Some((k, why)) = c.violations.first() {
            chk = chk.with_note(format!("k={k}: {why}"));
        }
        checks.push(chk);
        let s = symmetry_report(t);
        let worst = [s.correct_decision, s.unconditional, s.conditional_on_erasure, s.survival]
            .iter()
            .filter_map(|r| r.max_z)
            .fold(0.0, f64::max);
        checks.push(if s.degenerate {
            Check::info("symmetry", "hypothesis symmetry, in standard errors", worst)
                .with_note("fewer than two trials; no standard error")
        } else {
            Check::bound("symmetry", "hypothesis symmetry, in standard errors", worst, SIGMAS)
        });
    }

    let decrease = t
        .rows
        .windows(2)
        .map(|w| {
            (0..2)
                .flat_map(|x| (0..2).map(move |a| (x, a)))
                .map(|(x, a)| w[0].term_upto[x][a] - w[1].term_upto[x][a])
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    checks.push(Check::bound(
        "monotone_termination",
        "P(U_k=a|X=x) is nondecreasing in k",
        decrease,
        0.0,
    ));

    let mut worst_disc: f64 = 0.0;
    let mut worst_expect: f64 = 0.0;
    let mut range: f64 = 0.0;
    for k in 0..t.rows.len() {
        let m = mutual_information(t, k)?;
        worst_disc = worst_disc.max(m.discrepancy);
        worst_expect = worst_expect.max((expected_info_density(t, k)? - m.direct).abs());
        range = range.max((-m.direct).max(m.direct - 1.0));
    }
    let mi0 = mutual_information(t, 0)?.direct;
    checks.push(Check::bound("mi_initial", "I(X;U_0) = 0", mi0, 0.0));
    checks.push(Check::bound("mi_range", "0 <= I(X;U_k) <= 1 bit", range.max(0.0), 0.0));
    let closed = if exact {
        Check::bound(
            "mi_closed_form",
            "closed-form I(X;U_k) from the X=+1 termination probabilities equals the direct joint evaluation",
            worst_disc,
            1e-12,
        )
    } else {
        Check::info(
            "mi_closed_form",
            "closed-form I(X;U_k) minus the direct joint evaluation (table not exactly symmetric)",
            worst_disc,
        )
    };
    checks.push(closed);
    checks.push(Check::bound(
        "info_density_expectation",
        "E[i(X;U_k)] = I(X;U_k)",
        worst_expect,
        IDENTITY_TOL,
    ));

    let ev = verify_mi_evolution(t)?;
    checks.push(if exact {
        Check::bound(
            "mi_monotone",
            "I(X;U_k) is nondecreasing in k",
            ev.max_decrease.max(0.0),
            1e-12,
        )
    } else {
        Check::info("mi_monotone", "largest decrease of I(X;U_k) between steps", ev.max_decrease.max(0.0))
    });
    let mut fin = Check::bound(
        "mi_final",
        "I(X;U_horizon) = 1 + a log2 a + (1-a) log2(1-a) with a the measured error probability",
        ev.final_gap,
        IDENTITY_TOL,
    )
    .with_note(format!("alpha_hat = {:.10}, I_final = {:.10}", ev.alpha_hat, ev.mi_final));
    if t.source == TableSource::MonteCarlo {
        // The identity presumes equal error rates under both hypotheses;
        // sampled tables are only symmetric to within the symmetry check.
        fin.status = Status::Info;
        fin.tolerance = None;
    }
    if t.censored_fraction > 0.0 {
        fin = fin.with_note(format!(
            "alpha_hat = {:.10}; horizon leaves {:.3e} undecided",
            ev.alpha_hat, t.censored_fraction
        ));
    }
    checks.push(fin);
    if let Some(a) = nominal_alpha {
        checks.push(Check::info(
            "mi_final_nominal",
            "1 - H_b(alpha) at the nominal alpha",
            binary_mi_final(a),
        ));
    }
    let mut lin = Check::bound(
        "mi_linearity",
        "I(X;U_k) tracks P(U_k=+1|X=+1)/(1-alpha_hat) * I_final; residual relative to I_final",
        ev.linearity_relative,
        LINEARITY_TOL,
    );
    if t.source == TableSource::MonteCarlo {
        // Sampling noise in the asymmetry alone can exceed the bound.
        lin.status = Status::Info;
        lin.tolerance = None;
    }
    checks.push(lin);
    checks.push(Check::info(
        "mi_chain_rule",
        "I(X;U_k) minus the sum of I(X;U_l|U_{l-1}) up to k",
        ev.chain_rule,
    ));
    checks.push(Check::info(
        "mi_increment",
        "I(X;U_k) - I(X;U_{k-1}) minus I(X;U_k|U_{k-1})",
        ev.increment,
    ));

    let ks = kappa_series(t, kappa, nominal_alpha.map(|a| (1.0 - a) / a));
    let flat = ks.at_flatness.max_rel_deviation.unwrap_or(f64::NAN);
    let note = format!(
        "median {:?} over {} steps from k = {}",
        ks.at_flatness.median, ks.at_flatness.cells, kappa.transient
    );
    checks.push(if exact && ks.at_flatness.cells > 0 {
        Check::bound(
            "kappa_flatness",
            "per-step boundary ratio: max relative deviation from its median",
            flat,
            KAPPA_FLATNESS_TOL,
        )
        .with_note(note)
    } else {
        Check::info(
            "kappa_flatness",
            "per-step boundary ratio: max relative deviation from its median",
            flat,
        )
        .with_note(note)
    });
    checks.push(Check::info(
        "kappa_cumulative_flatness",
        "cumulative boundary ratio: max relative deviation from its median",
        ks.upto_flatness.max_rel_deviation.unwrap_or(f64::NAN),
    ));
    if let Some(gap) = ks.at_flatness.ideal_gap {
        checks.push(Check::info(
            "kappa_ideal_gap",
            "|median per-step ratio - (1-alpha)/alpha|",
            gap,
        ));
    }

    let rec = verify_density_recursion(t);
    for c in &rec.cases {
        let name = serde_json::to_value(c.case)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        if c.case.is_absorbing() {
            checks.push(Check::bound(
                &format!("density_recursion_{name}_reduction"),
                "conditional density after absorption is log2(1/1)",
                c.reduction,
                0.0,
            ));
        }
        checks.push(
            Check::info(
                &format!("density_recursion_{name}"),
                "i(x;U_k) - i(x;U_{k-1}) - i(x;U_k|U_{k-1}), bits",
                c.identity,
            )
            .with_note(format!("max at k = {} over {} cells", c.identity_at_k, c.cells)),
        );
        if let Some(f) = c.first_step {
            checks.push(Check::bound(
                &format!("density_recursion_{name}_first_step"),
                "recursion from the deterministic initial state",
                f,
                1e-12,
            ));
        }
    }

    let mk = verify_markov_chain(t)?;
    checks.push(Check::bound(
        "markov_erasure_terms",
        "U_k = e terms of I(X;U_{k-1}|U_k)",
        mk.erasure_contribution,
        0.0,
    ));
    checks.push(
        Check::info("markov_chain", "max_k I(X;U_{k-1}|U_k), bits", mk.max).with_note(format!("at k = {}", mk.at_k)),
    );

    let surv = t.last().survive_pooled();
    checks.push(if exact {
        Check::bound("termination", "surviving mass at the horizon", surv, SURVIVAL_TOL)
    } else {
        Check::info("termination", "censored fraction at the horizon", t.censored_fraction)
    });

    Ok(VerificationReport { checks })
}

/// `P(Bin(n, p) ≤ c)` and `P(Bin(n, p) ≥ c)`.
fn binomial_tails(c: u64, n: u64, p: f64) -> (f64, f64) {
    if p <= 0.0 {
        return (1.0, if c == 0 { 1.0 } else { 0.0 });
    }
    if p >= 1.0 {
        return (if c >= n { 1.0 } else { 0.0 }, 1.0);
    }
    let (nf, lp, lq) = (n as f64, p.ln(), (-p).ln_1p());
    let ln_choose = |j: u64| libm::lgamma(nf + 1.0) - libm::lgamma(j as f64 + 1.0) - libm::lgamma(nf - j as f64 + 1.0);
    let pmf = |j: u64| (ln_choose(j) + j as f64 * lp + (nf - j as f64) * lq).exp();
    let mean = nf * p;
    let sum = |range: &mut dyn Iterator<Item = u64>| {
        let mut s = 0.0;
        for j in range {
            let v = pmf(j);
            s += v;
            if v < 1e-300 {
                break;
            }
        }
        s
    };
    // Sum the tail away from the mean; the other one is its complement.
    if (c as f64) < mean {
        let lower = sum(&mut (0..=c).rev()).min(1.0);
        (lower, (1.0 - lower + pmf(c)).min(1.0))
    } else {
        let upper = sum(&mut (c..=n)).min(1.0);
        ((1.0 - upper + pmf(c)).min(1.0), upper)
    }
}

/// Agreement of an observed count with `Bin(n, p)`. Where the normal
/// approximation is poor (`n·p·(1−p) < 9`) the exact two-sided tail is
/// compared with that of a ±`SIGMAS` normal deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellTest {
    z: Option<f64>,
    pass: bool,
}

fn cell_test(count: u64, n: u64, p: f64) -> CellTest {
    let p = p.clamp(0.0, 1.0);
    let var = n as f64 * p * (1.0 - p);
    if var >= 9.0 {
        let z = (count as f64 - n as f64 * p) / var.sqrt();
        CellTest {
            z: Some(z),
            pass: z.abs() <= SIGMAS,
        }
    } else {
        let (lo, hi) = binomial_tails(count, n, p);
        CellTest {
            z: None,
            pass: lo.min(hi) >= gauss::sf(SIGMAS),
        }
    }
}

/// Cell-wise comparison of a Monte Carlo table with an exact one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub cells: usize,
    /// Cells tested with the exact binomial tail.
    pub sparse_cells: usize,
    pub failures: Vec<(usize, String)>,
    pub max_abs_z: f64,
    /// Same, for the per-step boundary split `absorbed₋ / (absorbed₊ + absorbed₋)`.
    pub kappa_cells: usize,
    pub kappa_failures: Vec<usize>,
    pub kappa_max_abs_z: f64,
    /// z-score of the limiting `P(U=+1|X=+1)`.
    pub limit_z: f64,
    pub mc_mean_time: f64,
    pub mc_mean_time_se: f64,
    pub oracle_mean_time: f64,
}

impl CrossValidation {
    pub fn mean_time_z(&self) -> f64 {
        (self.mc_mean_time - self.oracle_mean_time) / self.mc_mean_time_se
    }
}

/// Compares every count of `mc` with the binomial law implied by `exact`:
/// cumulative and surviving cells on all trials, per-step hazards on the
/// survivors of confident steps.
pub fn cross_validate(mc: &EnsembleTable, exact: &EnsembleTable) -> Result<CrossValidation> {
    let n = mc.trials_per_hypothesis.ok_or_else(|| crate::Error::Schema("Monte Carlo table has no counts".into()))?;
    let steps = mc.horizon.min(exact.horizon);
    let mut out = CrossValidation {
        cells: 0,
        sparse_cells: 0,
        failures: Vec::new(),
        max_abs_z: 0.0,
        kappa_cells: 0,
        kappa_failures: Vec::new(),
        kappa_max_abs_z: 0.0,
        limit_z: 0.0,
        mc_mean_time: 0.0,
        mc_mean_time_se: 0.0,
        oracle_mean_time: 0.0,
    };
    let record = |out: &mut CrossValidation, k: usize, what: String, t: CellTest| {
        out.cells += 1;
        match t.z {
            Some(z) => out.max_abs_z = out.max_abs_z.max(z.abs()),
            None => out.sparse_cells += 1,
        }
        if !t.pass {
            out.failures.push((k, what));
        }
    };
    for k in 1..=steps {
        let (m, e) = (&mc.rows[k], &exact.rows[k]);
        let c = m.counts.ok_or_else(|| crate::Error::Schema(format!("row {k} has no counts")))?;
        let prev = mc.rows[k - 1].counts.map(|c| c.survivors).unwrap_or([n; 2]);
        for x in 0..2 {
            for a in 0..2 {
                let t = cell_test(c.cumulative[x][a], n, e.term_upto[x][a]);
                record(&mut out, k, format!("cumulative x{x} a{a}"), t);
            }
            record(&mut out, k, format!("survivors x{x}"), cell_test(c.survivors[x], n, e.survive[x]));
            if m.low_confidence[x] || e.low_confidence[x] {
                continue;
            }
            for a in 0..2 {
                if let Some(h) = e.term_at[x][a] {
                    let t = cell_test(c.absorbed[x][a], prev[x], h);
                    record(&mut out, k, format!("hazard x{x} a{a}"), t);
                }
            }
            if let [Some(hp), Some(hm)] = e.term_at[x] {
                let total = c.absorbed[x][0] + c.absorbed[x][1];
                let wrong = if x == 0 { c.absorbed[x][1] } else { c.absorbed[x][0] };
                let q = if x == 0 { hm } else { hp } / (hp + hm);
                if total > 0 && hp + hm > 0.0 {
                    let t = cell_test(wrong, total, q);
                    out.kappa_cells += 1;
                    if let Some(z) = t.z {
                        out.kappa_max_abs_z = out.kappa_max_abs_z.max(z.abs());
                    }
                    if !t.pass {
                        out.kappa_failures.push(k);
                    }
                }
            }
        }
    }
    let (lm, le) = (mc.rows[steps].counts.unwrap_or_default(), &exact.rows[steps]);
    let p = le.term_upto[0][0];
    out.limit_z = (lm.cumulative[0][0] as f64 - n as f64 * p) / (n as f64 * p * (1.0 - p)).sqrt();

    let ms = decision_time_stats(mc)?;
    let es = decision_time_stats(exact)?;
    out.mc_mean_time = ms.mean;
    out.mc_mean_time_se = ms.mean_se.unwrap_or(f64::NAN);
    out.oracle_mean_time = es.mean;
    Ok(out)
}

impl CrossValidation {
    pub fn report(&self, wald_mean: Option<f64>) -> VerificationReport {
        let mut checks = vec![
            Check::bound(
                "cross_validation_cells",
                "Monte Carlo counts within 4 binomial sigma of the oracle, cell by cell",
                self.failures.len() as f64,
                0.0,
            )
            .with_note(format!(
                "{} cells ({} by exact tail), max |z| {:.3}{}",
                self.cells,
                self.sparse_cells,
                self.max_abs_z,
                self.failures
                    .first()
                    .map(|(k, w)| format!("; first failure k={k} {w}"))
                    .unwrap_or_default()
            )),
            Check::bound(
                "cross_validation_kappa",
                "per-step boundary split within 4 binomial sigma of the oracle ratio",
                self.kappa_failures.len() as f64,
                0.0,
            )
            .with_note(format!("{} steps, max |z| {:.3}", self.kappa_cells, self.kappa_max_abs_z)),
            Check::bound(
                "cross_validation_limit",
                "limiting P(U=+1|X=+1), |z| against the oracle",
                self.limit_z.abs(),
                SIGMAS,
            ),
            Check::bound(
                "cross_validation_mean_time",
                "mean decision time, |z| against the oracle mean",
                self.mean_time_z().abs(),
                SIGMAS,
            )
            .with_note(format!(
                "Monte Carlo {:.4} ± {:.4}, oracle {:.4}",
                self.mc_mean_time, self.mc_mean_time_se, self.oracle_mean_time
            )),
        ];
        if let Some(w) = wald_mean {
            checks.push(
                Check::info(
                    "wald_mean_time_gap",
                    "(oracle mean decision time - Wald's (1-2 alpha) T/(2 rho)) / Wald's",
                    (self.oracle_mean_time - w) / w,
                )
                .with_note("Wald's approximation neglects overshoot"),
            );
        }
        VerificationReport { checks }
    }
}

/// Residuals of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rho: f64,
    pub alpha: f64,
    pub horizon: usize,
    pub transient: usize,
    pub alpha_hat: f64,
    pub kappa_median: Option<f64>,
    pub kappa_flatness: Option<f64>,
    pub kappa_ideal_gap: Option<f64>,
    pub linearity_relative: f64,
    /// Largest identity residual of the two interior recursion cases.
    pub recursion_interior: f64,
    /// Largest identity residual of the two absorbing cases.
    pub recursion_absorbing: f64,
    /// Largest reduction residual of the absorbing cases.
    pub absorbing_reduction: f64,
    pub markov_max: f64,
    pub survival_at_horizon: f64,
    pub mass_residual: f64,
    pub tail_error_bound: Option<f64>,
    pub mean_time: f64,
    pub wald_mean_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub report: VerificationReport,
}

pub fn sweep_point(config: &TestConfig, grid_points: usize) -> Result<(SweepPoint, OracleGrid)> {
    let g = propagate(config, config.max_steps(), grid_points)?;
    let t = oracle_tables(&g);
    let kopts = KappaOptions::for_config(config);
    let ks = kappa_series(&t, kopts, Some(config.ideal_kappa()));
    let rec = verify_density_recursion(&t);
    let ev = verify_mi_evolution(&t)?;
    let mk = verify_markov_chain(&t)?;
    let ident = |cs: &[RecursionCase]| cs.iter().map(|c| rec.case(*c).identity).fold(0.0, f64::max);
    let point = SweepPoint {
        rho: config.rho(),
        alpha: config.alpha(),
        horizon: config.max_steps(),
        transient: kopts.transient,
        alpha_hat: g.error_probability(),
        kappa_median: ks.at_flatness.median,
        kappa_flatness: ks.at_flatness.max_rel_deviation,
        kappa_ideal_gap: ks.at_flatness.ideal_gap,
        linearity_relative: ev.linearity_relative,
        recursion_interior: ident(&[RecursionCase::EnterPlus, RecursionCase::EnterMinus]),
        recursion_absorbing: ident(&[RecursionCase::StayPlus, RecursionCase::StayMinus]),
        absorbing_reduction: [RecursionCase::StayPlus, RecursionCase::StayMinus]
            .iter()
            .map(|c| rec.case(*c).reduction)
            .fold(0.0, f64::max),
        markov_max: mk.max,
        survival_at_horizon: g.survival[g.steps],
        mass_residual: g.mass_residual,
        tail_error_bound: g.tail_error_bound,
        mean_time: g.absorption_time_moments().0,
        wald_mean_time: config.wald_mean_time(),
    };
    Ok((point, g))
}

/// Strict decrease along the sweep order. The residual is the largest
/// non-decrease between neighbours.
fn decreasing(name: &str, statement: &str, values: &[Option<f64>]) -> Check {
    let vals: Vec<f64> = values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let strict = vals.windows(2).all(|w| w[1] < w[0]);
    let worst = vals
        .windows(2)
        .map(|w| if w[1] < w[0] { 0.0 } else { w[1] - w[0] })
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    Check {
        name: name.into(),
        statement: statement.into(),
        residual: Some(worst),
        tolerance: Some(0.0),
        status: if strict { Status::Pass } else { Status::Fail },
        note: Some(format!("{vals:?}")),
    }
}

/// Runs the oracle at each `(ρ, α)` and checks that every idealization
/// residual decreases along the given order (decreasing ρ).
pub fn run_sweep(points: &[(f64, f64)], grid_points: usize) -> Result<SweepReport> {
    let mut out = Vec::with_capacity(points.len());
    for &(rho, alpha) in points {
        let c = TestConfig::new(rho, alpha, NoiseModel::Gaussian)?;
        out.push(sweep_point(&c, grid_points)?.0);
    }
    let col = |f: fn(&SweepPoint) -> Option<f64>| out.iter().map(f).collect::<Vec<_>>();
    let checks = vec![
        decreasing(
            "sweep_kappa_flatness",
            "per-step boundary ratio spread decreases with rho",
            &col(|p| p.kappa_flatness),
        ),
        decreasing(
            "sweep_kappa_ideal_gap",
            "|median ratio - (1-alpha)/alpha| decreases with rho",
            &col(|p| p.kappa_ideal_gap),
        ),
        decreasing(
            "sweep_mi_linearity",
            "linearity residual decreases with rho",
            &col(|p| Some(p.linearity_relative)),
        ),
        decreasing(
            "sweep_density_recursion",
            "interior density-recursion residual decreases with rho",
            &col(|p| Some(p.recursion_interior)),
        ),
        decreasing(
            "sweep_markov_chain",
            "max I(X;U_{k-1}|U_k) decreases with rho",
            &col(|p| Some(p.markov_max)),
        ),
        Check::bound(
            "sweep_absorbing_reduction",
            "absorbing-case reduction residual at every sweep point",
            out.iter().map(|p| p.absorbing_reduction).fold(0.0, f64::max),
            0.0,
        ),
    ];
    Ok(SweepReport {
        points: out,
        report: VerificationReport { checks },
    })
}

/// The default sweep at α = 0.1.
pub fn default_sweep_points() -> Vec<(f64, f64)> {
    SWEEP_RHOS.iter().map(|&r| (r, 0.1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::run_ensemble;

    #[test]
    fn binomial_tails_match_small_cases() {
        // Bin(4, 1/2): P(X ≤ 1) = 5/16, P(X ≥ 1) = 15/16
        let (lo, hi) = binomial_tails(1, 4, 0.5);
        assert!((lo - 5.0 / 16.0).abs() < 1e-12);
        assert!((hi - 15.0 / 16.0).abs() < 1e-12);
        let (lo, hi) = binomial_tails(0, 100, 1e-6);
        assert!((lo - (1.0f64 - 1e-6).powi(100)).abs() < 1e-12);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn sparse_cells_use_exact_tails() {
        assert!(cell_test(0, 100_000, 1e-9).pass);
        assert!(!cell_test(3, 100_000, 1e-9).pass);
        assert!(cell_test(1, 100, 0.01).pass);
        let t = cell_test(50_000, 100_000, 0.5);
        assert_eq!(t.z, Some(0.0));
    }

    fn small_oracle() -> (TestConfig, EnsembleTable) {
        let c = TestConfig::reference();
        let g = propagate(&c, c.max_steps(), 1024).unwrap();
        (c, oracle_tables(&g))
    }

    #[test]
    fn oracle_table_passes_exact_checks() {
        let (c, t) = small_oracle();
        let rep = verify_table(&t, Some(c.alpha()), KappaOptions::for_config(&c)).unwrap();
        assert!(rep.passed(), "{:#?}", rep.failures().collect::<Vec<_>>());
        assert_eq!(rep.get("density_recursion_stay_plus_reduction").unwrap().residual, Some(0.0));
        assert_eq!(rep.get("mi_initial").unwrap().status, Status::Pass);
    }

    #[test]
    fn monte_carlo_agrees_with_oracle() {
        let (c, t) = small_oracle();
        let mc = run_ensemble(&c, 20_000, 99).unwrap();
        let cv = cross_validate(&mc, &t).unwrap();
        let rep = cv.report(Some(c.wald_mean_time()));
        assert!(rep.passed(), "{:#?}", rep.failures().collect::<Vec<_>>());
        assert!(cv.cells > 1000);
    }

    #[test]
    fn cross_validation_detects_a_wrong_drift() {
        let (_, t) = small_oracle();
        let other = TestConfig::new(0.05, 0.1, NoiseModel::Gaussian).unwrap();
        let mc = run_ensemble(&other, 20_000, 99).unwrap();
        let rep = cross_validate(&mc, &t).unwrap().report(None);
        assert!(!rep.passed());
    }

    #[test]
    fn tampered_counts_fail_verification() {
        let c = TestConfig::reference().with_max_steps(200).unwrap();
        let mut mc = run_ensemble(&c, 2_000, 5).unwrap();
        assert!(verify_table(&mc, Some(0.1), KappaOptions::default()).unwrap().get("conservation").unwrap().status == Status::Pass);
        mc.rows[10].counts.as_mut().unwrap().absorbed[0][0] += 1;
        let rep = verify_table(&mc, Some(0.1), KappaOptions::default()).unwrap();
        assert_eq!(rep.get("conservation").unwrap().status, Status::Fail);
        assert!(!rep.passed());
    }

    #[test]
    fn decreasing_flags_growth_and_gaps() {
        assert_eq!(decreasing("a", "", &[Some(3.0), Some(2.0), Some(1.0)]).status, Status::Pass);
        assert_eq!(decreasing("a", "", &[Some(3.0), Some(3.0)]).status, Status::Fail);
        assert_eq!(decreasing("a", "", &[Some(3.0), None]).status, Status::Fail);
    }
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.

use std::process::ExitCode;
use std::time::Instant;

use sprt_info::ensemble::{decision_time_stats, run_ensemble, run_ensemble_with, EnsembleOptions};
use sprt_info::experiment::DEFAULT_SEED;
use sprt_info::info::{
    binary_mi_final, kappa_series, mutual_information, verify_density_recursion, verify_markov_chain,
    verify_mi_evolution, KappaOptions, RecursionCase,
};
use sprt_info::oracle::{oracle_tables, propagate, OracleGrid, DEFAULT_GRID_POINTS};
use sprt_info::table::check_conservation;
use sprt_info::verify::{run_sweep, SweepReport, SWEEP_RHOS};
use sprt_info::{EnsembleTable, TestConfig};

const TRIALS: u64 = 100_000;
const SIGMAS: f64 = 4.0;

struct Fixture {
    config: TestConfig,
    mc: EnsembleTable,
    mc_seconds: f64,
    grid: OracleGrid,
    exact: EnsembleTable,
    sweep: SweepReport,
}

impl Fixture {
    fn build() -> Self {
        let config = TestConfig::reference();
        let t0 = Instant::now();
        let mc = run_ensemble(&config, TRIALS, DEFAULT_SEED).expect("ensemble");
        let mc_seconds = t0.elapsed().as_secs_f64();
        let grid = propagate(&config, config.max_steps(), DEFAULT_GRID_POINTS).expect("oracle");
        let exact = oracle_tables(&grid);
        let points: Vec<(f64, f64)> = SWEEP_RHOS.iter().map(|&r| (r, config.alpha())).collect();
        let sweep = run_sweep(&points, DEFAULT_GRID_POINTS).expect("sweep");
        Fixture {
            config,
            mc,
            mc_seconds,
            grid,
            exact,
            sweep,
        }
    }

    fn column(&self, f: impl Fn(&sprt_info::verify::SweepPoint) -> Option<f64>) -> Vec<f64> {
        self.sweep.points.iter().map(|p| f(p).unwrap_or(f64::NAN)).collect()
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

type Outcome = (bool, String);

fn limit_matches_oracle(f: &Fixture) -> Outcome {
    let n = TRIALS as f64;
    let mc = f.mc.last();
    let hits = mc.counts.expect("counts").cumulative[0][0] as f64;
    let p_mc = hits / n;
    let p = f.exact.last().term_upto[0][0];
    let z = (hits - n * p) / (n * p * (1.0 - p)).sqrt();
    let ok = p_mc > 1.0 - f.config.alpha() && z.abs() <= SIGMAS && f.mc_seconds < 60.0;
    (
        ok,
        format!(
            "P(U=+1|X=+1): MC {p_mc:.5}, oracle {p:.5}, z = {z:.2}, MC runtime {:.2} s",
            f.mc_seconds
        ),
    )
}

fn kappa_is_flat(f: &Fixture) -> Outcome {
    let ks = kappa_series(&f.exact, KappaOptions::default(), Some(f.config.ideal_kappa()));
    let dev = ks.at_flatness.max_rel_deviation.unwrap_or(f64::INFINITY);
    let flat = f.column(|p| p.kappa_flatness);
    let gap = f.column(|p| p.kappa_ideal_gap);
    let ok = dev <= 0.02 && strictly_decreasing(&flat) && strictly_decreasing(&gap);
    (
        ok,
        format!(
            "reference spread {dev:.4} (median {:.4}); sweep spread {flat:.5?}, |median - 9| {gap:.4?}",
            ks.at_flatness.median.unwrap_or(f64::NAN)
        ),
    )
}

fn terminates(f: &Fixture) -> Outcome {
    let s = f.grid.survival[f.grid.steps];
    // Censored MC trajectories out of 2n should be Poisson-consistent with s.
    let n2 = 2.0 * TRIALS as f64;
    let censored = (f.mc.censored_fraction * n2).round();
    let expected = n2 * s;
    let consistent = censored == 0.0 || (censored - expected) / expected.max(1e-300).sqrt() <= SIGMAS;
    let ok = s <= 1e-6 && consistent;
    (
        ok,
        format!(
            "oracle survival at horizon {} = {s:.3e}; MC censored {censored} of {n2}",
            f.grid.steps
        ),
    )
}

fn mi_is_linear(f: &Fixture) -> Outcome {
    let ev = verify_mi_evolution(&f.exact).expect("mi evolution");
    let lin = f.column(|p| Some(p.linearity_relative));
    let ok = ev.linearity_relative <= 0.01 && strictly_decreasing(&lin);
    (
        ok,
        format!(
            "reference residual {:.3e} of I_final; sweep {}",
            ev.linearity_relative,
            sci(&lin)
        ),
    )
}

fn final_mi(f: &Fixture) -> Outcome {
    let h = f.exact.horizon;
    let mi = mutual_information(&f.exact, h).expect("mi").direct;
    let a = f.exact.alpha_hat();
    let gap = (mi - binary_mi_final(a)).abs();
    // Entropy in nats, converted independently of the library formula.
    let a0 = 0.1_f64;
    let nominal = 1.0 - (-(a0 * a0.ln()) - (1.0 - a0) * (1.0 - a0).ln()) / std::f64::consts::LN_2;
    let lib = binary_mi_final(a0);
    let ok = gap <= 1e-10 && (lib - nominal).abs() <= 1e-12 && (lib - 0.53100).abs() < 5e-6;
    (
        ok,
        format!("|I(X;U_h) - (1 - H_b({a:.6}))| = {gap:.2e}; nominal alpha = 0.1 gives {lib:.6} bits"),
    )
}

fn recursion_and_markov(f: &Fixture) -> Outcome {
    let rec = verify_density_recursion(&f.exact);
    let all = RecursionCase::ALL.iter().all(|&c| rec.cases.iter().any(|r| r.case == c && r.cells > 0));
    let absorbing_zero = [RecursionCase::StayPlus, RecursionCase::StayMinus]
        .iter()
        .all(|&c| rec.case(c).reduction == 0.0);
    let mk = verify_markov_chain(&f.exact).expect("markov");
    let interior = f.column(|p| Some(p.recursion_interior));
    let markov = f.column(|p| Some(p.markov_max));
    let reductions = f.column(|p| Some(p.absorbing_reduction));
    let ok = all
        && absorbing_zero
        && reductions.iter().all(|&r| r == 0.0)
        && mk.erasure_contribution == 0.0
        && strictly_decreasing(&interior)
        && strictly_decreasing(&markov);
    (
        ok,
        format!(
            "all cases reported: {all}; absorbing residuals {reductions:?}; interior sweep {}; Markov sweep {}",
            sci(&interior),
            sci(&markov)
        ),
    )
}

fn mean_decision_time(f: &Fixture) -> Outcome {
    let s = decision_time_stats(&f.mc).expect("stats");
    let se = s.mean_se.expect("standard error");
    let (exact, _) = f.grid.absorption_time_moments();
    let wald = f.config.wald_mean_time();
    let z = (s.mean - exact) / se;
    let rel = |m: f64| (m - wald).abs() / wald;
    let ok = z.abs() <= SIGMAS && rel(s.mean) <= 0.15 && rel(exact) <= 0.15;
    (
        ok,
        format!(
            "MC {:.3} +- {se:.3}, oracle {exact:.3} (z = {z:.2}); Wald {wald:.3}: MC off by {:.1}%, oracle by {:.1}%",
            s.mean,
            100.0 * rel(s.mean),
            100.0 * rel(exact)
        ),
    )
}

fn determinism_and_conservation(f: &Fixture) -> Outcome {
    let run = |threads| {
        let o = EnsembleOptions {
            threads: Some(threads),
            ..Default::default()
        };
        run_ensemble_with(&f.config, 20_000, DEFAULT_SEED, &o).expect("ensemble").table
    };
    let one = run(1);
    let invariant = [2, 3, 8].iter().all(|&t| run(t) == one);
    let cons = check_conservation(&f.mc);
    let mass = f.grid.mass_residual;
    let ok = invariant && cons.passed() && check_conservation(&one).passed() && mass <= 1e-9;
    (
        ok,
        format!(
            "thread-invariant: {invariant}; conservation on {} rows, {} violations; oracle mass residual {mass:.2e}",
            cons.rows_checked,
            cons.violations.len()
        ),
    )
}

fn main() -> ExitCode {
    let f = Fixture::build();
    let criteria: [(&str, fn(&Fixture) -> Outcome); 8] = [
        ("1 limiting accuracy vs oracle", limit_matches_oracle),
        ("2 boundary ratio constancy", kappa_is_flat),
        ("3 termination", terminates),
        ("4 linear information growth", mi_is_linear),
        ("5 final mutual information", final_mi),
        ("6 density recursion and Markov chain", recursion_and_markov),
        ("7 mean decision time", mean_decision_time),
        ("8 determinism and conservation", determinism_and_conservation),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (ok, detail) = check(&f);
        println!("{} criterion {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sprt_info::ensemble::{decision_time_stats, run_ensemble_with, EnsembleOptions};
use sprt_info::experiment::ExperimentConfig;
use sprt_info::info::{info_curve, KappaOptions};
use sprt_info::io::{read_table_file, write_info_curve, write_sweep_points, write_table_file, Metadata, Timings};
use sprt_info::oracle::{oracle_tables, propagate};
use sprt_info::verify::{cross_validate, run_sweep, verify_table, Status, VerificationReport, SURVIVAL_TOL};
use sprt_info::{EnsembleTable, Error, TableSource, TestConfig};

/// A failed command, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Verification(String),
    Config(String),
    Io(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Verification(m) | Failure::Config(m) | Failure::Io(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Domain { .. }
            | Error::InvalidNoise(_)
            | Error::UnsupportedNoise(_)
            | Error::Schema(_)
            | Error::MemoryBudget { .. } => Failure::Config(m),
            Error::Io(_) => Failure::Io(m),
            Error::ZeroDensity { .. }
            | Error::AllCensored { .. }
            | Error::MassResidual { .. }
            | Error::UndefinedCell { .. }
            | Error::OutOfRange { .. } => Failure::Numerical(m),
        }
    }
}

/// Output directory, file naming and the metadata sidecar of one command.
struct Run {
    dir: PathBuf,
    meta: Metadata,
    started: Instant,
    started_unix: f64,
}

impl Run {
    fn start(command: &str, cfg: &ExperimentConfig) -> Result<Self, Failure> {
        let dir = cfg.output.path.clone();
        fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        let config = serde_json::to_value(cfg).map_err(|e| Failure::Config(e.to_string()))?;
        let started_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64());
        Ok(Run {
            dir,
            meta: Metadata::new(command, config),
            started: Instant::now(),
            started_unix,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.meta.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn warn(&mut self, msg: String) {
        eprintln!("warning: {msg}");
        self.meta.warnings.push(msg);
    }

    fn finish(mut self) -> Result<(), Failure> {
        self.meta.timings = Timings {
            started_unix: self.started_unix,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let p = self.dir.join(format!("{}.meta.json", self.meta.command));
        self.meta.write(&p)?;
        Ok(())
    }
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let f = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| Failure::Io(e.to_string()))?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| Failure::Io(e.to_string()))?;
    Ok(())
}

fn write_table_and_curve(run: &mut Run, cfg: &ExperimentConfig, t: &EnsembleTable, stem: &str) -> Result<(), Failure> {
    let (fmt, prec) = (cfg.output.format, cfg.output.precision);
    let p = run.path(&format!("{stem}_table.{}", fmt.extension()));
    write_table_file(t, &p, fmt, prec)?;
    let curve = info_curve(t)?;
    let p = run.path(&format!("{stem}_info.{}", fmt.extension()));
    let f = File::create(&p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
    write_info_curve(&curve, fmt, prec, f)?;
    run.meta.residual("alpha_hat", curve.alpha_hat);
    run.meta.residual("mi_final", curve.mi_final);
    run.meta.residual("mi_at_horizon", curve.mi[curve.horizon]);
    Ok(())
}

fn censoring_warning(run: &mut Run, t: &EnsembleTable) {
    // Oracle tables always keep some exponentially small mass.
    let floor = match t.source {
        TableSource::MonteCarlo => 0.0,
        TableSource::Oracle => SURVIVAL_TOL,
    };
    if t.censored_fraction > floor {
        run.warn(format!(
            "{:.3e} of the trajectories are undecided at the horizon of {} steps; they are excluded from alpha_hat and decision-time estimates",
            t.censored_fraction, t.horizon
        ));
    }
}

fn monte_carlo(cfg: &ExperimentConfig, test: &TestConfig) -> Result<(EnsembleTable, [Option<f64>; 2]), Failure> {
    let run = run_ensemble_with(test, cfg.trials, cfg.master_seed, &EnsembleOptions::default())?;
    Ok((run.table, run.mean_overshoot))
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let test = cfg.validate()?;
    let mut run = Run::start("simulate", cfg)?;
    run.meta.master_seed = Some(cfg.master_seed);
    let (t, overshoot) = monte_carlo(cfg, &test)?;
    censoring_warning(&mut run, &t);
    run.meta.residual("censored_fraction", t.censored_fraction);
    run.meta.residual("mean_overshoot", overshoot);
    run.meta.residual("wald_mean_time", test.wald_mean_time());
    let fmt = cfg.output.format;
    let stats = decision_time_stats(&t);
    match &stats {
        Ok(s) => {
            run.meta.residual("decision_time", s);
            write_table_and_curve(&mut run, cfg, &t, "mc")?;
        }
        Err(_) => {
            // Still write the table so the censoring can be inspected.
            let p = run.path(&format!("mc_table.{}", fmt.extension()));
            write_table_file(&t, &p, fmt, cfg.output.precision)?;
        }
    }
    println!(
        "simulate: {} trials per hypothesis, horizon {}, censored {:.3e}",
        cfg.trials, t.horizon, t.censored_fraction
    );
    if let Ok(s) = &stats {
        println!("alpha_hat {:.6}, mean decision time {:.3}", t.alpha_hat(), s.mean);
    }
    run.finish()?;
    stats.map(|_| ()).map_err(Failure::from)
}

pub fn oracle(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let test = cfg.validate()?;
    let mut run = Run::start("oracle", cfg)?;
    let g = propagate(&test, test.max_steps(), cfg.oracle.grid_points)?;
    let t = oracle_tables(&g);
    censoring_warning(&mut run, &t);
    let (mean, var) = g.absorption_time_moments();
    run.meta.residual("mass_residual", g.mass_residual);
    run.meta.residual("tail_error_bound", g.tail_error_bound);
    run.meta.residual("min_density", g.min_density);
    run.meta.residual("survival_at_horizon", g.survival[g.steps]);
    run.meta.residual("frozen_from", g.frozen_from);
    run.meta.residual("mean_decision_time", mean);
    run.meta.residual("decision_time_variance", var);
    run.meta.residual("wald_mean_time", test.wald_mean_time());
    write_table_and_curve(&mut run, cfg, &t, "oracle")?;
    println!(
        "oracle: {} grid points, horizon {}, alpha_hat {:.6}, mean decision time {:.3}, mass residual {:.2e}",
        cfg.oracle.grid_points,
        g.steps,
        g.error_probability(),
        mean,
        g.mass_residual
    );
    run.finish()
}

fn print_report(label: &str, r: &VerificationReport) {
    for c in &r.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        println!("{tag} {label}/{} residual={} tolerance={}", c.name, num(c.residual), num(c.tolerance));
    }
}

pub fn verify(cfg: &ExperimentConfig, inputs: &[PathBuf]) -> Result<(), Failure> {
    let test = cfg.validate()?;
    let mut run = Run::start("verify", cfg)?;
    let tables: Vec<(String, EnsembleTable)> = if inputs.is_empty() {
        run.meta.master_seed = Some(cfg.master_seed);
        let mut v = vec![("monte_carlo".to_string(), monte_carlo(cfg, &test)?.0)];
        if cfg.oracle.enabled {
            let g = propagate(&test, test.max_steps(), cfg.oracle.grid_points)?;
            v.push(("oracle".to_string(), oracle_tables(&g)));
        }
        v
    } else {
        inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), read_table_file(p)?)))
            .collect::<Result<_, Error>>()?
    };
    let kappa = KappaOptions::for_config(&test);
    let mut overall = VerificationReport { checks: Vec::new() };
    let mut sections = Vec::new();
    for (label, t) in &tables {
        censoring_warning(&mut run, t);
        let r = verify_table(t, Some(test.alpha()), kappa)?;
        print_report(label, &r);
        sections.push(json!({ "label": label, "source": t.source.label(), "report": r }));
        overall.extend(r);
    }
    let mc = tables.iter().find(|(_, t)| t.source == TableSource::MonteCarlo);
    let exact = tables.iter().find(|(_, t)| t.source == TableSource::Oracle);
    let cross = match (mc, exact) {
        (Some((_, m)), Some((_, e))) => {
            let cv = cross_validate(m, e)?;
            let r = cv.report(Some(test.wald_mean_time()));
            print_report("cross_validation", &r);
            overall.extend(r.clone());
            json!({ "summary": cv, "report": r })
        }
        _ => Value::Null,
    };
    let passed = overall.passed();
    let p = run.path("verify_report.json");
    write_json(&p, &json!({ "passed": passed, "tables": sections, "cross_validation": cross }))?;
    let failed: Vec<String> = overall.failures().map(|c| c.name.clone()).collect();
    run.meta.residual("failed_checks", &failed);
    run.finish()?;
    if passed {
        println!("verify: all checks passed");
        Ok(())
    } else {
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<(), Failure> {
    cfg.validate()?;
    let mut run = Run::start("sweep", cfg)?;
    let points = cfg.sweep_points();
    let s = run_sweep(&points, cfg.oracle.grid_points)?;
    for p in &s.points {
        run.meta.residual(&format!("mass_residual_rho_{}", p.rho), p.mass_residual);
    }
    let fmt = cfg.output.format;
    let p = run.path(&format!("sweep_points.{}", fmt.extension()));
    let f = File::create(&p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
    write_sweep_points(&s.points, fmt, cfg.output.precision, f)?;
    let p = run.path("sweep_report.json");
    write_json(&p, &serde_json::to_value(&s).map_err(|e| Failure::Io(e.to_string()))?)?;
    print_report("sweep", &s.report);
    let passed = s.report.passed();
    run.finish()?;
    if passed {
        println!("sweep: all residuals decrease");
        Ok(())
    } else {
        let failed: Vec<&str> = s.report.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

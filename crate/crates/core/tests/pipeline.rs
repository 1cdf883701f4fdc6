use proptest::prelude::*;
use sprt_info::ensemble::run_ensemble;
use sprt_info::info::{info_curve, mutual_information};
use sprt_info::io::{read_table, write_table, Format};
use sprt_info::oracle::{max_probability_gap, oracle_tables, propagate};
use sprt_info::table::check_conservation;
use sprt_info::verify::{cross_validate, verify_table};
use sprt_info::{NoiseModel, TestConfig};

fn round_trip(t: &sprt_info::EnsembleTable, format: Format) -> sprt_info::EnsembleTable {
    let mut buf = Vec::new();
    write_table(t, format, 16, &mut buf).unwrap();
    read_table(format, buf.as_slice()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tables_conserve_counts_and_survive_files(
        rho in 0.02f64..0.5,
        alpha in 0.01f64..0.3,
        trials in 1u64..400,
        seed in any::<u64>(),
        steps in 1usize..60,
    ) {
        let c = TestConfig::new(rho, alpha, NoiseModel::Gaussian).unwrap().with_max_steps(steps).unwrap();
        let t = run_ensemble(&c, trials, seed).unwrap();
        prop_assert!(check_conservation(&t).passed());
        prop_assert_eq!(t.rows.len(), steps + 1);
        for f in [Format::Csv, Format::Json] {
            let back = round_trip(&t, f);
            prop_assert_eq!(&back.rows.iter().map(|r| r.counts).collect::<Vec<_>>(),
                            &t.rows.iter().map(|r| r.counts).collect::<Vec<_>>());
            prop_assert_eq!(back.censored_fraction, t.censored_fraction);
        }
    }

    #[test]
    fn mutual_information_stays_in_the_unit_interval(
        rho in 0.05f64..0.5,
        seed in any::<u64>(),
    ) {
        let c = TestConfig::new(rho, 0.1, NoiseModel::Gaussian).unwrap().with_max_steps(80).unwrap();
        let t = run_ensemble(&c, 300, seed).unwrap();
        for k in 0..=t.horizon {
            let mi = mutual_information(&t, k).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&mi.direct), "k={} mi={}", k, mi.direct);
        }
    }
}

#[test]
fn oracle_is_symmetric_and_grid_converged() {
    let c = TestConfig::new(0.1, 0.05, NoiseModel::Gaussian).unwrap();
    let fine = propagate(&c, c.max_steps(), 2048).unwrap();
    let coarse = propagate(&c, c.max_steps(), 512).unwrap();
    assert!(max_probability_gap(&fine, &coarse) < 1e-3);
    let t = oracle_tables(&fine);
    let last = t.last();
    assert!((last.term_upto[0][0] - last.term_upto[1][1]).abs() < 1e-14);
    assert!(fine.mass_residual < 1e-12);
}

#[test]
fn simulation_and_oracle_agree_away_from_reference() {
    let c = TestConfig::new(0.1, 0.05, NoiseModel::Gaussian).unwrap();
    let exact = oracle_tables(&propagate(&c, c.max_steps(), 2048).unwrap());
    let mc = run_ensemble(&c, 30_000, 2024).unwrap();
    let cv = cross_validate(&mc, &exact).unwrap();
    let rep = cv.report(None);
    assert!(rep.passed(), "{:#?}", rep.failures().collect::<Vec<_>>());
    let rep = verify_table(&exact, Some(0.05), sprt_info::info::KappaOptions::for_config(&c)).unwrap();
    // At this coarse ρ the per-step ratio is not yet flat; every exact identity still holds.
    let failed: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
    assert_eq!(failed, ["kappa_flatness"]);
}

#[test]
fn info_curve_ends_at_the_final_value() {
    let c = TestConfig::reference();
    let t = oracle_tables(&propagate(&c, c.max_steps(), 1024).unwrap());
    let curve = info_curve(&t).unwrap();
    assert!((curve.mi[curve.horizon] - curve.mi_final).abs() < 1e-10);
    assert_eq!(curve.mi[0], 0.0);
    assert!(curve.mi.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

use lilfield::harness::config::{ExperimentConfig, ExperimentKind};
use lilfield::harness::experiments::run;
use lilfield::harness::report::Verdict;

const KINDS: [ExperimentKind; 6] = [
    ExperimentKind::MaximalEstimate,
    ExperimentKind::VerifyDecomposition,
    ExperimentKind::CheckDeviation,
    ExperimentKind::CheckOrliczLemmas,
    ExperimentKind::Series,
    ExperimentKind::DyadicRatio,
];

fn small(kind: ExperimentKind, d: usize, threads: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default_for(kind, d);
    c.replications = c.replications.min(60);
    c.seed = 99;
    c.threads = Some(threads);
    c
}

#[test]
fn every_kind_is_thread_count_invariant() {
    for kind in KINDS {
        for d in 1..=2 {
            let a = run(&small(kind, d, 1)).unwrap();
            let b = run(&small(kind, d, 5)).unwrap();
            assert_eq!(a.to_csv_string(), b.to_csv_string(), "{kind:?} d={d}");
            assert_eq!(a.checks, b.checks);
        }
    }
}

#[test]
fn default_configs_pass() {
    for kind in KINDS {
        for d in 1..=2 {
            let report = run(&small(kind, d, 2)).unwrap();
            let failed: Vec<_> = report.failed_checks().collect();
            assert!(failed.is_empty(), "{kind:?} d={d}: {failed:?}");
            assert_eq!(report.exit_code(), 0);
        }
    }
}

#[test]
fn deviation_verdicts_follow_from_records() {
    let report = run(&small(ExperimentKind::CheckDeviation, 1, 2)).unwrap();
    let reps = report.config.replications;
    let sums: Vec<f64> = report.records.iter().filter(|r| r.statistic == "sum").map(|r| r.value).collect();
    let quad: Vec<f64> =
        report.records.iter().filter(|r| r.statistic == "quadratic_variation").map(|r| r.value).collect();
    assert_eq!(sums.len(), reps);
    let dev = report.config.deviation.clone().unwrap();
    for &x in &dev.x {
        for &y in &dev.y {
            let stat = format!("probability[x={x},y={y}]");
            let rec = report.records.iter().find(|r| r.statistic == stat).unwrap();
            let hits = sums.iter().zip(&quad).filter(|(s, q)| s.abs() > x && **q <= y).count();
            assert_eq!(rec.value, hits as f64 / reps as f64);
            let bound = 2.0 * (-x * x / (2.0 * y)).exp();
            assert_eq!(rec.verdict, Some(Verdict::from_bool(rec.ci_hi.unwrap() <= bound)));
        }
    }
}

#[test]
fn decomposition_verdicts_follow_from_records() {
    let report = run(&small(ExperimentKind::VerifyDecomposition, 2, 2)).unwrap();
    let lhs: Vec<f64> = report.records.iter().filter(|r| r.statistic == "lhs:telescoping").map(|r| r.value).collect();
    let rhs: Vec<_> = report.records.iter().filter(|r| r.statistic == "rhs:telescoping").collect();
    assert_eq!(lhs.len(), rhs.len());
    for (l, r) in lhs.iter().zip(&rhs) {
        assert_eq!(r.verdict, Some(Verdict::from_bool(*l <= r.value + 1e-9 * (1.0 + r.value.abs()))));
    }
}

#[test]
fn json_report_round_trips() {
    let report = run(&small(ExperimentKind::Series, 2, 1)).unwrap();
    let back = lilfield::Report::from_json_str(&report.to_json_string()).unwrap();
    assert_eq!(back, report);
}

use dtaboot_core::bootstrap::{bootstrap_auc_ci, BootstrapConfig};
use dtaboot_core::data::{to_outcomes, CorrectionPolicy, Dataset, Study2x2};
use dtaboot_core::exec::Serial;
use dtaboot_core::influence::{flag_influential, leave_one_out_table, Direction};
use dtaboot_core::reml::{fit_reml, summary_accuracy, FitOptions};
use dtaboot_core::sroc::{auc_of_fit, AucOptions};
use dtaboot_core::Error;

fn counts() -> Vec<(u64, u64, u64, u64)> {
    vec![
        (25, 8, 12, 80),
        (40, 15, 10, 120),
        (12, 3, 14, 45),
        (30, 22, 9, 95),
        (18, 5, 5, 60),
        (55, 30, 20, 210),
        (9, 2, 11, 38),
        (33, 11, 6, 70),
        (21, 14, 15, 88),
        (47, 9, 13, 102),
    ]
}

fn dataset(rows: &[(u64, u64, u64, u64)]) -> Dataset {
    let studies = rows
        .iter()
        .enumerate()
        .map(|(i, &(tp, fp, fn_, tn))| Study2x2::new(format!("s{}", i + 1), tp, fp, fn_, tn))
        .collect();
    Dataset::new("test", studies).unwrap()
}

fn auc(d: &Dataset) -> f64 {
    let fit = fit_reml(&to_outcomes(d, CorrectionPolicy::AffectedStudies).unwrap(), &FitOptions::default()).unwrap();
    auc_of_fit(&fit, &AucOptions::default()).unwrap()
}

#[test]
fn removing_then_restoring_a_study_restores_auc() {
    let d = dataset(&counts());
    let full = auc(&d);
    for i in [0, 4, 9] {
        let mut rows = d.without(i).studies().to_vec();
        rows.insert(i, d.studies()[i].clone());
        let restored = Dataset::new("test", rows).unwrap();
        assert_eq!(restored, d);
        assert!((auc(&restored) - full).abs() < 1e-9);
        assert!((auc(&d.without(i)) - full).abs() > 0.0);
    }
}

#[test]
fn fit_summary_and_auc_are_coherent() {
    let d = dataset(&counts());
    let fit = fit_reml(&to_outcomes(&d, CorrectionPolicy::AffectedStudies).unwrap(), &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let s = summary_accuracy(&fit, 0.95).unwrap();
    assert!(s.sens.lower < s.sens.point && s.sens.point < s.sens.upper);
    assert!(s.fpr.lower < s.fpr.point && s.fpr.point < s.fpr.upper);
    let a = auc_of_fit(&fit, &AucOptions::default()).unwrap();
    // A test with sensitivity ~0.7 at FPR ~0.15 has an AUC well above chance.
    assert!(a > 0.7 && a < 0.95, "{a}");
}

#[test]
fn bootstrap_interval_brackets_point() {
    let d = dataset(&counts());
    let config = BootstrapConfig { b: 1000, seed: 3, ..Default::default() };
    let run = bootstrap_auc_ci(&d, &config, &Serial).unwrap();
    assert_eq!(run.effective_b, 1000);
    assert_eq!(run.statistics.len(), 1000);
    assert!(run.interval.0 < run.point && run.point < run.interval.1);
}

#[test]
fn too_few_studies_rejected() {
    let d = dataset(&counts()[..2]);
    let err = bootstrap_auc_ci(&d, &BootstrapConfig::default(), &Serial).unwrap_err();
    assert!(matches!(err, Error::TooFewStudies { needed: 3, got: 2 }));
    assert!(err.to_string().contains("minimum study count"));
}

#[test]
fn outlier_is_flagged_regardless_of_order() {
    // Ten similar studies plus one with sensitivity near 0.2 at FPR near 0.6.
    let mut rows = counts();
    rows.push((20, 60, 80, 40));
    let forward = dataset(&rows);
    let mut reversed_rows = forward.studies().to_vec();
    reversed_rows.reverse();
    let reversed = Dataset::new("rev", reversed_rows).unwrap();

    let config = BootstrapConfig { b: 1000, seed: 11, ..Default::default() };
    let labels = |d: &Dataset| {
        let table = leave_one_out_table(d, &config, &Serial).unwrap();
        let flagged = flag_influential(&table.rows);
        let outlier = flagged.iter().find(|f| f.row.label == "s11").expect("outlier flagged");
        assert_eq!(outlier.direction, Direction::AucIncreasesWhenRemoved);
        let mut l: Vec<String> = flagged.into_iter().map(|f| f.row.label).collect();
        l.sort();
        l
    };
    assert_eq!(labels(&forward), labels(&reversed));
}

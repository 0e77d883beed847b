mod common;

use common::*;
use forecast_workbench::evaluation::{dm_test, mae, rmse, rmse_reduction};

#[test]
fn identical_errors_and_swap() {
    let e = normals(&mut rng(1), 30);
    let same = dm_test(&e, &e, 1, false).unwrap();
    assert_eq!((same.statistic, same.pvalue), (0.0, 1.0));
    let f: Vec<f64> = normals(&mut rng(2), 30).iter().map(|v| 1.5 * v).collect();
    for h in [1, 3] {
        for corrected in [false, true] {
            let ab = dm_test(&e, &f, h, corrected).unwrap();
            let ba = dm_test(&f, &e, h, corrected).unwrap();
            assert!((ab.statistic + ba.statistic).abs() < 1e-12);
            assert!((ab.pvalue - ba.pvalue).abs() < 1e-12);
        }
    }
}

#[test]
fn size_under_equal_accuracy() {
    let mut r = rng(10);
    let rejections = (0..500)
        .filter(|_| {
            let a = normals(&mut r, 100);
            let b = normals(&mut r, 100);
            dm_test(&a, &b, 1, false).unwrap().pvalue < 0.05
        })
        .count();
    let rate = rejections as f64 / 500.0;
    assert!((0.02..=0.09).contains(&rate), "rejection rate {rate}");
}

#[test]
fn power_against_doubled_errors() {
    let mut r = rng(20);
    let hits = (0..500)
        .filter(|_| {
            let eps = normals(&mut r, 200);
            let a: Vec<f64> = eps.iter().map(|v| 2.0 * v).collect();
            dm_test(&a, &eps, 1, false).unwrap().pvalue < 0.05
        })
        .count();
    assert!(hits as f64 / 500.0 >= 0.95, "power {hits}/500");
}

#[test]
fn hln_correction_is_more_conservative_in_small_samples() {
    let a = normals(&mut rng(30), 16);
    let b: Vec<f64> = normals(&mut rng(31), 16).iter().map(|v| 0.5 * v).collect();
    let plain = dm_test(&a, &b, 1, false).unwrap();
    let hln = dm_test(&a, &b, 1, true).unwrap();
    assert!(hln.statistic.abs() < plain.statistic.abs());
    assert!(hln.pvalue > plain.pvalue);
}

#[test]
fn metric_identities() {
    let actual = normals(&mut rng(40), 50);
    let pred = normals(&mut rng(41), 50);
    assert!(mae(&actual, &pred).unwrap() <= rmse(&actual, &pred).unwrap());
    assert_eq!(rmse_reduction(1.3, 1.3).unwrap(), 0.0);
    assert!(rmse_reduction(1.3, 0.9).unwrap() > rmse_reduction(1.3, 1.0).unwrap());
}

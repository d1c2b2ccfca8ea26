mod common;

use std::time::Instant;

use occlass_core::dataset::stratified_split;
use occlass_core::experiment::{
    generate_synthetic_dataset, run_benchmark_on, ExperimentConfig, VariantSpec,
};
use occlass_core::models::Family;

#[test]
fn desk_scale_planted_benchmark() {
    let data = generate_synthetic_dataset(475, 0.6, 0.15, 2024).unwrap();
    let cfg = ExperimentConfig {
        n_runs: 20,
        variants: vec![VariantSpec::original()],
        ..Default::default()
    };
    let start = Instant::now();
    let rep = run_benchmark_on(&data, &cfg).unwrap();
    eprintln!("desk-scale benchmark: {:.1?}", start.elapsed());
    for c in &rep.results {
        eprintln!(
            "{:<6} acc {:.4} f1 {:.4} mcc {:.4}",
            c.family.display_name(),
            c.average.accuracy,
            c.average.f1,
            c.average.mcc
        );
    }
    let acc = |f| rep.cell(f, "original").unwrap().average.accuracy;
    assert!(acc(Family::Rfc) >= acc(Family::Knn));
    for c in &rep.results {
        assert!(c.average.accuracy > 0.60, "{}", c.family);
        assert!(c.average.mcc > 0.0);
        for v in [c.average.accuracy, c.average.f1, c.average.mcc] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn duplicated_reference_variant_compares_to_itself() {
    let data = generate_synthetic_dataset(120, 0.6, 0.15, 3).unwrap();
    let cfg = ExperimentConfig {
        n_runs: 4,
        variants: vec![
            VariantSpec::original(),
            VariantSpec {
                name: "original_again".into(),
                smote_k: None,
            },
        ],
        ..Default::default()
    };
    let rep = run_benchmark_on(&data, &cfg).unwrap();
    for family in Family::ALL {
        let c = rep
            .cell(family, "original_again")
            .unwrap()
            .comparison
            .unwrap();
        for m in [c.accuracy, c.f1, c.mcc] {
            assert_eq!(m.t, Some(0.0), "{family}");
            assert_eq!(m.p, 1.0, "{family}");
        }
        assert_eq!(
            rep.cell(family, "original").unwrap().samples,
            rep.cell(family, "original_again").unwrap().samples
        );
    }
}

#[test]
fn noise_free_data_beats_noisy_data_for_every_family() {
    let cfg = ExperimentConfig {
        n_runs: 20,
        variants: vec![VariantSpec::original()],
        ..Default::default()
    };
    let clean = run_benchmark_on(
        &generate_synthetic_dataset(475, 0.6, 0.0, 11).unwrap(),
        &cfg,
    )
    .unwrap();
    let noisy = run_benchmark_on(
        &generate_synthetic_dataset(475, 0.6, 0.3, 11).unwrap(),
        &cfg,
    )
    .unwrap();
    for family in Family::ALL {
        let a = clean.cell(family, "original").unwrap().average.accuracy;
        let b = noisy.cell(family, "original").unwrap().average.accuracy;
        assert!(a > b, "{family}: clean {a} vs noisy {b}");
    }
}

#[test]
fn smote_variants_leave_test_split_untouched_and_report_is_deterministic() {
    let data = generate_synthetic_dataset(150, 0.6, 0.1, 5).unwrap();
    let cfg = ExperimentConfig {
        n_runs: 3,
        families: vec![Family::Knn, Family::Logr],
        ..Default::default()
    };
    let a = run_benchmark_on(&data, &cfg).unwrap();
    let b = run_benchmark_on(&data, &cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.results.len(), 6);
    // Every cell is evaluated on a split of the same size.
    let test_size = stratified_split(&data, 0.8, 0).unwrap().test.len();
    assert_eq!(test_size, 30);
    for c in &a.results {
        assert_eq!(c.samples.len(), 3);
        assert!(c.variant.smote_k.is_none() || c.comparison.is_some());
    }
}

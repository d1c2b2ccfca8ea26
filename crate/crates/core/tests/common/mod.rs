#![allow(dead_code)]

use occlass_core::dataset::{Dataset, Label, LabeledRecord};
use occlass_core::rng::SplitMix64;
use occlass_core::schema::{FeatureVector, FEATURE_COUNT};

/// Random 0/1 records, `density` ones on average, ids `r{i}`.
pub fn random_dataset(n_incident: usize, n_serious: usize, density: f64, seed: u64) -> Dataset {
    let mut rng = SplitMix64::new(seed);
    let records = (0..n_incident + n_serious)
        .map(|i| LabeledRecord {
            record_id: format!("r{i}"),
            features: FeatureVector::new(
                (0..FEATURE_COUNT)
                    .map(|_| if rng.next_f64() < density { 1.0 } else { 0.0 })
                    .collect(),
            )
            .unwrap(),
            label: if i < n_incident {
                Label::Incident
            } else {
                Label::SeriousIncident
            },
        })
        .collect();
    Dataset::new("test", records)
}

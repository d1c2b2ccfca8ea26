use occlass_core::dataset::Label;
use occlass_core::models::{fit, label_for_score, Family, Hyperparams, LearnedParams, Samples};
use occlass_core::rng::SplitMix64;

/// Independent reference: full sort by (Euclidean distance, index).
fn brute_force(rows: &[Vec<f64>], labels: &[Label], x: &[f64], k: usize) -> (Vec<usize>, f64) {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s: f64 = r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            (s.sqrt(), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let nn: Vec<usize> = d.iter().take(k.min(rows.len())).map(|p| p.1).collect();
    let serious = nn
        .iter()
        .filter(|&&i| labels[i] == Label::SeriousIncident)
        .count();
    (nn.clone(), serious as f64 / nn.len() as f64)
}

#[test]
fn knn_matches_brute_force_on_random_queries() {
    let mut rng = SplitMix64::new(77);
    // Binary features make exact distance ties common, exercising the tie rule.
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            (0..61)
                .map(|_| if rng.next_f64() < 0.1 { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let labels: Vec<Label> = (0..300).map(|_| Label::from_index(rng.below(2))).collect();
    let samples = Samples::from_rows(&rows, labels.clone()).unwrap();
    let mut ties_seen = 0;
    for k in [1usize, 3, 5, 7, 9] {
        let model = fit(
            Family::Knn,
            &Hyperparams::new().with("k", k as f64),
            &samples,
            0,
            "v",
        )
        .unwrap();
        let LearnedParams::Knn(knn) = &model.params else {
            panic!()
        };
        for q in 0..40 {
            let x: Vec<f64> = if q % 2 == 0 {
                (0..61)
                    .map(|_| if rng.next_f64() < 0.1 { 1.0 } else { 0.0 })
                    .collect()
            } else {
                (0..61).map(|_| rng.next_f64()).collect()
            };
            let (nn, score) = brute_force(&rows, &labels, &x, k);
            assert_eq!(knn.neighbours(&x), nn, "k={k} query {q}");
            assert_eq!(model.predict_score(&x).unwrap(), score);
            assert_eq!(model.predict(&x).unwrap(), label_for_score(score));
            let dist = |i: usize| {
                rows[i]
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            if nn.len() < rows.len()
                && (0..rows.len()).any(|i| !nn.contains(&i) && dist(i) == dist(nn[nn.len() - 1]))
            {
                ties_seen += 1;
            }
        }
    }
    assert!(ties_seen > 0, "query set never exercised a boundary tie");
}

//! Detector checks against independent oracles: the factor implementation
//! against a definition-level brute force, the neighbor index against a
//! quadratic scan, and the forest against its closed-form normalizer and
//! qualitative isolation behavior.

mod support;

use odaudit_core::data::{Dataset, DatasetMeta, FeatureRole, GroupLabel};
use odaudit_core::iforest::{average_path_length, iforest_mean_paths, iforest_score, IForestConfig};
use odaudit_core::knn::{euclidean, NeighborIndex};
use odaudit_core::lof::{lof_score, LofConfig};
use odaudit_core::metrics::ScoreVector;
use odaudit_core::theory::{realize_geometry, IdealGeometry};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn lof_matches_bruteforce_on_tiny_set() {
    let ds = random_dataset(5, 3, 42);
    let ours = lof_score(&ds, &LofConfig { k: 3 }).unwrap();
    let oracle = lof_bruteforce(&rows_of(&ds), 3);
    for (a, b) in ours.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn lof_matches_bruteforce_on_random_sets() {
    for seed in 0..6 {
        let n = 30 + (seed as usize * 7) % 21;
        let ds = random_dataset(n, 4, 1000 + seed);
        let k = 3 + (seed as usize) % 7;
        let ours = lof_score(&ds, &LofConfig { k }).unwrap();
        let oracle = lof_bruteforce(&rows_of(&ds), k);
        for (i, (a, b)) in ours.iter().zip(&oracle).enumerate() {
            assert!((a - b).abs() < 1e-9, "seed {seed} point {i}: {a} vs {b}");
        }
    }
}

#[test]
fn lof_is_scale_invariant() {
    let ds = random_dataset(40, 5, 7);
    let base = lof_score(&ds, &LofConfig { k: 6 }).unwrap();
    let scaled_features: Vec<f64> = ds.features().iter().map(|v| v * 3.7).collect();
    let scaled = Dataset::new(
        scaled_features,
        ds.n_cols(),
        ds.group.clone(),
        ds.true_group.clone(),
        ds.y.clone(),
        ds.roles.clone(),
        ds.meta.clone(),
    )
    .unwrap();
    let after = lof_score(&scaled, &LofConfig { k: 6 }).unwrap();
    for (a, b) in base.iter().zip(after.iter()) {
        assert!((a - b).abs() < 1e-9, "scaling features must not move the factor: {a} vs {b}");
    }
}

#[test]
fn neighbor_index_matches_quadratic_scan() {
    let ds = random_dataset(50, 3, 99);
    let rows = rows_of(&ds);
    let index = NeighborIndex::from_dataset(&ds, 10).unwrap();
    for i in 0..50 {
        let mut order: Vec<usize> = (0..50).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            euclid(&rows[i], &rows[a])
                .partial_cmp(&euclid(&rows[i], &rows[b]))
                .unwrap()
                .then(a.cmp(&b))
        });
        let got: Vec<usize> = index.neighbors(i, 10).iter().map(|&(_, j)| j as usize).collect();
        assert_eq!(got, order[..10].to_vec(), "point {i}");
        for &(dist, j) in index.neighbors(i, 10) {
            assert_eq!(dist, euclidean(ds.row(i), ds.row(j as usize)));
        }
    }
}

#[test]
fn masking_bounds_reproduce_on_two_cluster_geometry() {
    // 500 inliers, 50 clustered outliers: with the neighbor count below the
    // cluster size the factor sits at 1; above it the outliers stand out.
    let geom = IdealGeometry {
        n_a: 550,
        n_b: 0,
        base_rate: 50.0 / 550.0,
        intra_a: 1.0,
        intra_b: 1.0,
        gap_a: 10.0,
        gap_b: 10.0,
        proxy_gap: None,
        outlier_intra_a: None,
        outlier_intra_b: None,
        a_outlier_subpops: 1,
        b_inlier_subpops: 1,
        b_outlier_subpops: 1,
        neighborhood_size: None,
        inlier_neighbors: None,
        k: 150,
        dims: 48,
        split_range: None,
    };
    let mut masked_ok = 0;
    let mut separated_ok = 0;
    for seed in 0..5 {
        let ds = realize_geometry(&geom, 0.05, seed).unwrap();
        let outliers: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.y[i]).collect();
        assert_eq!(outliers.len(), 50);
        let low_k = lof_score(&ds, &LofConfig { k: 40 }).unwrap();
        let masked = mean(&outliers.iter().map(|&i| low_k[i]).collect::<Vec<_>>());
        if (0.9..=1.1).contains(&masked) {
            masked_ok += 1;
        }
        let high_k = lof_score(&ds, &LofConfig { k: 150 }).unwrap();
        let separated = mean(&outliers.iter().map(|&i| high_k[i]).collect::<Vec<_>>());
        if separated >= 1.5 {
            separated_ok += 1;
        }
    }
    assert!(masked_ok >= 4, "masked regime held in {masked_ok}/5 seeds");
    assert!(separated_ok >= 4, "separated regime held in {separated_ok}/5 seeds");
}

#[test]
fn normalizer_values() {
    assert_eq!(average_path_length(2), 1.0);
    assert!((average_path_length(3) - 1.6667).abs() < 1e-4);
}

#[test]
fn forest_score_is_monotone_in_mean_path() {
    let ds = random_dataset(80, 2, 5);
    let cfg = IForestConfig { n_trees: 40, subsample: 64, seed: 3 };
    let means = iforest_mean_paths(&ds, &cfg).unwrap();
    let scores = iforest_score(&ds, &cfg).unwrap();
    for i in 0..ds.n_rows() {
        for j in 0..ds.n_rows() {
            if means[i] < means[j] {
                assert!(
                    scores[i] > scores[j],
                    "shorter mean path must score strictly higher: {} vs {}",
                    scores[i],
                    scores[j]
                );
            }
        }
    }
    assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
}

#[test]
fn far_point_isolates_in_almost_every_seed() {
    let mut hits = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..255).map(|_| rng.gen_range(-1.0..1.0) + rng.gen_range(-1.0..1.0)).collect();
        values.push(100.0);
        let n = values.len();
        let ds = Dataset::new(
            values,
            1,
            vec![GroupLabel::A; n],
            vec![GroupLabel::A; n],
            vec![false; n],
            vec![FeatureRole::Incriminating],
            DatasetMeta { seed, scenario: "extreme".into(), sim: None, scatter: None },
        )
        .unwrap();
        let cfg = IForestConfig { n_trees: 100, subsample: 256, seed };
        let scores = iforest_score(&ds, &cfg).unwrap();
        let mut inlier_scores: Vec<f64> = scores[..n - 1].to_vec();
        inlier_scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p99 = inlier_scores[(0.99 * (n - 1) as f64) as usize];
        if scores[n - 1] > p99 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "extreme point beat the 99th percentile in {hits}/10 seeds");
}

#[test]
fn forest_scores_finite_on_simulated_scenarios() {
    use odaudit_core::data::{simulate, OutlierMode, SimConfig};
    for mode in [OutlierMode::Clustered, OutlierMode::Scattered] {
        let ds = simulate(&SimConfig {
            n_per_group: 150,
            outlier_mode: mode,
            seed: 8,
            ..SimConfig::default()
        })
        .unwrap();
        let scores = iforest_score(&ds, &IForestConfig::default()).unwrap();
        assert!(scores.iter().all(|&s| s > 0.0 && s < 1.0));
        let lof = lof_score(&ds, &LofConfig { k: 30 }).unwrap();
        assert!(lof.iter().all(|&s| s.is_finite() && s >= 0.0));
    }
}

#[test]
fn score_vector_rejects_nan() {
    assert!(ScoreVector::new(vec![f64::NAN], 1).is_err());
    assert!(ScoreVector::new(vec![0.0, 1.0], 3).is_err());
}

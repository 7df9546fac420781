mod oracle;

use proptest::prelude::*;
use rand::Rng;
use vibetap::ml::tree::fit_tree;
use vibetap::ml::{
    accuracy_on, cross_validate, evaluate, info_gain_ranking, split_train_test, stratified_folds,
    ClassifierSpec, Dataset, ForestParams, ModelBody, SubspaceParams, TableParams, TrainedModel, TreeParams,
};

fn dataset(rows: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Dataset {
    let p = rows[0].len();
    Dataset::new(
        (0..p).map(|i| format!("f{i}")).collect(),
        (0..classes).map(|c| format!("c{c}")).collect(),
        rows,
        labels,
    )
    .unwrap()
}

fn all_specs(seed: u64) -> [ClassifierSpec; 3] {
    [
        ClassifierSpec::RandomForest(ForestParams { seed, ..ForestParams::default() }),
        ClassifierSpec::RandomSubspace(SubspaceParams { seed, ..SubspaceParams::default() }),
        ClassifierSpec::DecisionTable(TableParams { seed, ..TableParams::default() }),
    ]
}

/// Two noisy inputs whose signs decide the class by exclusive or, plus two
/// pure-noise columns.
fn xor(n: usize, seed: u64) -> Dataset {
    let mut r = oracle::rng(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let a: f64 = r.random_range(-1.0..1.0);
        let b: f64 = r.random_range(-1.0..1.0);
        rows.push(vec![a, b, r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
        labels.push(((a > 0.0) ^ (b > 0.0)) as usize);
    }
    dataset(rows, labels, 2)
}

#[test]
fn every_learner_solves_xor() {
    let train = xor(600, 1);
    let test = xor(400, 2);
    // XOR needs both inputs in one tree, so subspace members must see every feature.
    let mut specs = all_specs(5);
    specs[1] = ClassifierSpec::RandomSubspace(SubspaceParams {
        subspace_fraction: 1.0,
        seed: 5,
        ..SubspaceParams::default()
    });
    for spec in specs {
        let model = spec.train(&train).unwrap();
        let acc = accuracy_on(&model, &test).unwrap();
        assert!(acc >= 0.9, "{}: {acc}", spec.display_name());
    }
}

#[test]
fn blobs_are_separated_in_cross_validation() {
    let (rows, labels) = oracle::blobs(60, 4, 10, 3, 4.0, 3);
    let data = dataset(rows, labels, 4);
    for spec in all_specs(8) {
        let acc = cross_validate(&data, 10, &spec, 4).unwrap().accuracy;
        assert!(acc >= 0.95, "{}: {acc}", spec.display_name());
    }
}

#[test]
fn decision_table_picks_the_single_predictor() {
    let mut r = oracle::rng(11);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    // five classes of 60 put every class boundary on a decile edge
    for i in 0..300 {
        let c = i % 5;
        let mut row: Vec<f64> = (0..6).map(|_| r.random_range(0.0..1.0)).collect();
        row[4] = c as f64 + r.random_range(0.0..0.9);
        rows.push(row);
        labels.push(c);
    }
    let data = dataset(rows, labels, 5);
    let model = ClassifierSpec::DecisionTable(TableParams::default()).train(&data).unwrap();
    let ModelBody::DecisionTable { table, .. } = &model.model else {
        panic!("wrong model kind");
    };
    assert_eq!(table.features, vec![4]);
    assert_eq!(accuracy_on(&model, &data).unwrap(), 1.0);
}

#[test]
fn decision_table_on_noise_stays_near_chance() {
    let mut r = oracle::rng(12);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..5).map(|_| r.random_range(0.0..1.0)).collect()).collect();
    let labels: Vec<usize> = (0..400).map(|i| i % 2).collect();
    let data = dataset(rows, labels, 2);
    let spec = ClassifierSpec::DecisionTable(TableParams::default());
    let acc = cross_validate(&data, 10, &spec, 1).unwrap().accuracy;
    // 99% binomial band around 0.5 at n = 400
    assert!((acc - 0.5).abs() <= 2.576 * (0.25f64 / 400.0).sqrt(), "{acc}");
}

#[test]
fn holdout_split_is_forty_ten_per_class() {
    let (rows, labels) = oracle::blobs(50, 3, 4, 2, 1.0, 6);
    let data = dataset(rows, labels, 3);
    let (train, test) = split_train_test(&data, 0.8, 21).unwrap();
    assert_eq!(train.class_counts(), vec![40, 40, 40]);
    assert_eq!(test.class_counts(), vec![10, 10, 10]);
    let mut seen: Vec<&Vec<f64>> = train.rows.iter().chain(&test.rows).collect();
    seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
    seen.dedup();
    assert_eq!(seen.len(), 150);
}

proptest! {
    #[test]
    fn folds_partition_the_rows(
        labels in prop::collection::vec(0usize..4, 40..300),
        k in 2usize..12,
        seed in any::<u64>(),
    ) {
        let folds = stratified_folds(&labels, 4, k, seed);
        prop_assert_eq!(folds.len(), labels.len());
        prop_assert!(folds.iter().all(|&f| f < k));
        // sizes differ by at most one, and so do each class's shares
        let mut sizes = vec![0usize; k];
        folds.iter().for_each(|&f| sizes[f] += 1);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for c in 0..4 {
            let mut per = vec![0usize; k];
            labels.iter().zip(&folds).filter(|(l, _)| **l == c).for_each(|(_, &f)| per[f] += 1);
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn evaluate_commutes_with_class_reordering(
        (k, cells, perm_seed) in (2usize..6).prop_flat_map(|k| (Just(k), prop::collection::vec(0u64..50, k * k), any::<u64>()))
    ) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let confusion: Vec<Vec<u64>> = cells.chunks(k).map(|c| c.to_vec()).collect();
        let classes: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
        let mut perm: Vec<usize> = (0..k).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut oracle::rng(perm_seed));
        let permuted: Vec<Vec<u64>> = perm.iter().map(|&i| perm.iter().map(|&j| confusion[i][j]).collect()).collect();
        let names: Vec<String> = perm.iter().map(|&i| classes[i].clone()).collect();
        let a = evaluate(&confusion, &classes).unwrap();
        let b = evaluate(&permuted, &names).unwrap();
        for (pos, &i) in perm.iter().enumerate() {
            prop_assert_eq!(&b.per_class[pos], &a.per_class[i]);
        }
        prop_assert_eq!(a.accuracy, b.accuracy);
        let w = |r: &vibetap::ml::EvalReport| [r.weighted.tp_rate, r.weighted.fp_rate, r.weighted.precision, r.weighted.recall];
        for (x, y) in w(&a).iter().zip(w(&b)) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for (c, m) in a.per_class.iter().enumerate() {
            prop_assert_eq!(m.support, confusion[c].iter().sum::<u64>());
            prop_assert_eq!(m.tp_rate, m.recall);
        }
    }
}

#[test]
fn saved_models_predict_identically() {
    let (rows, labels) = oracle::blobs(40, 3, 25, 4, 1.5, 7);
    let data = dataset(rows, labels, 3);
    let mut r = oracle::rng(99);
    let probes: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..25).map(|_| r.random_range(-4.0..8.0)).collect())
        .collect();
    for spec in all_specs(31) {
        let model = spec.train(&data).unwrap();
        let back = TrainedModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        for p in &probes {
            assert_eq!(back.predict_index(p).unwrap(), model.predict_index(p).unwrap());
        }
    }
}

#[test]
fn training_is_independent_of_thread_count() {
    let data = xor(300, 4);
    for spec in all_specs(17) {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| spec.train(&data).unwrap());
        let b = many.install(|| spec.train(&data).unwrap());
        assert_eq!(a.to_json(), b.to_json(), "{}", spec.display_name());
    }
}

#[test]
fn noise_features_carry_almost_no_information() {
    let mut r = oracle::rng(5);
    let rows: Vec<Vec<f64>> = (0..1000).map(|_| vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)]).collect();
    let labels: Vec<usize> = (0..1000).map(|_| r.random_range(0..2)).collect();
    let ranking = info_gain_ranking(&dataset(rows, labels, 2), 10).unwrap();
    for (name, gain) in ranking {
        assert!((0.0..0.05).contains(&gain), "{name}: {gain}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_feature_maps_keep_training_accuracy(seed in any::<u64>()) {
        let (rows, labels) = oracle::blobs(30, 3, 5, 2, 1.0, seed);
        let warped: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, &v)| match j % 3 {
                0 => v.exp(),
                1 => v * v * v + 2.0 * v,
                _ => 3.0 * v - 7.0,
            }).collect())
            .collect();
        let idx: Vec<usize> = (0..rows.len()).collect();
        let feats: Vec<usize> = (0..5).collect();
        let params = TreeParams { max_depth: Some(3), ..TreeParams::default() };
        let a = fit_tree(&rows, &labels, 3, &idx, &feats, params, &mut oracle::rng(1));
        let b = fit_tree(&warped, &labels, 3, &idx, &feats, params, &mut oracle::rng(1));
        for i in 0..rows.len() {
            prop_assert_eq!(a.predict(&rows[i]), b.predict(&warped[i]));
        }
    }
}

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smilekit_core::model::{
    assign_folds, error_metrics, evaluate, grid_search, split_by_mother, train_mlp_with, GridConfig, MlpConfig,
    Network, Standardizer, WindowedSample,
};
use smilekit_core::synthgen::{feature_corpus, FeatureCorpusSpec};
use smilekit_core::{Feature, ScaleKind, VisitMonth};

fn max_rel_grad_error(sizes: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::new(sizes, seed);
    // Nonzero biases so every parameter gets a generic gradient.
    for p in net.params_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    let n = 6;
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, grad) = net.loss_and_gradient(&xs, &ys);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..grad.len() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = net.loss(&xs, &ys);
        net.params_mut()[i] = orig - h;
        let down = net.loss(&xs, &ys);
        net.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let scale = grad[i].abs().max(fd.abs());
        // Components that vanish on both sides carry no relative information.
        if scale > 1e-7 {
            worst = worst.max((grad[i] - fd).abs() / scale);
        }
    }
    worst
}

#[test]
fn gradient_matches_central_differences() {
    let shapes: [&[usize]; 4] = [&[3, 4, 1], &[2, 5, 3, 1], &[8, 6, 6, 4, 1], &[8, 32, 32, 8, 1]];
    for (i, sizes) in shapes.iter().enumerate() {
        for seed in 0..5 {
            let e = max_rel_grad_error(sizes, 100 * i as u64 + seed);
            assert!(e <= 1e-4, "{sizes:?} seed {seed}: {e:e}");
        }
    }
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i:03}")).collect()
}

#[test]
fn no_leakage_over_random_splits() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.gen_range(2..120);
        let all = ids(n);
        let seed = rng.gen();
        let (train, test) = split_by_mother(&all, seed).unwrap();
        let tr: BTreeSet<_> = train.iter().collect();
        let te: BTreeSet<_> = test.iter().collect();
        assert!(tr.is_disjoint(&te));
        assert_eq!(tr.len() + te.len(), n);
        assert!(!train.is_empty() && !test.is_empty());
        let folds = assign_folds(&train, 5, seed ^ 1);
        let mut seen = BTreeSet::new();
        for f in &folds {
            for m in f {
                assert!(seen.insert(m.clone()), "{m} in two folds");
                assert!(tr.contains(m));
            }
        }
        assert_eq!(seen.len(), train.len());
    }
}

#[test]
fn standardization_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| vec![rng.gen_range(-3.0..9.0), 1e3 + rng.gen_range(0.0..1.0), 7.0])
        .collect();
    let s = Standardizer::fit(&rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
    for c in 0..2 {
        let m = z.iter().map(|r| r[c]).sum::<f64>() / z.len() as f64;
        let v = z.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / z.len() as f64;
        assert!(m.abs() < 1e-9, "{m}");
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }
    assert!(z.iter().all(|r| r[2].is_finite()));
}

fn linear_samples(n: usize, seed: u64) -> Vec<WindowedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: [f64; 8] = [0.5, -1.0, 2.0, 0.0, 0.3, -0.7, 1.2, 0.1];
    (0..n)
        .map(|i| {
            let inputs: [f64; 8] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            WindowedSample {
                mother_id: format!("m{i}"),
                visit_month: VisitMonth::Six,
                window_index: 0,
                target: 3.0 + inputs.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(),
                inputs,
            }
        })
        .collect()
}

#[test]
fn full_batch_training_mse_is_monotone() {
    let samples = linear_samples(64, 1);
    let cfg = MlpConfig {
        epochs: 200,
        batch_size: samples.len(),
        seed: 5,
        ..Default::default()
    };
    let mut mses = Vec::new();
    train_mlp_with(&samples, &cfg, |_, m| mses.push(evaluate(m, &samples).unwrap().mse())).unwrap();
    for (e, w) in mses.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-9, "epoch {}: {} -> {}", e + 2, w[0], w[1]);
    }
    assert!(mses[mses.len() - 1] < 0.5 * mses[0]);
}

#[test]
fn mae_never_exceeds_rmse() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.gen_range(1..20);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let m = error_metrics(&p, &t).unwrap();
        assert!(m.mae <= m.rmse * (1.0 + 1e-12));
    }
}

#[test]
fn grid_search_is_deterministic_and_leak_free() {
    let spec = FeatureCorpusSpec {
        mothers: 20,
        smile_count_min: 3,
        linear: vec![(Feature::OnsetAmplitude, 0.1, 0.0)],
        ..Default::default()
    };
    let (tables, scores) = feature_corpus(&spec, 3).unwrap();
    let grid = GridConfig {
        windows: vec![1, 2],
        epochs: vec![2, 4],
        seeds: vec![1, 2],
        ..Default::default()
    };
    let a = grid_search(&tables, &scores, ScaleKind::Phq9, &grid).unwrap();
    let b = grid_search(&tables, &scores, ScaleKind::Phq9, &grid).unwrap();
    assert_eq!(a, b);
    let tr: BTreeSet<_> = a.split.train.iter().collect();
    assert!(a.split.test.iter().all(|m| !tr.contains(m)));
    assert_eq!(a.cv_scores.len(), 4);
    assert!(a.mae <= a.rmse);
    assert!(grid_search(&tables, &scores, ScaleKind::Pss, &grid).is_err());
}

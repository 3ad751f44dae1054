//! Sliding-window regression of questionnaire scores from smile features.
//!
//! Inputs are means of the eight features over `w` consecutive smiles; the
//! regressor is a small fully connected network (hidden ReLU layers, linear
//! output) trained with mini-batch Adam on mean squared error. Model
//! selection is a (window, epochs) grid scored by 5-fold cross-validation at
//! the mother level, repeated over several seeds.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::ingest::{ScoreTable, VisitMonth};
use crate::scales::{ScaleKind, ScaleScore};
use crate::seeds;

pub const N_FEATURES: usize = 8;

/// Train/test proportion: 75 of 94 mothers train.
const TRAIN_NUM: usize = 75;
const TRAIN_DEN: usize = 94;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedSample {
    pub mother_id: String,
    pub visit_month: VisitMonth,
    pub window_index: usize,
    pub inputs: [f64; N_FEATURES],
    pub target: f64,
}

/// Stride-1 windows of `w` consecutive smiles, each summarized by per-feature means.
pub fn make_windows(table: &FeatureTable, w: usize, score: ScaleScore) -> Result<Vec<WindowedSample>> {
    if w == 0 {
        return Err(Error::precondition("window size must be at least 1"));
    }
    let rows: Vec<[f64; N_FEATURES]> = table.rows.iter().map(|(_, f)| f.to_array()).collect();
    if rows.len() < w {
        return Ok(Vec::new());
    }
    Ok(rows
        .windows(w)
        .enumerate()
        .map(|(i, win)| {
            let mut inputs = [0.0; N_FEATURES];
            for row in win {
                for (acc, v) in inputs.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            for v in &mut inputs {
                *v /= w as f64;
            }
            WindowedSample {
                mother_id: table.mother_id.clone(),
                visit_month: table.visit_month,
                window_index: i,
                inputs,
                target: score.value() as f64,
            }
        })
        .collect())
}

/// Windows for every session that has a score on `scale`.
pub fn corpus_windows(
    tables: &[FeatureTable],
    scores: &ScoreTable,
    scale: ScaleKind,
    w: usize,
) -> Result<Vec<WindowedSample>> {
    let mut out = Vec::new();
    for t in tables {
        if let Some(s) = scores.score(&t.mother_id, t.visit_month, scale) {
            out.extend(make_windows(t, w, s)?);
        }
    }
    Ok(out)
}

/// Seeded mother-level split in the 75:19 proportion (rounded, both sides non-empty).
pub fn split_by_mother(mother_ids: &[String], seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    let mut ids: Vec<String> = mother_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let n = ids.len();
    if n < 2 {
        return Err(Error::precondition("need at least 2 mothers to split"));
    }
    let n_train = ((n * TRAIN_NUM) as f64 / TRAIN_DEN as f64).round() as usize;
    let n_train = n_train.clamp(1, n - 1);
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = ids.split_off(n_train);
    ids.sort();
    test.sort();
    Ok((ids, test))
}

/// Shuffles mothers and deals them round-robin into `k` folds.
pub fn assign_folds(mothers: &[String], k: usize, seed: u64) -> Vec<Vec<String>> {
    let mut ids = mothers.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = k.min(ids.len()).max(1);
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Append the window index as an extra input.
    pub with_position: bool,
    /// Clamp predictions to this range at inference.
    pub clamp: Option<(f64, f64)>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32, 8],
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            with_position: false,
            clamp: None,
        }
    }
}

pub const EPOCH_GRID: [usize; 4] = [50, 100, 150, 200];
pub const WINDOW_GRID: [usize; 5] = [1, 2, 3, 4, 5];

/// Fully connected network with ReLU hidden layers and one linear output.
/// Parameters live in one flat vector: per layer, the row-major weight
/// matrix followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    /// `sizes` runs from input width to output width (which must be 1).
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let n_layers = sizes.len() - 1;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = if l + 1 < n_layers {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (1.0 / fan_in as f64).sqrt()
            };
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (offset of weights, fan_in, fan_out)
        let mut off = 0;
        self.sizes.windows(2).map(move |s| {
            let o = off;
            off += s[0] * s[1] + s[1];
            (o, s[0], s[1])
        })
    }

    fn buffers(&self) -> Vec<Vec<f64>> {
        self.sizes.iter().map(|&n| vec![0.0; n]).collect()
    }

    /// Forward pass into `acts` (one buffer per layer, `acts[0]` = input).
    fn forward_into(&self, x: &[f64], acts: &mut [Vec<f64>]) -> f64 {
        acts[0].copy_from_slice(x);
        let n_layers = self.sizes.len() - 1;
        for (l, (off, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            let (w, rest) = self.params[off..].split_at(fan_in * fan_out);
            let b = &rest[..fan_out];
            let (prev, next) = acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            for j in 0..fan_out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + row.iter().zip(input.iter()).map(|(a, c)| a * c).sum::<f64>();
                out[j] = if l + 1 < n_layers { z.max(0.0) } else { z };
            }
        }
        acts[n_layers][0]
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut acts = self.buffers();
        self.forward_into(x, &mut acts)
    }

    /// Adds `scale * d(out)/d(params)` into `grad`, given activations from
    /// [`Self::forward_into`].
    fn backward_into(&self, acts: &[Vec<f64>], scale: f64, grad: &mut [f64], deltas: &mut [Vec<f64>]) {
        let offsets: Vec<_> = self.layer_offsets().collect();
        let n_layers = offsets.len();
        deltas[n_layers][0] = scale;
        for l in (0..n_layers).rev() {
            let (off, fan_in, fan_out) = offsets[l];
            let input = &acts[l];
            let (lower, upper) = deltas.split_at_mut(l + 1);
            let delta = &upper[0];
            let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            for j in 0..fan_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                gb[j] += dj;
                for (g, a) in gw[j * fan_in..(j + 1) * fan_in].iter_mut().zip(input) {
                    *g += dj * a;
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + fan_in * fan_out];
            let prev_delta = &mut lower[l];
            prev_delta.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..fan_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                for (pd, wv) in prev_delta.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                    *pd += dj * wv;
                }
            }
            // ReLU derivative on the hidden activations feeding this layer.
            for (pd, a) in prev_delta.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *pd = 0.0;
                }
            }
        }
    }

    /// Mean squared error over `(xs, ys)` and its gradient w.r.t. the flat parameters.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut acts = self.buffers();
        let mut deltas = self.buffers();
        let n = xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let out = self.forward_into(x, &mut acts);
            let e = out - y;
            loss += e * e / n;
            self.backward_into(&acts, 2.0 * e / n, &mut grad, &mut deltas);
        }
        (loss, grad)
    }

    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        let mut acts = self.buffers();
        let n = xs.len() as f64;
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| {
                let e = self.forward_into(x, &mut acts) - y;
                e * e / n
            })
            .sum()
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, cfg: &MlpConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Per-coordinate affine standardization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column; constant columns get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// A trained regressor with its input/target normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub network: Network,
    pub inputs: Standardizer,
    pub target_mean: f64,
    pub target_scale: f64,
    pub with_position: bool,
    pub clamp: Option<(f64, f64)>,
}

fn raw_inputs(s: &WindowedSample, with_position: bool) -> Vec<f64> {
    let mut v = s.inputs.to_vec();
    if with_position {
        v.push(s.window_index as f64);
    }
    v
}

impl Mlp {
    pub fn predict(&self, s: &WindowedSample) -> f64 {
        let x = self.inputs.apply(&raw_inputs(s, self.with_position));
        let y = self.target_mean + self.target_scale * self.network.forward(&x);
        match self.clamp {
            Some((lo, hi)) => y.clamp(lo, hi),
            None => y,
        }
    }
}

/// Trains for `cfg.epochs` passes; `on_epoch(e, model)` runs after every
/// completed epoch `e` (1-based), which lets a single run serve several epoch
/// budgets.
pub fn train_mlp_with(
    samples: &[WindowedSample],
    cfg: &MlpConfig,
    mut on_epoch: impl FnMut(usize, &Mlp),
) -> Result<Mlp> {
    if samples.is_empty() {
        return Err(Error::precondition("empty training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| raw_inputs(s, cfg.with_position)).collect();
    let inputs = Standardizer::fit(&raw);
    let xs: Vec<Vec<f64>> = raw.iter().map(|r| inputs.apply(r)).collect();
    let t = Standardizer::fit(&samples.iter().map(|s| vec![s.target]).collect::<Vec<_>>());
    let (target_mean, target_scale) = (t.mean[0], t.scale[0]);
    let ys: Vec<f64> = samples.iter().map(|s| (s.target - target_mean) / target_scale).collect();

    let mut sizes = vec![xs[0].len()];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_seed = rng.gen::<u64>();
    let mut model = Mlp {
        network: Network::new(&sizes, init_seed),
        inputs,
        target_mean,
        target_scale,
        with_position: cfg.with_position,
        clamp: cfg.clamp,
    };
    let mut adam = Adam::new(model.network.params.len(), cfg);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad = vec![0.0; model.network.params.len()];
    let mut acts = model.network.buffers();
    let mut deltas = model.network.buffers();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let n = batch.len() as f64;
            for &i in batch {
                let out = model.network.forward_into(&xs[i], &mut acts);
                let e = out - ys[i];
                model.network.backward_into(&acts, 2.0 * e / n, &mut grad, &mut deltas);
            }
            adam.update(&mut model.network.params, &grad);
        }
        on_epoch(epoch, &model);
    }
    Ok(model)
}

pub fn train_mlp(samples: &[WindowedSample], cfg: &MlpConfig) -> Result<Mlp> {
    train_mlp_with(samples, cfg, |_, _| {})
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
}

impl Metrics {
    pub fn mse(&self) -> f64 {
        self.rmse * self.rmse
    }
}

/// MAE and RMSE of paired predictions and targets.
pub fn error_metrics(pred: &[f64], target: &[f64]) -> Result<Metrics> {
    if pred.is_empty() || pred.len() != target.len() {
        return Err(Error::precondition("metrics need equally sized, non-empty inputs"));
    }
    let n = pred.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let e = p - t;
        abs += e.abs();
        sq += e * e;
    }
    Ok(Metrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    })
}

/// Window-level MAE and RMSE.
pub fn evaluate(model: &Mlp, samples: &[WindowedSample]) -> Result<Metrics> {
    let pred: Vec<f64> = samples.iter().map(|s| model.predict(s)).collect();
    let target: Vec<f64> = samples.iter().map(|s| s.target).collect();
    error_metrics(&pred, &target)
}

/// Session-level metrics: window predictions averaged per (mother, visit).
pub fn evaluate_aggregate(model: &Mlp, samples: &[WindowedSample]) -> Result<Metrics> {
    let mut groups: BTreeMap<(&str, VisitMonth), (f64, usize, f64)> = BTreeMap::new();
    for s in samples {
        let g = groups.entry((&s.mother_id, s.visit_month)).or_insert((0.0, 0, s.target));
        g.0 += model.predict(s);
        g.1 += 1;
    }
    let (pred, target): (Vec<f64>, Vec<f64>) = groups
        .values()
        .map(|&(sum, n, t)| (sum / n as f64, t))
        .unzip();
    error_metrics(&pred, &target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub windows: Vec<usize>,
    pub epochs: Vec<usize>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub split_seed: u64,
    pub base: MlpConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            windows: WINDOW_GRID.to_vec(),
            epochs: EPOCH_GRID.to_vec(),
            seeds: seeds::derive_many(0, "train", 5),
            folds: 5,
            split_seed: seeds::derive(0, "split", 0),
            base: MlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub window: usize,
    pub epochs: usize,
    /// Mean validation MSE over seeds and folds; `None` when no fold had data.
    pub mean_mse: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub scale: ScaleKind,
    pub best_window: usize,
    pub best_epochs: usize,
    /// Window-level test metrics, averaged over seeds.
    pub mae: f64,
    pub rmse: f64,
    /// Per-(mother, visit) test metrics, averaged over seeds.
    pub aggregate_mae: f64,
    pub aggregate_rmse: f64,
    pub per_seed_mse: Vec<f64>,
    pub test_windows: usize,
    /// Sample SD of the scale over all scored sessions.
    pub target_sd: f64,
    pub split: SplitManifest,
    pub cv_scores: Vec<CellScore>,
}

fn windows_for(
    by_mother: &BTreeMap<String, Vec<WindowedSample>>,
    mothers: &[String],
) -> Vec<WindowedSample> {
    mothers
        .iter()
        .filter_map(|m| by_mother.get(m))
        .flatten()
        .cloned()
        .collect()
}

fn group_by_mother(samples: Vec<WindowedSample>) -> BTreeMap<String, Vec<WindowedSample>> {
    let mut map: BTreeMap<String, Vec<WindowedSample>> = BTreeMap::new();
    for s in samples {
        map.entry(s.mother_id.clone()).or_default().push(s);
    }
    map
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Cross-validated (window, epochs) selection followed by seeded retraining
/// on all training mothers and evaluation on the held-out mothers.
pub fn grid_search(
    tables: &[FeatureTable],
    scores: &ScoreTable,
    scale: ScaleKind,
    grid: &GridConfig,
) -> Result<TrainReport> {
    if !scores.has_scale(scale) {
        return Err(Error::MissingColumn(scale.column().to_string()));
    }
    if grid.windows.is_empty() || grid.epochs.is_empty() || grid.seeds.is_empty() {
        return Err(Error::Config("window, epoch and seed grids must be non-empty".into()));
    }
    if grid.windows.contains(&0) {
        return Err(Error::Config("window sizes must be at least 1".into()));
    }
    let scored: Vec<&FeatureTable> = tables
        .iter()
        .filter(|t| scores.score(&t.mother_id, t.visit_month, scale).is_some())
        .collect();
    let targets: Vec<f64> = scored
        .iter()
        .map(|t| scores.score(&t.mother_id, t.visit_month, scale).unwrap().value() as f64)
        .collect();
    let mothers: Vec<String> = scored.iter().map(|t| t.mother_id.clone()).collect();
    if mothers.is_empty() {
        return Err(Error::precondition(format!("no scored sessions for {scale}")));
    }
    let (train, test) = split_by_mother(&mothers, grid.split_seed)?;
    let owned: Vec<FeatureTable> = scored.into_iter().cloned().collect();

    let mut per_window = BTreeMap::new();
    for &w in &grid.windows {
        per_window.insert(w, group_by_mother(corpus_windows(&owned, scores, scale, w)?));
    }

    let max_epochs = *grid.epochs.iter().max().unwrap();
    // (window, epochs) -> validation MSEs
    let mut cell_mse: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for &w in &grid.windows {
        let by_mother = &per_window[&w];
        for &seed in &grid.seeds {
            let folds = assign_folds(&train, grid.folds, seeds::derive(seed, "folds", 0));
            for (k, fold) in folds.iter().enumerate() {
                let fit_mothers: Vec<String> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .flat_map(|(_, f)| f.iter().cloned())
                    .collect();
                let fit = windows_for(by_mother, &fit_mothers);
                let val = windows_for(by_mother, fold);
                if fit.is_empty() || val.is_empty() {
                    continue;
                }
                let cfg = MlpConfig {
                    epochs: max_epochs,
                    seed,
                    ..grid.base.clone()
                };
                train_mlp_with(&fit, &cfg, |e, model| {
                    if grid.epochs.contains(&e) {
                        let m = evaluate(model, &val).expect("validation set is non-empty");
                        cell_mse.entry((w, e)).or_default().push(m.mse());
                    }
                })?;
            }
        }
    }

    let mut cv_scores = Vec::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for &w in &grid.windows {
        for &e in &grid.epochs {
            let runs = cell_mse.get(&(w, e));
            let mean_mse = runs.map(|v| v.iter().sum::<f64>() / v.len() as f64);
            if let Some(m) = mean_mse {
                if best.is_none_or(|(b, _, _)| m < b) {
                    best = Some((m, w, e));
                }
            }
            cv_scores.push(CellScore {
                window: w,
                epochs: e,
                mean_mse,
                runs: runs.map_or(0, Vec::len),
            });
        }
    }
    let (_, best_window, best_epochs) = best.ok_or_else(|| {
        Error::precondition("no grid cell had both training and validation windows")
    })?;

    let by_mother = &per_window[&best_window];
    let fit = windows_for(by_mother, &train);
    let held_out = windows_for(by_mother, &test);
    if held_out.is_empty() {
        return Err(Error::precondition(format!(
            "test mothers have no windows of size {best_window}"
        )));
    }
    let mut per_seed = Vec::new();
    let mut aggregate = Vec::new();
    for &seed in &grid.seeds {
        let cfg = MlpConfig {
            epochs: best_epochs,
            seed,
            ..grid.base.clone()
        };
        let model = train_mlp(&fit, &cfg)?;
        per_seed.push(evaluate(&model, &held_out)?);
        aggregate.push(evaluate_aggregate(&model, &held_out)?);
    }
    let avg = |f: &dyn Fn(&Metrics) -> f64, v: &[Metrics]| v.iter().map(f).sum::<f64>() / v.len() as f64;
    Ok(TrainReport {
        scale,
        best_window,
        best_epochs,
        mae: avg(&|m| m.mae, &per_seed),
        rmse: avg(&|m| m.rmse, &per_seed),
        aggregate_mae: avg(&|m| m.mae, &aggregate),
        aggregate_rmse: avg(&|m| m.rmse, &aggregate),
        per_seed_mse: per_seed.iter().map(Metrics::mse).collect(),
        test_windows: held_out.len(),
        target_sd: sample_sd(&targets),
        split: SplitManifest { train, test },
        cv_scores,
    })
}

//! Subcommand implementations. Each returns the paths it wrote.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::Serialize;
use smilekit_core::features::{mean_smile_count, read_features_csv, session_features, write_features_csv};
use smilekit_core::ingest::{
    parse_frame_table, parse_score_table, parse_speech_intervals, split_session_id, write_frame_table,
    write_score_table, write_speech_intervals,
};
use smilekit_core::model::{grid_search, GridConfig, MlpConfig};
use smilekit_core::scales::categorize;
use smilekit_core::segmentation::{gate_confidence, remove_speech_confounded, segment_session, write_smiles_csv};
use smilekit_core::stats::{anova_oneway, select_significant_features, smile_index_correlations, welch_t, FeatureSelection};
use smilekit_core::synthgen::{generate_session, GroundTruth};
use smilekit_core::{
    seeds, AnovaResult, CorrelationSeries, Error, Feature, FeatureTable, Result, ScaleKind, ScoreTable, SessionInfo,
    SynthSpec, TrainReport, VisitMonth, WelchResult,
};

use crate::config::RunConfig;
use crate::output::OutputDir;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("no {what} given")))
}

/// Session CSV files in `dir`, sorted by file name.
fn session_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for e in entries {
        let path = e
            .map_err(|source| Error::Io {
                path: dir.display().to_string(),
                source,
            })?
            .path();
        if path.extension().and_then(|x| x.to_str()) != Some("csv") {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.push((stem.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SessionSummary {
    session_id: String,
    frames_total: usize,
    frames_kept: usize,
    frame_retention: f64,
    episodes: usize,
    smiles_detected: usize,
    removed_by_speech: usize,
    smiles_kept: usize,
    speech_intervals: usize,
}

#[derive(Debug, Serialize)]
struct CorpusSummary {
    sessions: usize,
    frames_total: usize,
    frames_kept: usize,
    frame_retention: f64,
    smiles_detected: usize,
    removed_by_speech: usize,
    smiles_kept: usize,
    /// Share of detected smiles surviving speech filtering.
    smile_retention: f64,
    mean_smile_count: Option<f64>,
    mean_smile_count_by_visit: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct SegmentationReport {
    summary: CorpusSummary,
    sessions: Vec<SessionSummary>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Segments every session under `frames_dir`, filters speech-confounded
/// smiles and writes `smiles.csv`, `features.csv` and `segmentation_report.json`.
pub fn extract(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let frames_dir = require(&cfg.frames_dir, "frames directory (--frames)")?;
    let mut out = OutputDir::create(&cfg.out)?;
    out.protect(frames_dir);
    let speech_files: BTreeMap<String, PathBuf> = match &cfg.speech_dir {
        Some(d) => {
            out.protect(d);
            session_files(d)?.into_iter().collect()
        }
        None => BTreeMap::new(),
    };
    let files = session_files(frames_dir)?;
    for p in files.iter().map(|(_, p)| p).chain(speech_files.values()) {
        out.protect(p);
    }

    let mut all_smiles = Vec::new();
    let mut tables = Vec::new();
    let mut sessions = Vec::new();
    for (stem, path) in &files {
        let in_session = |e: Error| e.in_session(stem);
        let (mother, visit) = split_session_id(stem).map_err(in_session)?;
        let info = SessionInfo::new(&mother, visit, cfg.fps);
        let series = parse_frame_table(open(path)?, &cfg.segmentation.landmarks, info).map_err(in_session)?;
        let speech = match speech_files.get(stem) {
            Some(p) => parse_speech_intervals(open(p)?).map_err(in_session)?,
            None => Vec::new(),
        };
        let gate = gate_confidence(&series, &cfg.segmentation);
        let seg = segment_session(&series, &cfg.segmentation).map_err(in_session)?;
        let detected = seg.smiles.len();
        let (kept, removed) = remove_speech_confounded(seg.smiles, &speech);
        tables.push(session_features(&mother, visit, &kept).map_err(in_session)?);
        sessions.push(SessionSummary {
            session_id: series.session_id.clone(),
            frames_total: gate.total,
            frames_kept: gate.kept,
            frame_retention: gate.retention_fraction(),
            episodes: seg.episodes,
            smiles_detected: detected,
            removed_by_speech: removed,
            smiles_kept: kept.len(),
            speech_intervals: speech.len(),
        });
        all_smiles.extend(kept);
    }

    let sum = |f: fn(&SessionSummary) -> usize| sessions.iter().map(f).sum::<usize>();
    let (frames_total, frames_kept) = (sum(|s| s.frames_total), sum(|s| s.frames_kept));
    let (detected, removed, kept) = (
        sum(|s| s.smiles_detected),
        sum(|s| s.removed_by_speech),
        sum(|s| s.smiles_kept),
    );
    let mut by_visit = BTreeMap::new();
    for v in [VisitMonth::Six, VisitMonth::Twelve] {
        let vt: Vec<FeatureTable> = tables.iter().filter(|t| t.visit_month == v).cloned().collect();
        if let Some(m) = mean_smile_count(&vt) {
            by_visit.insert(v.to_string(), m);
        }
    }
    let report = SegmentationReport {
        summary: CorpusSummary {
            sessions: sessions.len(),
            frames_total,
            frames_kept,
            frame_retention: ratio(frames_kept, frames_total),
            smiles_detected: detected,
            removed_by_speech: removed,
            smiles_kept: kept,
            smile_retention: ratio(kept, detected),
            mean_smile_count: mean_smile_count(&tables),
            mean_smile_count_by_visit: by_visit,
        },
        sessions,
    };
    Ok(vec![
        out.write_with("smiles.csv", |b| write_smiles_csv(&all_smiles, b))?,
        out.write_with("features.csv", |b| write_features_csv(&tables, b))?,
        out.write_json("segmentation_report.json", &report)?,
    ])
}

/// Either a result or the reason it could not be computed.
#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Outcome<T> {
    Result(T),
    Error(String),
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Result(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct WelchEntry {
    n_6: usize,
    n_12: usize,
    mean_6: Option<f64>,
    mean_12: Option<f64>,
    test: Outcome<WelchResult>,
    significant: bool,
}

#[derive(Debug, Serialize)]
struct GroupSize {
    category: &'static str,
    n: usize,
}

#[derive(Debug, Serialize)]
struct AnovaEntry {
    feature: Feature,
    visit_month: VisitMonth,
    scale: ScaleKind,
    groups: Vec<GroupSize>,
    test: Outcome<AnovaResult>,
    significant: bool,
}

#[derive(Debug, Serialize)]
struct StatsReport {
    alpha: f64,
    by_visit: bool,
    scales: Vec<ScaleKind>,
    sessions: usize,
    smiles: usize,
    feature_selection: FeatureSelection,
    feature_selection_by_visit: BTreeMap<String, FeatureSelection>,
    correlations: Vec<CorrelationSeries>,
    welch: BTreeMap<Feature, WelchEntry>,
    anova: Vec<AnovaEntry>,
}

struct Corpus {
    tables: Vec<FeatureTable>,
    scores: ScoreTable,
    scales: Vec<ScaleKind>,
}

fn load_corpus(cfg: &RunConfig, out: &mut OutputDir) -> Result<Corpus> {
    cfg.validate()?;
    let features = require(&cfg.features, "features file (--features)")?;
    let scores_path = require(&cfg.scores, "score table (--scores)")?;
    out.protect(features);
    out.protect(scores_path);
    let tables = read_features_csv(open(features)?)?;
    let scores = parse_score_table(open(scores_path)?)?;
    let scales = match &cfg.scales {
        Some(list) => {
            if let Some(k) = list.iter().find(|k| !scores.has_scale(**k)) {
                return Err(Error::MissingColumn(k.column().to_string()));
            }
            list.clone()
        }
        None => ScaleKind::ALL.into_iter().filter(|k| scores.has_scale(*k)).collect(),
    };
    Ok(Corpus { tables, scores, scales })
}

fn values(tables: &[FeatureTable], feature: Feature, keep: impl Fn(&FeatureTable) -> bool) -> Vec<f64> {
    tables
        .iter()
        .filter(|t| keep(t))
        .flat_map(|t| t.rows.iter().map(move |(_, f)| f.get(feature)))
        .collect()
}

fn mean_of(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn run_stats(cfg: &RunConfig, c: &Corpus, out: &OutputDir) -> Result<Vec<PathBuf>> {
    let visits: Vec<Option<VisitMonth>> = if cfg.by_visit {
        vec![Some(VisitMonth::Six), Some(VisitMonth::Twelve)]
    } else {
        vec![None]
    };
    let mut correlations = Vec::new();
    for &scale in &c.scales {
        for feature in Feature::ALL {
            for &v in &visits {
                correlations.push(smile_index_correlations(&c.tables, &c.scores, feature, scale, v));
            }
        }
    }

    let mut welch = BTreeMap::new();
    for feature in Feature::ALL {
        let a = values(&c.tables, feature, |t| t.visit_month == VisitMonth::Six);
        let b = values(&c.tables, feature, |t| t.visit_month == VisitMonth::Twelve);
        let test: Outcome<WelchResult> = welch_t(&a, &b).into();
        let significant = matches!(&test, Outcome::Result(w) if w.p <= cfg.alpha);
        welch.insert(
            feature,
            WelchEntry {
                n_6: a.len(),
                n_12: b.len(),
                mean_6: mean_of(&a),
                mean_12: mean_of(&b),
                test,
                significant,
            },
        );
    }

    // Per-smile observations grouped by the session's score category.
    let mut anova = Vec::new();
    for feature in Feature::ALL {
        for visit in [VisitMonth::Six, VisitMonth::Twelve] {
            for &scale in c.scales.iter().filter(|k| k.is_categorized()) {
                let mut groups: BTreeMap<usize, (&'static str, Vec<f64>)> = BTreeMap::new();
                for t in c.tables.iter().filter(|t| t.visit_month == visit) {
                    let Some(s) = c.scores.score(&t.mother_id, visit, scale) else {
                        continue;
                    };
                    let sev = s.severity().unwrap_or(0);
                    let g = groups.entry(sev).or_insert_with(|| (categorize(&s), Vec::new()));
                    g.1.extend(t.rows.iter().map(|(_, f)| f.get(feature)));
                }
                groups.retain(|_, (_, v)| !v.is_empty());
                let samples: Vec<&[f64]> = groups.values().map(|(_, v)| v.as_slice()).collect();
                let test: Outcome<AnovaResult> = anova_oneway(&samples).into();
                let significant = matches!(&test, Outcome::Result(a) if a.p <= cfg.alpha);
                anova.push(AnovaEntry {
                    feature,
                    visit_month: visit,
                    scale,
                    groups: groups
                        .values()
                        .map(|(category, v)| GroupSize { category, n: v.len() })
                        .collect(),
                    test,
                    significant,
                });
            }
        }
    }

    let mut selection_by_visit = BTreeMap::new();
    if cfg.by_visit {
        for v in [VisitMonth::Six, VisitMonth::Twelve] {
            selection_by_visit.insert(
                v.to_string(),
                select_significant_features(&c.tables, &c.scores, &c.scales, cfg.alpha, Some(v)),
            );
        }
    }
    let report = StatsReport {
        alpha: cfg.alpha,
        by_visit: cfg.by_visit,
        scales: c.scales.clone(),
        sessions: c.tables.len(),
        smiles: c.tables.iter().map(FeatureTable::count).sum(),
        feature_selection: select_significant_features(&c.tables, &c.scores, &c.scales, cfg.alpha, None),
        feature_selection_by_visit: selection_by_visit,
        correlations,
        welch,
        anova,
    };

    let mut written = vec![out.write_json("stats.json", &report)?];
    for &scale in &c.scales {
        let mut csv = String::from("feature,visit_month,ordinal,sample_size,pearson_r\n");
        for s in report.correlations.iter().filter(|s| s.scale == scale) {
            let visit = s.visit_month.map_or("all".to_string(), |v| v.to_string());
            for p in &s.points {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.feature, visit, p.ordinal, p.sample_size, p.pearson_r
                ));
            }
        }
        written.push(out.write(&format!("plots/correlation_{}.csv", scale.column()), csv.as_bytes())?);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct GridSummary {
    windows: Vec<usize>,
    epochs: Vec<usize>,
    seeds: Vec<u64>,
    folds: usize,
    split_seed: u64,
    with_position: bool,
    clamp: bool,
}

#[derive(Debug, Serialize)]
struct ModelReport {
    seed: u64,
    grid: GridSummary,
    reports: BTreeMap<ScaleKind, TrainReport>,
}

pub fn grid_config(cfg: &RunConfig) -> GridConfig {
    GridConfig {
        windows: cfg.windows.clone(),
        epochs: cfg.epochs.clone(),
        seeds: seeds::derive_many(cfg.seed, "train", cfg.seeds),
        folds: cfg.folds,
        split_seed: seeds::derive(cfg.seed, "split", 0),
        base: MlpConfig {
            with_position: cfg.with_position,
            ..Default::default()
        },
    }
}

fn run_train(cfg: &RunConfig, c: &Corpus, out: &OutputDir) -> Result<Vec<PathBuf>> {
    let grid = grid_config(cfg);
    let mut reports = BTreeMap::new();
    for &scale in &c.scales {
        let mut g = grid.clone();
        if cfg.clamp {
            let (lo, hi) = scale.range();
            g.base.clamp = Some((lo as f64, hi as f64));
        }
        let r = grid_search(&c.tables, &c.scores, scale, &g).map_err(|e| e.in_session(scale.column()))?;
        reports.insert(scale, r);
    }
    let report = ModelReport {
        seed: cfg.seed,
        grid: GridSummary {
            windows: grid.windows,
            epochs: grid.epochs,
            seeds: grid.seeds,
            folds: grid.folds,
            split_seed: grid.split_seed,
            with_position: cfg.with_position,
            clamp: cfg.clamp,
        },
        reports,
    };
    Ok(vec![out.write_json("model_report.json", &report)?])
}

/// Correlations, feature selection, Welch tests and ANOVAs: `stats.json`
/// plus per-scale correlation plot data.
pub fn stats(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = OutputDir::create(&cfg.out)?;
    let c = load_corpus(cfg, &mut out)?;
    run_stats(cfg, &c, &out)
}

/// Grid search per scale: `model_report.json`.
pub fn train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = OutputDir::create(&cfg.out)?;
    let c = load_corpus(cfg, &mut out)?;
    run_train(cfg, &c, &out)
}

/// `stats` followed by `train` on one loaded corpus.
pub fn report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = OutputDir::create(&cfg.out)?;
    let c = load_corpus(cfg, &mut out)?;
    let mut written = run_stats(cfg, &c, &out)?;
    written.extend(run_train(cfg, &c, &out)?);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct TruthEntry {
    session_id: String,
    seed: u64,
    truth: GroundTruth,
}

/// Writes a synthetic corpus in the ingest formats: `frames/`, `speech/`,
/// `scores.csv`, plus `truth.json` and the effective `synth_spec.json`.
/// Session `i` belongs to mother `i / 2 + 1`, alternating 6- and 12-month visits.
pub fn synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec: SynthSpec = match &cfg.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                message: format!("{}: {e}", p.display()),
            })?
        }
        None => SynthSpec::default(),
    };
    spec.validate()?;
    let mut out = OutputDir::create(&cfg.out)?;
    if let Some(p) = &cfg.spec {
        out.protect(p);
    }
    let mut scores = ScoreTable {
        columns: ScaleKind::ALL
            .into_iter()
            .filter(|k| spec.score_dists.contains_key(k))
            .collect(),
        ..Default::default()
    };
    let mut truth = Vec::new();
    let mut written = Vec::new();
    for i in 0..cfg.sessions {
        let mother = format!("m{:03}", i / 2 + 1);
        let visit = if i % 2 == 0 { VisitMonth::Six } else { VisitMonth::Twelve };
        let seed = seeds::derive(cfg.seed, "synth", i as u64);
        let s = generate_session(&spec, &mother, visit, seed)?;
        let id = s.series.session_id.clone();
        written.push(out.write_with(&format!("frames/{id}.csv"), |b| write_frame_table(&s.series, b))?);
        written.push(out.write_with(&format!("speech/{id}.csv"), |b| write_speech_intervals(&s.speech, b))?);
        scores.insert(s.truth.scores.clone())?;
        truth.push(TruthEntry {
            session_id: id,
            seed,
            truth: s.truth,
        });
    }
    written.push(out.write_with("scores.csv", |b| write_score_table(&scores, b))?);
    written.push(out.write_json("truth.json", &truth)?);
    written.push(out.write_json("synth_spec.json", &spec)?);
    Ok(written)
}

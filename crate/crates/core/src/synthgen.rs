//! Synthetic sessions with known ground truth.
//!
//! [`generate_session`] draws smile shapes, lays them out on a frame grid and
//! back-projects the target `r` trace into landmark coordinates: the right
//! lip corner sits on a fixed ray from the nostril at distance `r * IR`, the
//! left corner is fixed so that the rest-frame radius equals `IR`. AU12,
//! confidence and speech are generated consistently with the smiles.
//!
//! [`feature_corpus`] skips the frame level entirely and emits feature tables
//! with planted feature/score relationships, for model-selection experiments.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, FeatureTable, SmileFeatures};
use crate::ingest::{
    FrameRecord, FrameSeries, LandmarkConfig, Point, ScoreTable, ScoreTableRow, SessionInfo,
    SpeechInterval, VisitMonth,
};
use crate::scales::{ScaleKind, ScaleScore};
use crate::segmentation::Smile;
use crate::seeds;

/// A value drawn uniformly from `mean ± jitter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jittered {
    pub mean: f64,
    pub jitter: f64,
}

impl Jittered {
    pub const fn new(mean: f64, jitter: f64) -> Self {
        Self { mean, jitter }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.jitter == 0.0 {
            self.mean
        } else {
            self.mean + rng.gen_range(-self.jitter..=self.jitter)
        }
    }

    fn min(&self) -> f64 {
        self.mean - self.jitter.abs()
    }

    fn max(&self) -> f64 {
        self.mean + self.jitter.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeParam {
    OnsetDuration,
    ApexDuration,
    OffsetDuration,
    Amplitude,
}

/// Shifts a shape parameter by `coef * gain(k) * z`, where `z` is the
/// session's latent severity and `gain(k)` the entry for ordinal `k` (the
/// last entry repeats; empty means 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub param: ShapeParam,
    pub coef: f64,
    #[serde(default)]
    pub per_ordinal: Vec<f64>,
}

impl Linkage {
    fn gain(&self, ordinal: usize) -> f64 {
        match self.per_ordinal.len() {
            0 => 1.0,
            n => self.per_ordinal[(ordinal - 1).min(n - 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDist {
    pub mean: f64,
    pub sd: f64,
}

/// Default score distributions (mean, SD) for the five scales.
pub fn default_score_dists() -> BTreeMap<ScaleKind, ScoreDist> {
    [
        (ScaleKind::Phq9, 3.19, 4.16),
        (ScaleKind::Aces, 2.07, 2.55),
        (ScaleKind::SocialSupport, 82.80, 15.97),
        (ScaleKind::Pss, 12.52, 6.66),
        (ScaleKind::Pearls, 0.47, 0.90),
    ]
    .into_iter()
    .map(|(k, mean, sd)| (k, ScoreDist { mean, sd }))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    /// Seconds.
    pub session_duration: f64,
    pub fps: f64,
    /// Smiles per session before speech filtering.
    pub smile_count_mean: f64,
    pub smile_count_sd: f64,
    pub onset_duration: Jittered,
    pub apex_duration: Jittered,
    pub offset_duration: Jittered,
    /// Peak rise of `r` above rest.
    pub amplitude: Jittered,
    /// Depth of the apex ripple, as a fraction of amplitude. The apex
    /// alternates between the peak and the dipped value every frame, so no
    /// monotone run inside the apex is longer than one step.
    pub apex_dip: f64,
    /// Rest-to-rest pause between smiles, seconds.
    pub gap: Jittered,
    /// Gaussian noise on `r` before back-projection.
    pub noise_sd: f64,
    /// Per-frame probability of starting a low-confidence burst.
    pub dropout_prob: f64,
    pub dropout_frames: (usize, usize),
    /// Let bursts fall inside smiles, splitting them. Off by default: bursts
    /// are then truncated to rest periods.
    pub dropout_in_smiles: bool,
    /// Share of smiles overlapped by speech.
    pub speech_overlap_fraction: f64,
    /// Speech intervals per minute placed away from smiles.
    pub speech_idle_rate: f64,
    /// Per-smile probability of a sub-10 ms vocal blip inside the smile.
    pub speech_blip_prob: f64,
    pub linkage: Vec<Linkage>,
    pub linked_scale: ScaleKind,
    /// Loading of the latent severity on the non-linked scales.
    pub scale_loading: f64,
    pub score_dists: BTreeMap<ScaleKind, ScoreDist>,
    /// Rest-frame `r`.
    pub rest_r: f64,
    /// Initial radius in pixels.
    pub face_radius: Jittered,
    pub head_drift_px: f64,
    pub landmarks: LandmarkConfig,
}

impl Default for SynthSpec {
    fn default() -> Self {
        // Raw smile counts are set so that roughly 5.3 per session survive
        // speech filtering at a 67.6% keep rate.
        Self {
            session_duration: 180.0,
            fps: 30.0,
            smile_count_mean: 5.30 / 0.676,
            smile_count_sd: 4.73 / 0.676,
            onset_duration: Jittered::new(0.6, 0.25),
            apex_duration: Jittered::new(0.8, 0.5),
            offset_duration: Jittered::new(0.7, 0.25),
            amplitude: Jittered::new(0.5, 0.2),
            apex_dip: 0.1,
            gap: Jittered::new(4.0, 2.5),
            noise_sd: 0.002,
            dropout_prob: 0.0125,
            dropout_frames: (3, 15),
            dropout_in_smiles: false,
            speech_overlap_fraction: 0.324,
            speech_idle_rate: 4.0,
            speech_blip_prob: 0.1,
            linkage: Vec::new(),
            linked_scale: ScaleKind::Phq9,
            scale_loading: 0.6,
            score_dists: default_score_dists(),
            rest_r: 1.6,
            face_radius: Jittered::new(30.0, 6.0),
            head_drift_px: 4.0,
            landmarks: LandmarkConfig::default(),
        }
    }
}

impl SynthSpec {
    /// Noise-free, dropout-free, speech-free variant of `self`.
    pub fn clean(mut self) -> Self {
        self.noise_sd = 0.0;
        self.dropout_prob = 0.0;
        self.speech_overlap_fraction = 0.0;
        self.speech_idle_rate = 0.0;
        self.speech_blip_prob = 0.0;
        self
    }

    fn max_smile_len(&self) -> f64 {
        self.onset_duration.max() + self.apex_duration.max() + self.offset_duration.max()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.fps > 0.0) {
            return bad("fps must be positive".into());
        }
        if !(self.session_duration > 0.0) {
            return bad("session_duration must be positive".into());
        }
        for (name, j) in [
            ("onset_duration", self.onset_duration),
            ("offset_duration", self.offset_duration),
            ("amplitude", self.amplitude),
            ("gap", self.gap),
        ] {
            if !(j.min() > 0.0) {
                return bad(format!("{name} must stay positive (mean - jitter > 0)"));
            }
        }
        if self.apex_duration.min() < 0.0 {
            return bad("apex_duration must be non-negative".into());
        }
        if !(self.noise_sd >= 0.0) || self.head_drift_px < 0.0 {
            return bad("noise_sd and head_drift_px must be non-negative".into());
        }
        if !(self.apex_dip > 0.0 && self.apex_dip < 1.0) {
            return bad("apex_dip must lie in (0, 1)".into());
        }
        for (name, p) in [
            ("dropout_prob", self.dropout_prob),
            ("speech_overlap_fraction", self.speech_overlap_fraction),
            ("speech_blip_prob", self.speech_blip_prob),
            ("scale_loading", self.scale_loading),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.dropout_frames.0 == 0 || self.dropout_frames.0 > self.dropout_frames.1 {
            return bad("dropout_frames must be a non-empty positive range".into());
        }
        if self.smile_count_mean < 0.0 || self.smile_count_sd < 0.0 {
            return bad("smile count distribution must be non-negative".into());
        }
        if !(self.rest_r > 0.0) || !(self.face_radius.min() > 0.0) {
            return bad("rest_r and face_radius must be positive".into());
        }
        if self.max_smile_len() + 2.0 * self.gap.min() > self.session_duration {
            return bad(format!(
                "infeasible: a {:.2} s smile plus margins does not fit a {:.2} s session",
                self.max_smile_len(),
                self.session_duration
            ));
        }
        Ok(())
    }
}

/// Generator-side record of one smile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueSmile {
    pub ordinal: u32,
    /// Frame numbers of onset start, onset end, offset start, offset end.
    pub boundary_frames: [u64; 4],
    pub boundaries: [f64; 4],
    pub features: SmileFeatures,
    pub speech_overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub smiles: Vec<TrueSmile>,
    /// Score on the linked scale.
    pub score: ScaleScore,
    pub latent: f64,
    pub scores: ScoreTableRow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub series: FrameSeries,
    /// Raw intervals, including sub-10 ms blips that ingest drops.
    pub speech: Vec<SpeechInterval>,
    pub truth: GroundTruth,
}

fn draw_count(mean: f64, sd: f64, rng: &mut impl Rng) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    if sd == 0.0 {
        return mean.round() as usize;
    }
    let shape = mean * mean / (sd * sd);
    let scale = sd * sd / mean;
    let g = Gamma::new(shape, scale).expect("positive gamma parameters");
    g.sample(rng).round() as usize
}

fn draw_score(dist: ScoreDist, kind: ScaleKind, latent: f64) -> ScaleScore {
    let (lo, hi) = kind.range();
    let v = (dist.mean + dist.sd * latent).round().clamp(lo as f64, hi as f64) as i64;
    ScaleScore::new(kind, v).expect("clamped into range")
}

struct Layout {
    /// Frame offsets (0-based) of the four boundaries.
    frames: [usize; 4],
    amplitude: f64,
}

/// Target `r` rise over rest at frame offset `j` of a laid-out smile.
fn shape_at(l: &Layout, dip: f64, j: usize) -> f64 {
    let [s, oe, os, e] = l.frames;
    let a = l.amplitude;
    if j < s || j > e {
        0.0
    } else if j <= oe {
        a * (j - s) as f64 / (oe - s) as f64
    } else if j < os {
        if (j - oe) % 2 == 1 {
            a - dip * a
        } else {
            a
        }
    } else {
        a * (e - j) as f64 / (e - os) as f64
    }
}

/// Generates one session for `mother_id` at `visit`.
pub fn generate_session(
    spec: &SynthSpec,
    mother_id: &str,
    visit: VisitMonth,
    seed: u64,
) -> Result<SynthSession> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let fps = spec.fps;
    let n_frames = (spec.session_duration * fps).round() as usize;
    let to_frames = |secs: f64| (secs * fps).round() as usize;

    // Latent severity and scores.
    let latent: f64 = normal.sample(&mut rng);
    let mut scores = ScoreTableRow::new(mother_id, visit);
    let mut linked = None;
    for kind in ScaleKind::ALL {
        let Some(&dist) = spec.score_dists.get(&kind) else {
            continue;
        };
        let l = if kind == spec.linked_scale {
            latent
        } else {
            let w = spec.scale_loading;
            w * latent + (1.0 - w * w).sqrt() * normal.sample(&mut rng)
        };
        let s = draw_score(dist, kind, l);
        scores.set(kind, s.value())?;
        if kind == spec.linked_scale {
            linked = Some(s);
        }
    }
    let score = linked.ok_or_else(|| {
        Error::Config(format!("no score distribution for linked scale {}", spec.linked_scale))
    })?;

    // Smile layout on the frame grid.
    let wanted = draw_count(spec.smile_count_mean, spec.smile_count_sd, &mut rng);
    let mut layouts: Vec<Layout> = Vec::new();
    let mut cursor = to_frames(spec.gap.sample(&mut rng)).max(1);
    for k in 1..=wanted {
        let linked_shift = |p: ShapeParam| -> f64 {
            spec.linkage
                .iter()
                .filter(|l| l.param == p)
                .map(|l| l.coef * l.gain(k) * latent)
                .sum()
        };
        let on = spec.onset_duration.sample(&mut rng) + linked_shift(ShapeParam::OnsetDuration);
        let ap = spec.apex_duration.sample(&mut rng) + linked_shift(ShapeParam::ApexDuration);
        let off = spec.offset_duration.sample(&mut rng) + linked_shift(ShapeParam::OffsetDuration);
        let amp = spec.amplitude.sample(&mut rng) + linked_shift(ShapeParam::Amplitude);
        let n_on = to_frames(on).max(1);
        // The ripple must return to the peak before the offset, and the
        // offset must outlast the one-step ripple runs.
        let n_ap = to_frames(ap.max(0.0)).next_multiple_of(2);
        let n_off = to_frames(off).max(2);
        let amplitude = amp.max(0.05);
        let start = cursor;
        let end = start + n_on + n_ap + n_off;
        let gap_after = to_frames(spec.gap.sample(&mut rng)).max(1);
        if end + gap_after >= n_frames {
            break;
        }
        layouts.push(Layout {
            frames: [start, start + n_on, start + n_on + n_ap, end],
            amplitude,
        });
        cursor = end + gap_after;
    }

    // Face geometry.
    let ir = spec.face_radius.sample(&mut rng);
    let nostril0 = Point::new(320.0 + rng.gen_range(-40.0..40.0), 240.0 + rng.gen_range(-30.0..30.0));
    let angle: f64 = rng.gen_range(0.9..1.2);
    let ray = Point::new(angle.cos(), angle.sin());
    let left_rel = Point::new(spec.rest_r * ir * ray.x - 2.0 * ir, spec.rest_r * ir * ray.y);
    let drift_phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let drift_period = rng.gen_range(20.0..60.0);

    let mut smile_at: Vec<Option<usize>> = vec![None; n_frames];
    for (idx, l) in layouts.iter().enumerate() {
        for s in smile_at.iter_mut().take(l.frames[3] + 1).skip(l.frames[0]) {
            *s = Some(idx);
        }
    }

    // Low-confidence bursts.
    let mut low_conf = vec![false; n_frames];
    if spec.dropout_prob > 0.0 {
        let mut i = 0;
        while i < n_frames {
            if rng.gen_bool(spec.dropout_prob) {
                let len = rng.gen_range(spec.dropout_frames.0..=spec.dropout_frames.1);
                for (f, s) in low_conf.iter_mut().zip(&smile_at).skip(i).take(len) {
                    *f = spec.dropout_in_smiles || s.is_none();
                }
                i += len;
            } else {
                i += 1;
            }
        }
    }

    let lm = spec.landmarks;
    let mut frames = Vec::with_capacity(n_frames);
    for j in 0..n_frames {
        let t = j as f64 / fps;
        let drift = spec.head_drift_px * (std::f64::consts::TAU * t / drift_period + drift_phase).sin();
        let nostril = Point::new(nostril0.x + drift, nostril0.y + 0.5 * drift);
        let rise = smile_at[j].map_or(0.0, |i| shape_at(&layouts[i], spec.apex_dip, j));
        let noise = if spec.noise_sd > 0.0 {
            spec.noise_sd * normal.sample(&mut rng)
        } else {
            0.0
        };
        let r = spec.rest_r + rise + noise;
        let right = Point::new(nostril.x + r * ir * ray.x, nostril.y + r * ir * ray.y);
        let left = Point::new(nostril.x + left_rel.x, nostril.y + left_rel.y);
        let au12 = match smile_at[j] {
            Some(i) => 2.1 + 2.4 * (rise / layouts[i].amplitude).clamp(0.0, 1.0),
            None => rng.gen_range(0.1..0.9),
        };
        let confidence = if low_conf[j] {
            rng.gen_range(0.3..0.7)
        } else {
            rng.gen_range(0.9..=1.0)
        };
        let mut points = BTreeMap::new();
        points.insert(lm.nostril, nostril);
        points.insert(lm.left_lip, left);
        points.insert(lm.right_lip, right);
        frames.push(FrameRecord {
            frame_index: j as u64 + 1,
            timestamp: t,
            confidence,
            au12,
            points,
        });
    }

    // Speech.
    let mut speech = Vec::new();
    let mut smiles = Vec::with_capacity(layouts.len());
    for (idx, l) in layouts.iter().enumerate() {
        let [s, oe, os, e] = l.frames;
        let (ts, te) = (s as f64 / fps, e as f64 / fps);
        let dur = te - ts;
        let overlap = rng.gen_bool(spec.speech_overlap_fraction);
        if overlap {
            let start = ts + dur * rng.gen_range(0.25..0.5);
            let next_start = layouts.get(idx + 1).map_or(spec.session_duration, |n| n.frames[0] as f64 / fps);
            let limit = te + 0.5 * (next_start - te);
            let end = (start + rng.gen_range(0.3..1.5)).min(limit);
            speech.push(SpeechInterval { start, end });
        }
        if rng.gen_bool(spec.speech_blip_prob) {
            let start = ts + dur * rng.gen_range(0.1..0.9);
            speech.push(SpeechInterval { start, end: start + 0.005 });
        }
        let n_on = (oe - s) as f64;
        let n_ap = (os - oe) as f64;
        let n_off = (e - os) as f64;
        let onset_duration = n_on / fps;
        let apex_duration = n_ap / fps;
        let offset_duration = n_off / fps;
        smiles.push(TrueSmile {
            ordinal: idx as u32 + 1,
            boundary_frames: [s as u64 + 1, oe as u64 + 1, os as u64 + 1, e as u64 + 1],
            boundaries: [ts, oe as f64 / fps, os as f64 / fps, te],
            features: SmileFeatures {
                max_onset_speed: l.amplitude * fps / n_on,
                max_offset_speed: l.amplitude * fps / n_off,
                onset_amplitude: l.amplitude,
                offset_amplitude: l.amplitude,
                onset_duration,
                offset_duration,
                apex_duration,
                total_duration: onset_duration + apex_duration + offset_duration,
            },
            speech_overlap: overlap,
        });
    }
    let idle = (spec.speech_idle_rate * spec.session_duration / 60.0).round() as usize;
    for _ in 0..idle {
        let start = rng.gen_range(0.0..spec.session_duration - 0.5);
        let end = start + rng.gen_range(0.2..1.0);
        let clear = layouts.iter().all(|l| {
            let (a, b) = (l.frames[0] as f64 / fps - 0.05, l.frames[3] as f64 / fps + 0.05);
            end <= a || start >= b
        });
        if clear {
            speech.push(SpeechInterval { start, end });
        }
    }
    speech.sort_by(|a, b| a.start.total_cmp(&b.start));

    let info = SessionInfo::new(mother_id, visit, fps);
    Ok(SynthSession {
        series: FrameSeries {
            session_id: info.session_id,
            mother_id: info.mother_id,
            visit_month: visit,
            frames,
            fps_nominal: fps,
        },
        speech,
        truth: GroundTruth {
            smiles,
            score,
            latent,
            scores,
        },
    })
}

/// Sessions for `mothers` mothers at both visits, plus their score table.
/// Mother ids are `m001`, `m002`, ...; each session's seed derives from
/// `seed` and its position.
pub fn generate_corpus(
    spec: &SynthSpec,
    mothers: usize,
    visits: &[VisitMonth],
    seed: u64,
) -> Result<(Vec<SynthSession>, ScoreTable)> {
    let mut sessions = Vec::new();
    let mut table = ScoreTable {
        columns: ScaleKind::ALL
            .into_iter()
            .filter(|k| spec.score_dists.contains_key(k))
            .collect(),
        ..Default::default()
    };
    for m in 0..mothers {
        let id = format!("m{:03}", m + 1);
        for &v in visits {
            let s = generate_session(spec, &id, v, seeds::derive(seed, &id, v.months() as u64))?;
            table.insert(s.truth.scores.clone())?;
            sessions.push(s);
        }
    }
    Ok((sessions, table))
}

/// For each true smile, the largest absolute boundary error (in frames)
/// against the detected smile overlapping it most, or `None` if no detected
/// smile overlaps it.
pub fn boundary_errors(truth: &[TrueSmile], detected: &[Smile]) -> Vec<Option<u64>> {
    truth
        .iter()
        .map(|t| {
            let [ts, _, _, te] = t.boundary_frames;
            detected
                .iter()
                .filter_map(|d| {
                    let [ds, _, _, de] = d.boundary_frames;
                    let overlap = te.min(de) as i64 - ts.max(ds) as i64;
                    (overlap >= 0).then_some((overlap, d))
                })
                .max_by_key(|(o, _)| *o)
                .map(|(_, d)| {
                    (0..4)
                        .map(|i| t.boundary_frames[i].abs_diff(d.boundary_frames[i]))
                        .max()
                        .unwrap_or(0)
                })
        })
        .collect()
}

/// Plants the score in window means of `period` consecutive smiles: each
/// session's values of `feature` follow a zero-sum repeating pattern around a
/// score-determined level, so only windows whose length is a multiple of
/// `period` see the level without pattern noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicPlant {
    pub feature: Feature,
    pub period: usize,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureCorpusSpec {
    pub mothers: usize,
    pub visits: Vec<VisitMonth>,
    pub smile_count_mean: f64,
    pub smile_count_sd: f64,
    pub smile_count_min: usize,
    pub scale: ScaleKind,
    pub score: ScoreDist,
    /// Relative per-smile noise on every feature.
    pub noise: f64,
    /// `(feature, coef, gain per ordinal)`: feature level shifts by
    /// `coef * (1 + gain * (k - 1)) * z` with z the standardized score.
    pub linear: Vec<(Feature, f64, f64)>,
    pub periodic: Option<PeriodicPlant>,
}

impl Default for FeatureCorpusSpec {
    fn default() -> Self {
        Self {
            mothers: 94,
            visits: vec![VisitMonth::Six, VisitMonth::Twelve],
            smile_count_mean: 5.30,
            smile_count_sd: 4.73,
            smile_count_min: 0,
            scale: ScaleKind::Phq9,
            score: ScoreDist { mean: 3.19, sd: 4.16 },
            noise: 0.3,
            linear: Vec::new(),
            periodic: None,
        }
    }
}

/// Typical feature levels used as the base of [`feature_corpus`].
const BASE_LEVEL: [f64; 8] = [2.5, 2.2, 0.5, 0.5, 0.6, 0.7, 0.8, 2.1];

/// Feature-level corpus with planted relationships; only `spec.scale` is scored.
pub fn feature_corpus(spec: &FeatureCorpusSpec, seed: u64) -> Result<(Vec<FeatureTable>, ScoreTable)> {
    if spec.score.sd <= 0.0 {
        return Err(Error::Config("score sd must be positive".into()));
    }
    if let Some(p) = &spec.periodic {
        if p.period == 0 {
            return Err(Error::Config("periodic plant needs period >= 1".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut tables = Vec::new();
    let mut scores = ScoreTable {
        columns: vec![spec.scale],
        ..Default::default()
    };
    for m in 0..spec.mothers {
        let id = format!("m{:03}", m + 1);
        for &visit in &spec.visits {
            let score = draw_score(spec.score, spec.scale, normal.sample(&mut rng));
            let z = (score.value() as f64 - spec.score.mean) / spec.score.sd;
            let mut row = ScoreTableRow::new(&id, visit);
            row.set(spec.scale, score.value())?;
            scores.insert(row)?;

            let n = draw_count(spec.smile_count_mean, spec.smile_count_sd, &mut rng).max(spec.smile_count_min);
            let pattern: Vec<f64> = match &spec.periodic {
                Some(p) => {
                    let mut v: Vec<f64> = (0..p.period).map(|_| normal.sample(&mut rng)).collect();
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter_mut().for_each(|x| *x -= mean);
                    v
                }
                None => Vec::new(),
            };
            let mut rows = Vec::with_capacity(n);
            for k in 1..=n {
                let mut vals = [0.0; 8];
                for f in Feature::ALL {
                    if f == Feature::TotalDuration {
                        continue;
                    }
                    let base = BASE_LEVEL[f.index()];
                    let mut v = base * (1.0 + spec.noise * normal.sample(&mut rng));
                    for &(lf, coef, gain) in &spec.linear {
                        if lf == f {
                            v += coef * (1.0 + gain * (k - 1) as f64) * z;
                        }
                    }
                    if let Some(p) = spec.periodic.as_ref().filter(|p| p.feature == f) {
                        v += p.spread * pattern[(k - 1) % p.period];
                    }
                    vals[f.index()] = v.max(1e-3);
                }
                vals[Feature::TotalDuration.index()] = vals[Feature::OnsetDuration.index()]
                    + vals[Feature::ApexDuration.index()]
                    + vals[Feature::OffsetDuration.index()];
                rows.push((k as u32, SmileFeatures::from_array(vals)));
            }
            tables.push(FeatureTable {
                mother_id: id.clone(),
                visit_month: visit,
                rows,
            });
        }
    }
    Ok((tables, scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid() {
        SynthSpec::default().validate().unwrap();
    }

    #[test]
    fn infeasible_spec_rejected() {
        let spec = SynthSpec {
            session_duration: 2.0,
            ..Default::default()
        };
        assert!(matches!(spec.validate(), Err(Error::Config(m)) if m.contains("infeasible")));
        assert!(generate_session(&spec, "m", VisitMonth::Six, 1).is_err());
    }

    #[test]
    fn same_seed_same_output() {
        let spec = SynthSpec::default();
        let a = generate_session(&spec, "m1", VisitMonth::Six, 42).unwrap();
        let b = generate_session(&spec, "m1", VisitMonth::Six, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_session(&spec, "m1", VisitMonth::Six, 43).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn au12_marks_smiles() {
        let spec = SynthSpec::default().clean();
        let s = generate_session(&spec, "m1", VisitMonth::Six, 3).unwrap();
        assert!(!s.truth.smiles.is_empty());
        for sm in &s.truth.smiles {
            let [a, _, _, d] = sm.boundary_frames;
            for f in &s.series.frames[(a - 1) as usize..d as usize] {
                assert!(f.au12 > 2.0);
            }
            assert!(s.series.frames[(a - 2) as usize].au12 < 1.0);
            assert!(s.series.frames[d as usize].au12 < 1.0);
        }
    }

    #[test]
    fn count_distribution_roughly_calibrated() {
        let spec = SynthSpec::default();
        let n = 300;
        let mut total = 0;
        for i in 0..n {
            total += generate_session(&spec, "m", VisitMonth::Six, i).unwrap().truth.smiles.len();
        }
        let mean = total as f64 / n as f64;
        assert!((mean - spec.smile_count_mean).abs() < 1.0, "{mean}");
    }

    #[test]
    fn feature_corpus_structure() {
        let spec = FeatureCorpusSpec {
            mothers: 5,
            smile_count_min: 2,
            ..Default::default()
        };
        let (tables, scores) = feature_corpus(&spec, 1).unwrap();
        assert_eq!(tables.len(), 10);
        assert_eq!(scores.rows.len(), 10);
        for t in &tables {
            assert!(t.count() >= 2);
            for (_, f) in &t.rows {
                let sum = f.onset_duration + f.apex_duration + f.offset_duration;
                assert_eq!(f.total_duration, sum);
            }
        }
    }

    #[test]
    fn periodic_plant_fixes_window_means() {
        let spec = FeatureCorpusSpec {
            mothers: 4,
            smile_count_mean: 9.0,
            smile_count_sd: 0.0,
            noise: 0.0,
            linear: vec![(Feature::OnsetAmplitude, 0.1, 0.0)],
            periodic: Some(PeriodicPlant {
                feature: Feature::OnsetAmplitude,
                period: 3,
                spread: 0.1,
            }),
            ..Default::default()
        };
        let (tables, _) = feature_corpus(&spec, 2).unwrap();
        for t in &tables {
            let v: Vec<f64> = t.rows.iter().map(|(_, f)| f.onset_amplitude).collect();
            let means: Vec<f64> = v.windows(3).map(|w| w.iter().sum::<f64>() / 3.0).collect();
            for m in &means {
                assert!((m - means[0]).abs() < 1e-12);
            }
        }
    }
}

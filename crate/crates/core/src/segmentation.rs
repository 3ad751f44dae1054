//! Smile segmentation.
//!
//! A session is first cut into maximal runs of high-confidence frames. Inside
//! each run, AU12 activation episodes are detected; each episode is then
//! scanned in the normalized-radius domain for an onset (longest rising run of
//! `r`) followed by an offset (longest falling run starting at or after the
//! onset's end). Everything between the two is the apex.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FrameRecord, FrameSeries, LandmarkConfig, Point, SpeechInterval};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub confidence_min: f64,
    pub au12_threshold: f64,
    pub au12_min_hits: usize,
    /// Seconds.
    pub au12_hit_window: f64,
    pub monotone_epsilon: f64,
    /// Seconds of sub-threshold AU12 that close an episode.
    pub episode_gap_max: f64,
    pub landmarks: LandmarkConfig,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            confidence_min: 0.80,
            au12_threshold: 1.5,
            au12_min_hits: 2,
            au12_hit_window: 1.0,
            monotone_epsilon: 1e-6,
            episode_gap_max: 1.0,
            landmarks: LandmarkConfig::default(),
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.confidence_min) {
            return bad("confidence_min must lie in [0, 1]");
        }
        if !(self.au12_threshold > 0.0 && self.au12_threshold <= 5.0) {
            return bad("au12_threshold must lie in (0, 5]");
        }
        if self.au12_min_hits < 1 {
            return bad("au12_min_hits must be at least 1");
        }
        if !(self.au12_hit_window > 0.0) || !(self.episode_gap_max > 0.0) {
            return bad("au12_hit_window and episode_gap_max must be positive");
        }
        if !(self.monotone_epsilon >= 0.0) {
            return bad("monotone_epsilon must be non-negative");
        }
        Ok(())
    }
}

/// Confidence gating outcome: high-confidence runs as index ranges into the
/// series' frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub runs: Vec<Range<usize>>,
    pub kept: usize,
    pub total: usize,
}

impl Gate {
    pub fn retention_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.kept as f64 / self.total as f64
        }
    }
}

/// Splits a series into maximal runs of frames with confidence at or above
/// the threshold. A rejected frame always breaks a run.
pub fn gate_confidence(series: &FrameSeries, cfg: &SegmentationConfig) -> Gate {
    let frames = &series.frames;
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, f) in frames.iter().enumerate() {
        let ok = f.confidence >= cfg.confidence_min;
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..frames.len());
    }
    let kept = runs.iter().map(|r| r.len()).sum();
    Gate {
        runs,
        kept,
        total: frames.len(),
    }
}

/// Half the distance between the lip corners.
pub fn initial_radius(right: Point, left: Point) -> Result<f64> {
    let ir = right.sub(left).norm() / 2.0;
    if ir > 0.0 && ir.is_finite() {
        Ok(ir)
    } else {
        Err(Error::DegenerateFace)
    }
}

/// Normalized rightward movement: length of the nostril-relative right lip
/// corner, in units of the initial radius.
pub fn r_value(right_normalized: Point, ir: f64) -> Result<f64> {
    if !(ir > 0.0) {
        return Err(Error::precondition(format!("initial radius must be positive, got {ir}")));
    }
    Ok(right_normalized.norm() / ir)
}

/// An AU12 activation episode: `start..end` indexes the series' frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub start: usize,
    pub end: usize,
    /// No frame-number gaps inside the span.
    pub contiguous: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Finds activation episodes inside one high-confidence run.
///
/// An episode is triggered by `au12_min_hits` frames at or above threshold
/// within `au12_hit_window` seconds; it starts at the first of those hits and
/// runs through the last hit before AU12 stays below threshold for more than
/// `episode_gap_max` seconds (or the run ends).
pub fn detect_activation_episodes(
    frames: &[FrameRecord],
    run: Range<usize>,
    cfg: &SegmentationConfig,
) -> Vec<Episode> {
    const SLACK: f64 = 1e-9;
    let hits: Vec<usize> = run
        .filter(|&i| frames[i].au12 >= cfg.au12_threshold)
        .collect();
    let need = cfg.au12_min_hits.max(1);
    let mut episodes = Vec::new();
    let mut h = 0;
    while h + need <= hits.len() {
        let first = hits[h];
        let kth = hits[h + need - 1];
        if frames[kth].timestamp - frames[first].timestamp > cfg.au12_hit_window + SLACK {
            h += 1;
            continue;
        }
        let mut last = kth;
        let mut j = h + need;
        while j < hits.len()
            && frames[hits[j]].timestamp - frames[last].timestamp <= cfg.episode_gap_max + SLACK
        {
            last = hits[j];
            j += 1;
        }
        let contiguous = frames[first..=last]
            .windows(2)
            .all(|w| w[1].frame_index == w[0].frame_index + 1);
        episodes.push(Episode {
            start: first,
            end: last + 1,
            contiguous,
        });
        h = j;
    }
    episodes
}

/// One segmented smile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smile {
    pub session_id: String,
    pub ordinal: u32,
    pub onset_start: f64,
    pub onset_end: f64,
    pub offset_start: f64,
    pub offset_end: f64,
    /// `(timestamp, r)` from onset start through offset end.
    pub r_trace: Vec<(f64, f64)>,
    pub initial_radius: f64,
    /// Frame numbers of the four boundaries, in the same order as the timestamps.
    pub boundary_frames: [u64; 4],
}

impl Smile {
    pub fn onset_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r_trace
            .iter()
            .copied()
            .filter(move |&(t, _)| t >= self.onset_start && t <= self.onset_end)
    }

    pub fn offset_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r_trace
            .iter()
            .copied()
            .filter(move |&(t, _)| t >= self.offset_start && t <= self.offset_end)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Rising,
    Falling,
}

/// Longest maximal monotone run in `r[from..]` that contains at least one
/// strict step, as inclusive indices. Ties go to the earliest run.
fn longest_run(r: &[f64], from: usize, dir: Direction, eps: f64) -> Option<(usize, usize)> {
    let signed = |d: f64| match dir {
        Direction::Rising => d,
        Direction::Falling => -d,
    };
    let mut best: Option<(usize, usize)> = None;
    let mut i = from;
    while i + 1 < r.len() {
        if signed(r[i + 1] - r[i]) < -eps {
            i += 1;
            continue;
        }
        let start = i;
        let mut strict = false;
        while i + 1 < r.len() {
            let d = signed(r[i + 1] - r[i]);
            if d < -eps {
                break;
            }
            strict |= d > eps;
            i += 1;
        }
        if strict && best.is_none_or(|(s, e)| i - start > e - s) {
            best = Some((start, i));
        }
    }
    best
}

/// Per-session segmentation outcome before speech filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSegmentation {
    pub smiles: Vec<Smile>,
    pub retention_fraction: f64,
    pub episodes: usize,
}

/// Segments every smile in a session, in temporal order with 1-based ordinals.
pub fn segment_smiles(series: &FrameSeries, cfg: &SegmentationConfig) -> Result<Vec<Smile>> {
    Ok(segment_session(series, cfg)?.smiles)
}

pub fn segment_session(series: &FrameSeries, cfg: &SegmentationConfig) -> Result<SessionSegmentation> {
    cfg.validate()?;
    let lm = cfg.landmarks;
    let frames = &series.frames;
    let gate = gate_confidence(series, cfg);
    let mut smiles = Vec::new();
    let mut n_episodes = 0;
    for run in &gate.runs {
        let episodes = detect_activation_episodes(frames, run.clone(), cfg);
        n_episodes += episodes.len();
        // The radius is re-measured on the frame after the previous smile ends.
        let mut after_prev: Option<usize> = None;
        for ep in episodes {
            let ir_frame = &frames[after_prev.unwrap_or(ep.start)];
            let nostril = ir_frame.point(lm.nostril);
            let ir = initial_radius(
                ir_frame.point(lm.right_lip).sub(nostril),
                ir_frame.point(lm.left_lip).sub(nostril),
            )?;
            let span = &frames[ep.start..ep.end];
            let r = span
                .iter()
                .map(|f| r_value(f.point(lm.right_lip).sub(f.point(lm.nostril)), ir))
                .collect::<Result<Vec<_>>>()?;
            let eps = cfg.monotone_epsilon;
            let Some((on_s, on_e)) = longest_run(&r, 0, Direction::Rising, eps) else {
                continue;
            };
            let Some((off_s, off_e)) = longest_run(&r, on_e, Direction::Falling, eps) else {
                continue;
            };
            let at = |i: usize| &span[i];
            smiles.push(Smile {
                session_id: series.session_id.clone(),
                ordinal: smiles.len() as u32 + 1,
                onset_start: at(on_s).timestamp,
                onset_end: at(on_e).timestamp,
                offset_start: at(off_s).timestamp,
                offset_end: at(off_e).timestamp,
                r_trace: (on_s..=off_e).map(|i| (at(i).timestamp, r[i])).collect(),
                initial_radius: ir,
                boundary_frames: [
                    at(on_s).frame_index,
                    at(on_e).frame_index,
                    at(off_s).frame_index,
                    at(off_e).frame_index,
                ],
            });
            let next = ep.start + off_e + 1;
            after_prev = (next < run.end).then_some(next);
        }
    }
    Ok(SessionSegmentation {
        smiles,
        retention_fraction: gate.retention_fraction(),
        episodes: n_episodes,
    })
}

/// Drops smiles whose `[onset_start, offset_end]` overlaps speech by a
/// positive amount and renumbers the survivors.
pub fn remove_speech_confounded(
    smiles: Vec<Smile>,
    speech: &[SpeechInterval],
) -> (Vec<Smile>, usize) {
    let before = smiles.len();
    let mut kept: Vec<Smile> = smiles
        .into_iter()
        .filter(|s| !speech.iter().any(|iv| iv.overlaps(s.onset_start, s.offset_end)))
        .collect();
    for (i, s) in kept.iter_mut().enumerate() {
        s.ordinal = i as u32 + 1;
    }
    let removed = before - kept.len();
    (kept, removed)
}

/// `smiles.csv` rows.
pub fn write_smiles_csv<W: Write>(smiles: &[Smile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io {
        path: "smiles.csv".into(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record([
        "session_id",
        "ordinal",
        "onset_start",
        "onset_end",
        "offset_start",
        "offset_end",
        "initial_radius",
    ])
    .map_err(io)?;
    for s in smiles {
        w.write_record([
            s.session_id.clone(),
            s.ordinal.to_string(),
            s.onset_start.to_string(),
            s.onset_end.to_string(),
            s.offset_start.to_string(),
            s.offset_end.to_string(),
            s.initial_radius.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "smiles.csv".into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::VisitMonth;
    use std::collections::BTreeMap;

    const FPS: f64 = 30.0;

    fn frame(i: usize, conf: f64, au12: f64, r: f64) -> FrameRecord {
        // Nostril at origin, left corner fixed so that IR = 1 at rest.
        let mut points = BTreeMap::new();
        points.insert(32, Point::new(0.0, 0.0));
        points.insert(48, Point::new(-1.0, 0.0));
        points.insert(54, Point::new(r, 0.0));
        FrameRecord {
            frame_index: i as u64 + 1,
            timestamp: i as f64 / FPS,
            confidence: conf,
            au12,
            points,
        }
    }

    fn series(frames: Vec<FrameRecord>) -> FrameSeries {
        FrameSeries {
            session_id: "m1_6".into(),
            mother_id: "m1".into(),
            visit_month: VisitMonth::Six,
            frames,
            fps_nominal: FPS,
        }
    }

    fn conf_series(confs: &[f64]) -> FrameSeries {
        series(confs.iter().enumerate().map(|(i, &c)| frame(i, c, 0.0, 1.0)).collect())
    }

    #[test]
    fn gate_splits_runs() {
        let g = gate_confidence(&conf_series(&[0.9, 0.7, 0.9]), &SegmentationConfig::default());
        assert_eq!(g.runs, vec![0..1, 2..3]);
        assert!((g.retention_fraction() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gate_identity() {
        let g = gate_confidence(&conf_series(&[1.0; 5]), &SegmentationConfig::default());
        assert_eq!(g.runs, vec![0..5]);
        assert_eq!(g.retention_fraction(), 1.0);
    }

    #[test]
    fn gate_retention_fraction() {
        let mut confs = vec![0.95; 906];
        confs.extend(std::iter::repeat_n(0.5, 94));
        let g = gate_confidence(&conf_series(&confs), &SegmentationConfig::default());
        assert!((g.retention_fraction() - 0.906).abs() < 1e-12);
    }

    #[test]
    fn gate_threshold_boundary() {
        let g = gate_confidence(&conf_series(&[0.79, 0.80, 0.81]), &SegmentationConfig::default());
        assert_eq!(g.runs, vec![1..3]);
    }

    #[test]
    fn radius_examples() {
        assert_eq!(initial_radius(Point::new(1.0, 0.0), Point::new(-1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(initial_radius(Point::new(3.0, 4.0), Point::new(0.0, 0.0)).unwrap(), 2.5);
        assert!(matches!(
            initial_radius(Point::new(2.0, 2.0), Point::new(2.0, 2.0)),
            Err(Error::DegenerateFace)
        ));
    }

    #[test]
    fn r_examples() {
        assert_eq!(r_value(Point::new(3.0, 4.0), 2.5).unwrap(), 2.0);
        assert_eq!(r_value(Point::new(0.0, 0.0), 7.0).unwrap(), 0.0);
        assert!(matches!(r_value(Point::new(1.0, 0.0), 0.0), Err(Error::Precondition(_))));
    }

    fn au_frames(au: &[f64]) -> Vec<FrameRecord> {
        au.iter().enumerate().map(|(i, &a)| frame(i, 1.0, a, 1.0)).collect()
    }

    #[test]
    fn two_hits_trigger() {
        let mut au = vec![2.0, 2.0];
        au.extend(std::iter::repeat_n(0.1, 60));
        let f = au_frames(&au);
        let eps = detect_activation_episodes(&f, 0..f.len(), &SegmentationConfig::default());
        assert_eq!(eps, vec![Episode { start: 0, end: 2, contiguous: true }]);
    }

    #[test]
    fn single_hit_no_episode() {
        let mut au = vec![0.1; 90];
        au[40] = 4.0;
        let f = au_frames(&au);
        assert!(detect_activation_episodes(&f, 0..f.len(), &SegmentationConfig::default()).is_empty());
        // Two hits more than a second apart do not trigger either.
        au[40 + 31] = 4.0;
        let f = au_frames(&au);
        assert!(detect_activation_episodes(&f, 0..f.len(), &SegmentationConfig::default()).is_empty());
    }

    #[test]
    fn threshold_is_inclusive() {
        let au = [1.5, 1.5, 0.0];
        let f = au_frames(&au);
        assert_eq!(detect_activation_episodes(&f, 0..3, &SegmentationConfig::default()).len(), 1);
        let au = [1.4999, 1.4999, 0.0];
        let f = au_frames(&au);
        assert!(detect_activation_episodes(&f, 0..3, &SegmentationConfig::default()).is_empty());
    }

    #[test]
    fn separated_clusters_two_episodes() {
        let mut au = vec![2.0; 10];
        au.extend(std::iter::repeat_n(0.1, 60));
        au.extend(std::iter::repeat_n(2.0, 10));
        let f = au_frames(&au);
        let eps = detect_activation_episodes(&f, 0..f.len(), &SegmentationConfig::default());
        assert_eq!(eps.len(), 2);
        assert_eq!((eps[0].start, eps[0].end), (0, 10));
        assert_eq!((eps[1].start, eps[1].end), (70, 80));
    }

    #[test]
    fn short_dip_does_not_split() {
        let mut au = vec![2.0; 10];
        au.extend(std::iter::repeat_n(0.1, 15));
        au.extend(std::iter::repeat_n(2.0, 10));
        let f = au_frames(&au);
        let eps = detect_activation_episodes(&f, 0..f.len(), &SegmentationConfig::default());
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].end, 35);
    }

    fn smile_series(rs: &[f64]) -> FrameSeries {
        series(rs.iter().enumerate().map(|(i, &r)| frame(i, 1.0, 3.0, r)).collect())
    }

    #[test]
    fn worked_example_boundaries() {
        let s = smile_series(&[1.00, 1.10, 1.30, 1.30, 1.20, 1.00]);
        let smiles = segment_smiles(&s, &SegmentationConfig::default()).unwrap();
        assert_eq!(smiles.len(), 1);
        let sm = &smiles[0];
        assert_eq!(sm.boundary_frames, [1, 4, 4, 6]);
        assert_eq!(sm.onset_start, 0.0);
        assert_eq!(sm.onset_end, 3.0 / FPS);
        assert_eq!(sm.offset_start, 3.0 / FPS);
        assert_eq!(sm.offset_end, 5.0 / FPS);
        assert_eq!(sm.ordinal, 1);
        assert_eq!(sm.initial_radius, 1.0);
        assert_eq!(sm.r_trace.len(), 6);
    }

    #[test]
    fn no_activation_no_smiles() {
        let f: Vec<_> = (0..60).map(|i| frame(i, 1.0, 1.0, 1.0 + i as f64 * 0.01)).collect();
        assert!(segment_smiles(&series(f), &SegmentationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn rising_only_episode_yields_nothing() {
        let s = smile_series(&[1.0, 1.1, 1.2, 1.3]);
        assert!(segment_smiles(&s, &SegmentationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn radius_recomputed_after_offset() {
        // First smile at face scale 1, then the face scales up by 2 before the
        // second episode; r must be measured against the re-taken radius.
        let mut frames = Vec::new();
        let tri = [1.0, 1.2, 1.4, 1.2, 1.0];
        for (i, &r) in tri.iter().enumerate() {
            frames.push(frame(i, 1.0, 3.0, r));
        }
        for i in 5..65 {
            let mut f = frame(i, 1.0, 0.0, 2.0);
            f.points.insert(48, Point::new(-2.0, 0.0));
            frames.push(f);
        }
        for (k, &r) in tri.iter().enumerate() {
            let mut f = frame(65 + k, 1.0, 3.0, 2.0 * r);
            f.points.insert(48, Point::new(-2.0, 0.0));
            frames.push(f);
        }
        let smiles = segment_smiles(&series(frames), &SegmentationConfig::default()).unwrap();
        assert_eq!(smiles.len(), 2);
        assert_eq!(smiles[0].initial_radius, 1.0);
        assert_eq!(smiles[1].initial_radius, 2.0);
        assert_eq!(smiles[1].ordinal, 2);
        let peak = smiles[1].r_trace.iter().map(|p| p.1).fold(0.0, f64::max);
        assert!((peak - 1.4).abs() < 1e-12);
    }

    #[test]
    fn low_confidence_breaks_episode() {
        let mut frames: Vec<_> = [1.0, 1.2, 1.4, 1.2, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| frame(i, 1.0, 3.0, r))
            .collect();
        frames[2].confidence = 0.5;
        assert!(segment_smiles(&series(frames), &SegmentationConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn degenerate_face_propagates() {
        let mut frames: Vec<_> = (0..4).map(|i| frame(i, 1.0, 3.0, 1.0)).collect();
        for f in &mut frames {
            f.points.insert(48, Point::new(1.0, 0.0));
        }
        assert!(matches!(
            segment_smiles(&series(frames), &SegmentationConfig::default()),
            Err(Error::DegenerateFace)
        ));
    }

    fn mk_smile(start: f64, end: f64) -> Smile {
        Smile {
            session_id: "s".into(),
            ordinal: 1,
            onset_start: start,
            onset_end: (start + end) / 2.0,
            offset_start: (start + end) / 2.0,
            offset_end: end,
            r_trace: vec![],
            initial_radius: 1.0,
            boundary_frames: [0; 4],
        }
    }

    #[test]
    fn speech_filter_examples() {
        let iv = |a, b| SpeechInterval { start: a, end: b };
        let (k, n) = remove_speech_confounded(vec![mk_smile(1.0, 2.0)], &[iv(1.5, 3.0)]);
        assert!(k.is_empty());
        assert_eq!(n, 1);
        let (k, n) = remove_speech_confounded(vec![mk_smile(1.0, 2.0)], &[iv(2.5, 3.0)]);
        assert_eq!((k.len(), n), (1, 0));
        let (k, n) = remove_speech_confounded(vec![mk_smile(1.0, 2.0)], &[]);
        assert_eq!((k.len(), n), (1, 0));
        // Touching endpoints is not a positive overlap.
        let (k, _) = remove_speech_confounded(vec![mk_smile(1.0, 2.0)], &[iv(2.0, 3.0)]);
        assert_eq!(k.len(), 1);
    }

    #[test]
    fn speech_filter_renumbers() {
        let mut smiles = vec![mk_smile(1.0, 2.0), mk_smile(3.0, 4.0), mk_smile(5.0, 6.0)];
        for (i, s) in smiles.iter_mut().enumerate() {
            s.ordinal = i as u32 + 1;
        }
        let (k, n) =
            remove_speech_confounded(smiles, &[SpeechInterval { start: 3.5, end: 3.6 }]);
        assert_eq!(n, 1);
        assert_eq!(k.iter().map(|s| s.ordinal).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(k[1].onset_start, 5.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SegmentationConfig::default();
        assert!(c.validate().is_ok());
        c.au12_threshold = 0.0;
        assert!(c.validate().is_err());
        c = SegmentationConfig { au12_min_hits: 0, ..Default::default() };
        assert!(c.validate().is_err());
        c = SegmentationConfig { confidence_min: 1.5, ..Default::default() };
        assert!(c.validate().is_err());
    }
}

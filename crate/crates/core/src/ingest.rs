//! Strict parsers for the three tabular inputs: per-frame facial-analysis
//! output, speech intervals, and questionnaire score tables.
//!
//! All three are comma-separated with a header row. Whitespace around cells is
//! ignored, so `a, b` and `a,b` parse identically. Out-of-range values abort
//! the parse with the offending line number instead of being dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scales::{ScaleKind, ScaleScore};

/// Speech shorter than this (seconds) is treated as a non-vocal blip.
pub const MIN_SPEECH_DURATION: f64 = 0.010;
// Absorbs decimal round-off such as 1.01 - 1.0 = 0.010000000000000009.
const DURATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Which landmark indices play the lip-corner and nostril roles.
///
/// Defaults follow the 68-point convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkConfig {
    pub left_lip: usize,
    pub right_lip: usize,
    pub nostril: usize,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        Self {
            left_lip: 48,
            right_lip: 54,
            nostril: 32,
        }
    }
}

impl LandmarkConfig {
    /// Distinct configured indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        let mut v = vec![self.left_lip, self.right_lip, self.nostril];
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u32", try_from = "u32")]
pub enum VisitMonth {
    Six,
    Twelve,
}

impl VisitMonth {
    pub const fn months(self) -> u32 {
        match self {
            VisitMonth::Six => 6,
            VisitMonth::Twelve => 12,
        }
    }
}

impl From<VisitMonth> for u32 {
    fn from(v: VisitMonth) -> u32 {
        v.months()
    }
}

impl TryFrom<u32> for VisitMonth {
    type Error = Error;

    fn try_from(m: u32) -> Result<Self> {
        match m {
            6 => Ok(VisitMonth::Six),
            12 => Ok(VisitMonth::Twelve),
            other => Err(Error::Config(format!("visit month must be 6 or 12, got {other}"))),
        }
    }
}

impl fmt::Display for VisitMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.months())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub timestamp: f64,
    pub confidence: f64,
    pub au12: f64,
    pub points: BTreeMap<usize, Point>,
}

impl FrameRecord {
    /// Landmark lookup; indices are validated at parse time.
    pub fn point(&self, index: usize) -> Point {
        self.points[&index]
    }
}

/// Identity of one recorded session, supplied alongside its frame table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub mother_id: String,
    pub visit_month: VisitMonth,
    pub fps_nominal: f64,
}

impl SessionInfo {
    pub fn new(mother_id: &str, visit_month: VisitMonth, fps_nominal: f64) -> Self {
        Self {
            session_id: session_id(mother_id, visit_month),
            mother_id: mother_id.to_string(),
            visit_month,
            fps_nominal,
        }
    }
}

/// Canonical `<mother>_<months>` session name.
pub fn session_id(mother_id: &str, visit_month: VisitMonth) -> String {
    format!("{mother_id}_{}", visit_month.months())
}

/// Inverse of [`session_id`]; splits on the last underscore.
pub fn split_session_id(id: &str) -> Result<(String, VisitMonth)> {
    let (mother, month) = id
        .rsplit_once('_')
        .ok_or_else(|| Error::Config(format!("session id `{id}` lacks a `_<month>` suffix")))?;
    let month: u32 = month
        .parse()
        .map_err(|_| Error::Config(format!("session id `{id}` has a non-numeric month")))?;
    Ok((mother.to_string(), VisitMonth::try_from(month)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSeries {
    pub session_id: String,
    pub mother_id: String,
    pub visit_month: VisitMonth,
    pub frames: Vec<FrameRecord>,
    pub fps_nominal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechInterval {
    pub start: f64,
    pub end: f64,
}

impl SpeechInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// True when the closed ranges share a positive-length stretch.
    pub fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start.max(start) < self.end.min(end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreTableRow {
    pub mother_id: String,
    pub visit_month: VisitMonth,
    pub phq9: Option<i64>,
    pub aces: Option<i64>,
    pub social_support: Option<i64>,
    pub pss: Option<i64>,
    pub pearls: Option<i64>,
}

impl ScoreTableRow {
    pub fn new(mother_id: &str, visit_month: VisitMonth) -> Self {
        Self {
            mother_id: mother_id.to_string(),
            visit_month,
            phq9: None,
            aces: None,
            social_support: None,
            pss: None,
            pearls: None,
        }
    }

    fn slot(&mut self, kind: ScaleKind) -> &mut Option<i64> {
        match kind {
            ScaleKind::Phq9 => &mut self.phq9,
            ScaleKind::Aces => &mut self.aces,
            ScaleKind::SocialSupport => &mut self.social_support,
            ScaleKind::Pss => &mut self.pss,
            ScaleKind::Pearls => &mut self.pearls,
        }
    }

    pub fn raw(&self, kind: ScaleKind) -> Option<i64> {
        match kind {
            ScaleKind::Phq9 => self.phq9,
            ScaleKind::Aces => self.aces,
            ScaleKind::SocialSupport => self.social_support,
            ScaleKind::Pss => self.pss,
            ScaleKind::Pearls => self.pearls,
        }
    }

    /// Sets a score after range-checking it.
    pub fn set(&mut self, kind: ScaleKind, value: i64) -> Result<()> {
        ScaleScore::new(kind, value)?;
        *self.slot(kind) = Some(value);
        Ok(())
    }

    pub fn score(&self, kind: ScaleKind) -> Option<ScaleScore> {
        self.raw(kind).map(|v| {
            ScaleScore::new(kind, v).expect("scores are range-checked on insertion")
        })
    }
}

pub type ScoreKey = (String, VisitMonth);

/// Parsed score table keyed by (mother, visit).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: BTreeMap<ScoreKey, ScoreTableRow>,
    /// Scale columns that appeared in the header.
    pub columns: Vec<ScaleKind>,
}

impl ScoreTable {
    pub fn get(&self, mother_id: &str, visit_month: VisitMonth) -> Option<&ScoreTableRow> {
        self.rows.get(&(mother_id.to_string(), visit_month))
    }

    pub fn score(&self, mother_id: &str, visit_month: VisitMonth, kind: ScaleKind) -> Option<ScaleScore> {
        self.get(mother_id, visit_month).and_then(|r| r.score(kind))
    }

    pub fn has_scale(&self, kind: ScaleKind) -> bool {
        self.columns.contains(&kind)
    }

    pub fn insert(&mut self, row: ScoreTableRow) -> Result<()> {
        let key = (row.mother_id.clone(), row.visit_month);
        if self.rows.contains_key(&key) {
            return Err(Error::DuplicateKey {
                mother_id: row.mother_id,
                visit_month: row.visit_month.months(),
            });
        }
        self.rows.insert(key, row);
        Ok(())
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(input)
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: "<stream>".into(),
            source: std::io::Error::other(err.to_string()),
        },
        _ => Error::Parse {
            line,
            message: err.to_string(),
        },
    }
}

struct Header {
    names: Vec<String>,
}

impl Header {
    fn read<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Self> {
        let names = rdr
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        Ok(Self { names })
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.find(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn cell(record: &csv::StringRecord, col: usize, line: usize) -> Result<&str> {
    record.get(col).ok_or_else(|| Error::Parse {
        line,
        message: format!("row has no column {}", col + 1),
    })
}

fn number(record: &csv::StringRecord, col: usize, name: &str, line: usize) -> Result<f64> {
    let raw = cell(record, col, line)?;
    let v: f64 = raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("`{name}` value `{raw}` is not numeric"),
    })?;
    if !v.is_finite() {
        return Err(Error::Validation {
            line,
            message: format!("`{name}` value `{raw}` is not finite"),
        });
    }
    Ok(v)
}

/// Parses one session's frame table.
///
/// Required columns are `frame`, `timestamp`, `confidence`, `AU12_r` and
/// `x_<i>`/`y_<i>` for every configured landmark. Other columns are ignored.
pub fn parse_frame_table<R: Read>(
    input: R,
    landmarks: &LandmarkConfig,
    info: SessionInfo,
) -> Result<FrameSeries> {
    if !(info.fps_nominal > 0.0) {
        return Err(Error::Config("fps_nominal must be positive".into()));
    }
    let mut rdr = reader(input);
    let header = Header::read(&mut rdr)?;
    let c_frame = header.require("frame")?;
    let c_ts = header.require("timestamp")?;
    let c_conf = header.require("confidence")?;
    let c_au = header.require("AU12_r")?;
    let mut c_points = Vec::new();
    for idx in landmarks.indices() {
        let cx = header.require(&format!("x_{idx}"))?;
        let cy = header.require(&format!("y_{idx}"))?;
        c_points.push((idx, cx, cy));
    }

    let mut frames: Vec<FrameRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        let raw_frame = cell(&rec, c_frame, line)?;
        let frame_index: u64 = raw_frame.parse().map_err(|_| Error::Parse {
            line,
            message: format!("`frame` value `{raw_frame}` is not a positive integer"),
        })?;
        if frame_index < 1 {
            return Err(Error::Validation {
                line,
                message: "`frame` must be >= 1".into(),
            });
        }
        let timestamp = number(&rec, c_ts, "timestamp", line)?;
        let confidence = number(&rec, c_conf, "confidence", line)?;
        let au12 = number(&rec, c_au, "AU12_r", line)?;
        if timestamp < 0.0 {
            return Err(Error::Validation {
                line,
                message: format!("timestamp {timestamp} is negative"),
            });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Validation {
                line,
                message: format!("confidence {confidence} is outside [0, 1]"),
            });
        }
        if !(0.0..=5.0).contains(&au12) {
            return Err(Error::Validation {
                line,
                message: format!("AU12 intensity {au12} is outside [0, 5]"),
            });
        }
        if let Some(prev) = frames.last() {
            if timestamp <= prev.timestamp {
                return Err(Error::Validation {
                    line,
                    message: format!(
                        "timestamp {timestamp} does not increase (previous {})",
                        prev.timestamp
                    ),
                });
            }
            if frame_index <= prev.frame_index {
                return Err(Error::Validation {
                    line,
                    message: format!("frame {frame_index} is out of order"),
                });
            }
        }
        let mut points = BTreeMap::new();
        for &(idx, cx, cy) in &c_points {
            let x = number(&rec, cx, &format!("x_{idx}"), line)?;
            let y = number(&rec, cy, &format!("y_{idx}"), line)?;
            points.insert(idx, Point::new(x, y));
        }
        frames.push(FrameRecord {
            frame_index,
            timestamp,
            confidence,
            au12,
            points,
        });
    }
    if frames.is_empty() {
        return Err(Error::Validation {
            line: 1,
            message: "frame table has no data rows".into(),
        });
    }
    Ok(FrameSeries {
        session_id: info.session_id,
        mother_id: info.mother_id,
        visit_month: info.visit_month,
        frames,
        fps_nominal: info.fps_nominal,
    })
}

/// Writes a series in the frame-table format accepted by [`parse_frame_table`].
pub fn write_frame_table<W: Write>(series: &FrameSeries, out: W) -> Result<()> {
    let indices: Vec<usize> = series
        .frames
        .first()
        .map(|f| f.points.keys().copied().collect())
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "frame".to_string(),
        "timestamp".into(),
        "confidence".into(),
        "AU12_r".into(),
    ];
    header.extend(indices.iter().map(|i| format!("x_{i}")));
    header.extend(indices.iter().map(|i| format!("y_{i}")));
    w.write_record(&header).map_err(csv_error)?;
    for f in &series.frames {
        let mut row = vec![
            f.frame_index.to_string(),
            f.timestamp.to_string(),
            f.confidence.to_string(),
            f.au12.to_string(),
        ];
        row.extend(indices.iter().map(|i| f.points[i].x.to_string()));
        row.extend(indices.iter().map(|i| f.points[i].y.to_string()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<stream>".into(),
        source: e,
    })
}

/// Parses `start_s,end_s` rows, drops blips of 10 ms or less, and merges
/// overlapping intervals. The result is sorted and disjoint.
pub fn parse_speech_intervals<R: Read>(input: R) -> Result<Vec<SpeechInterval>> {
    let mut rdr = reader(input);
    let header = Header::read(&mut rdr)?;
    let c_start = header.require("start_s")?;
    let c_end = header.require("end_s")?;
    let mut raw = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        let start = number(&rec, c_start, "start_s", line)?;
        let end = number(&rec, c_end, "end_s", line)?;
        if start < 0.0 || end <= start {
            return Err(Error::Validation {
                line,
                message: format!("speech interval ({start}, {end}) needs 0 <= start < end"),
            });
        }
        raw.push(SpeechInterval { start, end });
    }
    Ok(normalize_speech(raw))
}

/// Filtering and merging step of [`parse_speech_intervals`].
pub fn normalize_speech(mut intervals: Vec<SpeechInterval>) -> Vec<SpeechInterval> {
    intervals.retain(|s| s.duration() > MIN_SPEECH_DURATION + DURATION_SLACK);
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let mut merged: Vec<SpeechInterval> = Vec::with_capacity(intervals.len());
    for s in intervals {
        match merged.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => merged.push(s),
        }
    }
    merged
}

pub fn write_speech_intervals<W: Write>(intervals: &[SpeechInterval], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_s", "end_s"]).map_err(csv_error)?;
    for s in intervals {
        w.write_record([s.start.to_string(), s.end.to_string()])
            .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<stream>".into(),
        source: e,
    })
}

/// Parses `mother_id,visit_month,<scale columns...>`.
///
/// Identifier columns are mandatory. A scale column may be absent (the scale
/// is then unavailable for analysis) and a cell may be empty (score missing
/// for that visit); every present score is range-checked.
pub fn parse_score_table<R: Read>(input: R) -> Result<ScoreTable> {
    let mut rdr = reader(input);
    let header = Header::read(&mut rdr)?;
    let c_mother = header.require("mother_id")?;
    let c_visit = header.require("visit_month")?;
    let scale_cols: Vec<(ScaleKind, usize)> = ScaleKind::ALL
        .iter()
        .filter_map(|&k| header.find(k.column()).map(|c| (k, c)))
        .collect();
    let mut table = ScoreTable {
        rows: BTreeMap::new(),
        columns: scale_cols.iter().map(|&(k, _)| k).collect(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        let mother_id = cell(&rec, c_mother, line)?;
        if mother_id.is_empty() {
            return Err(Error::Validation {
                line,
                message: "empty mother_id".into(),
            });
        }
        let visit_raw = cell(&rec, c_visit, line)?;
        let visit = visit_raw
            .parse::<u32>()
            .map_err(|_| Error::Parse {
                line,
                message: format!("`visit_month` value `{visit_raw}` is not an integer"),
            })
            .and_then(|m| {
                VisitMonth::try_from(m).map_err(|_| Error::Validation {
                    line,
                    message: format!("visit_month {m} is not 6 or 12"),
                })
            })?;
        let mut row = ScoreTableRow::new(mother_id, visit);
        for &(kind, col) in &scale_cols {
            if cell(&rec, col, line)?.is_empty() {
                continue;
            }
            let v = number(&rec, col, kind.column(), line)?;
            if v.fract() != 0.0 {
                return Err(Error::Validation {
                    line,
                    message: format!("{} score {v} is not an integer", kind.display_name()),
                });
            }
            let v = v as i64;
            row.set(kind, v).map_err(|_| {
                let (min, max) = kind.range();
                Error::ScoreRange {
                    scale: kind.display_name(),
                    value: v,
                    min,
                    max,
                    line,
                }
            })?;
        }
        table.insert(row)?;
    }
    Ok(table)
}

pub fn write_score_table<W: Write>(table: &ScoreTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["mother_id".to_string(), "visit_month".into()];
    header.extend(table.columns.iter().map(|k| k.column().to_string()));
    w.write_record(&header).map_err(csv_error)?;
    for row in table.rows.values() {
        let mut rec = vec![row.mother_id.clone(), row.visit_month.to_string()];
        rec.extend(
            table
                .columns
                .iter()
                .map(|&k| row.raw(k).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<stream>".into(),
        source: e,
    })
}

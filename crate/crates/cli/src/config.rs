//! Run configuration: defaults, a flat `key = value` file, then CLI flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use smilekit_core::model::{EPOCH_GRID, WINDOW_GRID};
use smilekit_core::{Error, Result, ScaleKind, SegmentationConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub frames_dir: Option<PathBuf>,
    pub speech_dir: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub alpha: f64,
    /// Nominal frame rate recorded with each session; timestamps come from the data.
    pub fps: f64,
    pub segmentation: SegmentationConfig,
    /// `None` means every scale present in the score table.
    pub scales: Option<Vec<ScaleKind>>,
    pub by_visit: bool,
    pub windows: Vec<usize>,
    pub epochs: Vec<usize>,
    /// Number of training seeds derived from `seed`.
    pub seeds: usize,
    pub folds: usize,
    pub with_position: bool,
    pub clamp: bool,
    pub sessions: usize,
    pub spec: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frames_dir: None,
            speech_dir: None,
            features: None,
            scores: None,
            out: PathBuf::from("out"),
            seed: 0,
            alpha: 0.05,
            fps: 30.0,
            segmentation: SegmentationConfig::default(),
            scales: None,
            by_visit: false,
            windows: WINDOW_GRID.to_vec(),
            epochs: EPOCH_GRID.to_vec(),
            seeds: 5,
            folds: 5,
            with_position: false,
            clamp: false,
            sessions: 10,
            spec: None,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::Config(format!("invalid value `{value}` for `{key}`"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| bad(key, s)))
        .collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let seg = &mut self.segmentation;
        match key {
            "frames_dir" => self.frames_dir = Some(value.into()),
            "speech_dir" => self.speech_dir = Some(value.into()),
            "features" => self.features = Some(value.into()),
            "scores" => self.scores = Some(value.into()),
            "out" => self.out = value.into(),
            "seed" => self.seed = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "fps" => self.fps = num(key, value)?,
            "confidence_min" => seg.confidence_min = num(key, value)?,
            "au12_threshold" => seg.au12_threshold = num(key, value)?,
            "au12_min_hits" => seg.au12_min_hits = num(key, value)?,
            "au12_hit_window" => seg.au12_hit_window = num(key, value)?,
            "monotone_epsilon" => seg.monotone_epsilon = num(key, value)?,
            "episode_gap_max" => seg.episode_gap_max = num(key, value)?,
            "landmark_left_lip" => seg.landmarks.left_lip = num(key, value)?,
            "landmark_right_lip" => seg.landmarks.right_lip = num(key, value)?,
            "landmark_nostril" => seg.landmarks.nostril = num(key, value)?,
            "scales" => self.scales = Some(parse_list(key, value)?),
            "by_visit" => self.by_visit = flag(key, value)?,
            "windows" => self.windows = parse_list(key, value)?,
            "epochs" => self.epochs = parse_list(key, value)?,
            "seeds" => self.seeds = num(key, value)?,
            "folds" => self.folds = num(key, value)?,
            "with_position" => self.with_position = flag(key, value)?,
            "clamp" => self.clamp = flag(key, value)?,
            "sessions" => self.sessions = num(key, value)?,
            "spec" => self.spec = Some(value.into()),
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Reads a flat config: one `key = value` per line, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Validation {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(message) => Error::Validation { line: i + 1, message },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Config("fps must be positive".into()));
        }
        if self.windows.is_empty() || self.windows.contains(&0) {
            return Err(Error::Config("windows must be a non-empty list of sizes >= 1".into()));
        }
        if self.epochs.is_empty() {
            return Err(Error::Config("epochs must be a non-empty list".into()));
        }
        if self.seeds == 0 || self.folds < 2 {
            return Err(Error::Config("need seeds >= 1 and folds >= 2".into()));
        }
        Ok(())
    }
}

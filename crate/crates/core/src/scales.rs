//! Maternal questionnaire scales, their score ranges and clinical categories.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label returned for scales that have no published category boundaries.
pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    Phq9,
    Aces,
    SocialSupport,
    Pss,
    Pearls,
}

/// One inclusive category band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Category {
    pub label: &'static str,
    pub min: i64,
    pub max: i64,
}

const fn band(label: &'static str, min: i64, max: i64) -> Category {
    Category { label, min, max }
}

const PHQ9_CATEGORIES: [Category; 5] = [
    band("Minimal", 0, 4),
    band("Mild", 5, 9),
    band("Moderate", 10, 14),
    band("Moderately Severe", 15, 19),
    band("Severe", 20, 27),
];

const ACES_CATEGORIES: [Category; 3] = [
    band("Low Risk", 0, 0),
    band("Intermediate Risk", 1, 3),
    band("High Risk", 4, 10),
];

const PSS_CATEGORIES: [Category; 3] = [
    band("Low", 0, 13),
    band("Moderate", 14, 26),
    band("High", 27, 40),
];

impl ScaleKind {
    pub const ALL: [ScaleKind; 5] = [
        ScaleKind::Phq9,
        ScaleKind::Aces,
        ScaleKind::SocialSupport,
        ScaleKind::Pss,
        ScaleKind::Pearls,
    ];

    /// Inclusive score bounds.
    pub const fn range(self) -> (i64, i64) {
        match self {
            ScaleKind::Phq9 => (0, 27),
            ScaleKind::Aces => (0, 10),
            ScaleKind::SocialSupport => (0, 100),
            ScaleKind::Pss => (0, 40),
            ScaleKind::Pearls => (0, 10),
        }
    }

    /// Categories in increasing severity. Empty for uncategorized scales.
    pub fn categories(self) -> &'static [Category] {
        match self {
            ScaleKind::Phq9 => &PHQ9_CATEGORIES,
            ScaleKind::Aces => &ACES_CATEGORIES,
            ScaleKind::Pss => &PSS_CATEGORIES,
            ScaleKind::SocialSupport | ScaleKind::Pearls => &[],
        }
    }

    pub fn is_categorized(self) -> bool {
        !self.categories().is_empty()
    }

    /// Column name used in score tables and CLI flags.
    pub const fn column(self) -> &'static str {
        match self {
            ScaleKind::Phq9 => "phq9",
            ScaleKind::Aces => "aces",
            ScaleKind::SocialSupport => "social_support",
            ScaleKind::Pss => "pss",
            ScaleKind::Pearls => "pearls",
        }
    }

    pub const fn display_name(self) -> &'static str {
        match self {
            ScaleKind::Phq9 => "PHQ-9",
            ScaleKind::Aces => "ACES",
            ScaleKind::SocialSupport => "Social Support",
            ScaleKind::Pss => "PSS",
            ScaleKind::Pearls => "PEARLS",
        }
    }

    pub fn contains(self, value: i64) -> bool {
        let (lo, hi) = self.range();
        (lo..=hi).contains(&value)
    }
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for ScaleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let kind = match key.as_str() {
            "phq9" | "phq_9" | "phq" => ScaleKind::Phq9,
            "aces" => ScaleKind::Aces,
            "social_support" | "socialsupport" => ScaleKind::SocialSupport,
            "pss" => ScaleKind::Pss,
            "pearls" => ScaleKind::Pearls,
            _ => return Err(Error::Config(format!("unknown scale `{s}`"))),
        };
        Ok(kind)
    }
}

/// A validated questionnaire total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleScore {
    kind: ScaleKind,
    value: i64,
}

impl ScaleScore {
    pub fn new(kind: ScaleKind, value: i64) -> Result<Self> {
        if !kind.contains(value) {
            let (min, max) = kind.range();
            return Err(Error::ScoreRange {
                scale: kind.display_name(),
                value,
                min,
                max,
                line: 0,
            });
        }
        Ok(Self { kind, value })
    }

    /// Accepts only integral values; fractional totals are rejected, not rounded.
    pub fn from_f64(kind: ScaleKind, value: f64) -> Result<Self> {
        if !value.is_finite() || value.fract() != 0.0 {
            return Err(Error::Validation {
                line: 0,
                message: format!("{} score {value} is not an integer", kind.display_name()),
            });
        }
        Self::new(kind, value as i64)
    }

    pub fn kind(&self) -> ScaleKind {
        self.kind
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    /// Position of this score's category in severity order.
    pub fn severity(&self) -> Option<usize> {
        self.kind
            .categories()
            .iter()
            .position(|c| (c.min..=c.max).contains(&self.value))
    }
}

/// Category label for a score, or [`UNCATEGORIZED`] for scales without bands.
pub fn categorize(score: &ScaleScore) -> &'static str {
    match score.severity() {
        Some(i) => score.kind.categories()[i].label,
        None => UNCATEGORIZED,
    }
}

/// Checked variant that validates a raw value first.
pub fn categorize_value(kind: ScaleKind, value: i64) -> Result<&'static str> {
    Ok(categorize(&ScaleScore::new(kind, value)?))
}

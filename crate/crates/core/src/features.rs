//! Per-smile dynamics features and per-session feature tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::VisitMonth;
use crate::segmentation::Smile;

/// The eight smile-dynamics features, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    MaxOnsetSpeed,
    MaxOffsetSpeed,
    OnsetAmplitude,
    OffsetAmplitude,
    OnsetDuration,
    OffsetDuration,
    ApexDuration,
    TotalDuration,
}

impl Feature {
    pub const ALL: [Feature; 8] = [
        Feature::MaxOnsetSpeed,
        Feature::MaxOffsetSpeed,
        Feature::OnsetAmplitude,
        Feature::OffsetAmplitude,
        Feature::OnsetDuration,
        Feature::OffsetDuration,
        Feature::ApexDuration,
        Feature::TotalDuration,
    ];

    pub const fn column(self) -> &'static str {
        match self {
            Feature::MaxOnsetSpeed => "max_onset_speed",
            Feature::MaxOffsetSpeed => "max_offset_speed",
            Feature::OnsetAmplitude => "onset_amplitude",
            Feature::OffsetAmplitude => "offset_amplitude",
            Feature::OnsetDuration => "onset_duration",
            Feature::OffsetDuration => "offset_duration",
            Feature::ApexDuration => "apex_duration",
            Feature::TotalDuration => "total_duration",
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.column() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown feature `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SmileFeatures {
    /// r per second.
    pub max_onset_speed: f64,
    pub max_offset_speed: f64,
    pub onset_amplitude: f64,
    pub offset_amplitude: f64,
    /// Seconds.
    pub onset_duration: f64,
    pub offset_duration: f64,
    pub apex_duration: f64,
    pub total_duration: f64,
}

impl SmileFeatures {
    pub fn get(&self, f: Feature) -> f64 {
        self.to_array()[f.index()]
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.max_onset_speed,
            self.max_offset_speed,
            self.onset_amplitude,
            self.offset_amplitude,
            self.onset_duration,
            self.offset_duration,
            self.apex_duration,
            self.total_duration,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            max_onset_speed: a[0],
            max_offset_speed: a[1],
            onset_amplitude: a[2],
            offset_amplitude: a[3],
            onset_duration: a[4],
            offset_duration: a[5],
            apex_duration: a[6],
            total_duration: a[7],
        }
    }
}

fn phase(samples: Vec<(f64, f64)>, name: &str) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 2 {
        return Err(Error::MalformedSmile(format!(
            "{name} has {} sample(s), need at least 2",
            samples.len()
        )));
    }
    Ok(samples)
}

fn max_rate(samples: &[(f64, f64)], sign: f64) -> f64 {
    samples
        .windows(2)
        .map(|w| sign * (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Computes the eight features of one smile.
///
/// Amplitudes are endpoint differences of `r` over each phase and speeds are
/// the largest finite-difference slope between consecutive samples, using
/// the actual timestamps.
pub fn smile_features(s: &Smile) -> Result<SmileFeatures> {
    if !(s.onset_start < s.onset_end && s.onset_end <= s.offset_start && s.offset_start < s.offset_end)
    {
        return Err(Error::MalformedSmile("boundaries out of order".into()));
    }
    let onset = phase(s.onset_samples().collect(), "onset")?;
    let offset = phase(s.offset_samples().collect(), "offset")?;

    let onset_duration = s.onset_end - s.onset_start;
    let apex_duration = s.offset_start - s.onset_end;
    let offset_duration = s.offset_end - s.offset_start;
    Ok(SmileFeatures {
        max_onset_speed: max_rate(&onset, 1.0),
        max_offset_speed: max_rate(&offset, -1.0),
        onset_amplitude: onset[onset.len() - 1].1 - onset[0].1,
        offset_amplitude: offset[0].1 - offset[offset.len() - 1].1,
        onset_duration,
        offset_duration,
        apex_duration,
        total_duration: onset_duration + apex_duration + offset_duration,
    })
}

/// All smiles of one session, in ordinal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub mother_id: String,
    pub visit_month: VisitMonth,
    pub rows: Vec<(u32, SmileFeatures)>,
}

impl FeatureTable {
    pub fn count(&self) -> usize {
        self.rows.len()
    }

    /// Features of the k-th smile (1-based).
    pub fn smile(&self, ordinal: u32) -> Option<&SmileFeatures> {
        let i = ordinal.checked_sub(1)? as usize;
        self.rows.get(i).map(|(_, f)| f)
    }
}

pub fn session_features(
    mother_id: &str,
    visit_month: VisitMonth,
    smiles: &[Smile],
) -> Result<FeatureTable> {
    let rows = smiles
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((i as u32 + 1, smile_features(s)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        mother_id: mother_id.to_string(),
        visit_month,
        rows,
    })
}

/// Mean smile count over a set of session tables.
pub fn mean_smile_count(tables: &[FeatureTable]) -> Option<f64> {
    if tables.is_empty() {
        return None;
    }
    Some(tables.iter().map(|t| t.count() as f64).sum::<f64>() / tables.len() as f64)
}

const ID_COLUMNS: [&str; 3] = ["mother_id", "visit_month", "ordinal"];

/// Writes `features.csv`: identifiers, then the eight features in reporting order.
pub fn write_features_csv<W: Write>(tables: &[FeatureTable], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: "features.csv".into(),
        source: std::io::Error::other(e.to_string()),
    };
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = ID_COLUMNS
        .into_iter()
        .chain(Feature::ALL.iter().map(|f| f.column()))
        .collect();
    w.write_record(&header).map_err(io)?;
    for t in tables {
        for (ordinal, f) in &t.rows {
            let mut rec = vec![t.mother_id.clone(), t.visit_month.to_string(), ordinal.to_string()];
            rec.extend(f.to_array().iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: "features.csv".into(),
        source: e,
    })
}

/// Reads `features.csv` back into per-session tables, sorted by (mother, visit).
pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<FeatureTable>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let c_mother = col("mother_id")?;
    let c_visit = col("visit_month")?;
    let c_ord = col("ordinal")?;
    let c_feat = Feature::ALL
        .iter()
        .map(|f| col(f.column()))
        .collect::<Result<Vec<_>>>()?;

    let mut sessions: BTreeMap<(String, VisitMonth), Vec<(u32, SmileFeatures)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |c: usize| rec.get(c).unwrap_or("");
        let parse_err = |what: &str, raw: &str| Error::Parse {
            line,
            message: format!("`{what}` value `{raw}` is invalid"),
        };
        let visit: u32 = get(c_visit).parse().map_err(|_| parse_err("visit_month", get(c_visit)))?;
        let visit = VisitMonth::try_from(visit).map_err(|_| parse_err("visit_month", get(c_visit)))?;
        let ordinal: u32 = get(c_ord).parse().map_err(|_| parse_err("ordinal", get(c_ord)))?;
        let mut vals = [0.0; 8];
        for (k, &c) in c_feat.iter().enumerate() {
            let raw = get(c);
            vals[k] = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(Feature::ALL[k].column(), raw))?;
        }
        let rows = sessions.entry((get(c_mother).to_string(), visit)).or_default();
        if ordinal as usize != rows.len() + 1 {
            return Err(Error::Validation {
                line,
                message: format!("ordinal {ordinal} breaks the consecutive sequence"),
            });
        }
        rows.push((ordinal, SmileFeatures::from_array(vals)));
    }
    Ok(sessions
        .into_iter()
        .map(|((mother_id, visit_month), rows)| FeatureTable {
            mother_id,
            visit_month,
            rows,
        })
        .collect())
}

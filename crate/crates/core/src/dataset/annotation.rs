use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Noise,
    Whistle,
}

impl Label {
    pub fn is_whistle(self) -> bool {
        self == Label::Whistle
    }

    /// Class index used by the models: noise 0, whistle 1.
    pub fn index(self) -> usize {
        match self {
            Label::Noise => 0,
            Label::Whistle => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 1 {
            Label::Whistle
        } else {
            Label::Noise
        }
    }
}

/// One point of a traced time-frequency contour, serialized as `[t, f, i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct ContourPoint {
    pub t_s: f64,
    pub f_khz: f64,
    pub intensity_db: f64,
}

impl From<[f64; 3]> for ContourPoint {
    fn from([t_s, f_khz, intensity_db]: [f64; 3]) -> Self {
        Self { t_s, f_khz, intensity_db }
    }
}

impl From<ContourPoint> for [f64; 3] {
    fn from(p: ContourPoint) -> Self {
        [p.t_s, p.f_khz, p.intensity_db]
    }
}

/// A labeled interval inside a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    /// Filled from the enclosing manifest entry when omitted on disk.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub file_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<Vec<ContourPoint>>,
}

impl Annotation {
    pub fn new(file_id: impl Into<String>, start_s: f64, end_s: f64, label: Label) -> Self {
        Self {
            file_id: file_id.into(),
            start_s,
            end_s,
            label,
            contour: None,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |why: &str| DatasetError::InvalidAnnotation {
            file_id: self.file_id.clone(),
            detail: why.to_string(),
        };
        if !(self.start_s < self.end_s) {
            return Err(bad("start_s must precede end_s"));
        }
        if let Some(contour) = &self.contour {
            if contour.iter().any(|p| p.t_s < self.start_s || p.t_s > self.end_s) {
                return Err(bad("contour point outside the annotated interval"));
            }
            if contour.windows(2).any(|w| w[1].t_s < w[0].t_s) {
                return Err(bad("contour not sorted by time"));
            }
        }
        Ok(())
    }

    /// Length of the intersection with `[start_s, end_s]`.
    pub fn overlap_s(&self, start_s: f64, end_s: f64) -> f64 {
        (self.end_s.min(end_s) - self.start_s.max(start_s)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file_id: String,
    pub path: PathBuf,
    pub record_date: NaiveDate,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
}

/// Recordings with their annotations, one JSON object per line on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, DatasetError> {
        let mut m = Self { entries };
        m.normalize()?;
        Ok(m)
    }

    fn normalize(&mut self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for e in &mut self.entries {
            if !seen.insert(e.file_id.clone()) {
                return Err(DatasetError::DuplicateFileId(e.file_id.clone()));
            }
            for a in &mut e.annotations {
                if a.file_id.is_empty() {
                    a.file_id = e.file_id.clone();
                } else if a.file_id != e.file_id {
                    return Err(DatasetError::InvalidAnnotation {
                        file_id: e.file_id.clone(),
                        detail: format!("annotation names file {}", a.file_id),
                    });
                }
                a.validate()?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, DatasetError> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
                line: i + 1,
                detail: e.to_string(),
            })?;
            entries.push(entry);
        }
        Self::new(entries)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        for e in &self.entries {
            let mut e = e.clone();
            for a in &mut e.annotations {
                a.file_id.clear();
            }
            serde_json::to_writer(&mut out, &e).map_err(|e| DatasetError::Parse { line: 0, detail: e.to_string() })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.entries.iter().flat_map(|e| e.annotations.iter())
    }

    pub fn get(&self, file_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.file_id == file_id)
    }
}

//! JSON-lines manifests: one object per image,
//! `{"path": ..., "role": "eye" | "scenery", "points": [[x, y], ...], "boxes": [[x, y, w, h], ...]}`.
//!
//! Eye entries list two corner points per eye (`points`, consecutive pairs)
//! and/or one box per eye (`boxes`). Relative paths resolve against the
//! manifest's directory.

use super::layout::Point;
use crate::imaging::Rect;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Eye,
    Scenery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    path: String,
    role: Role,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    boxes: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// As written in the manifest.
    pub path: String,
    /// Resolved against the manifest directory.
    pub resolved: PathBuf,
    pub role: Role,
    pub points: Vec<Point>,
    pub boxes: Vec<Rect>,
}

impl ManifestEntry {
    pub fn eye(path: impl Into<String>, points: Vec<Point>, boxes: Vec<Rect>) -> Self {
        let path = path.into();
        Self {
            resolved: PathBuf::from(&path),
            path,
            role: Role::Eye,
            points,
            boxes,
        }
    }

    pub fn scenery(path: impl Into<String>) -> Self {
        let path = path.into();
        Self {
            resolved: PathBuf::from(&path),
            path,
            role: Role::Scenery,
            points: Vec::new(),
            boxes: Vec::new(),
        }
    }

    /// Corner-point pair for each annotated eye; falls back to the left and
    /// right edge midpoints of each box.
    pub fn eye_point_pairs(&self) -> Vec<[Point; 2]> {
        if !self.points.is_empty() {
            self.points.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
        } else {
            self.boxes.iter().map(|b| b.edge_midpoints()).collect()
        }
    }

    pub fn to_json_line(&self) -> String {
        let raw = RawEntry {
            path: self.path.clone(),
            role: self.role,
            points: self.points.iter().map(|p| [p.0, p.1]).collect(),
            boxes: self.boxes.iter().map(|b| b.to_array()).collect(),
        };
        serde_json::to_string(&raw).expect("manifest entry serialises")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn eyes(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.role == Role::Eye)
    }

    pub fn scenery(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.role == Role::Scenery)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        parse_manifest(&text, path.parent())
    }
}

fn validate(raw: &RawEntry, line: usize) -> Result<()> {
    let err = |message: String| Error::Manifest { line, message };
    if raw.path.is_empty() {
        return Err(err("empty path".into()));
    }
    if raw.points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(err("non-finite point coordinate".into()));
    }
    if raw.boxes.iter().any(|b| b[2] == 0 || b[3] == 0) {
        return Err(err("box with zero width or height".into()));
    }
    match raw.role {
        Role::Scenery => {
            if !raw.points.is_empty() || !raw.boxes.is_empty() {
                return Err(err("scenery entries must not carry eye annotations".into()));
            }
        }
        Role::Eye => {
            if raw.points.is_empty() && raw.boxes.is_empty() {
                return Err(err("eye entry without points or boxes".into()));
            }
            if !raw.points.len().is_multiple_of(2) {
                return Err(err(format!(
                    "expected corner points in pairs, got {}",
                    raw.points.len()
                )));
            }
            if !raw.points.is_empty() && !raw.boxes.is_empty() && raw.points.len() / 2 != raw.boxes.len() {
                return Err(err(format!(
                    "{} point pairs but {} boxes",
                    raw.points.len() / 2,
                    raw.boxes.len()
                )));
            }
        }
    }
    Ok(())
}

/// Parse manifest text; blank lines are skipped, line numbers start at 1.
pub fn parse_manifest(text: &str, base_dir: Option<&Path>) -> Result<Manifest> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawEntry = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: line_no,
            message: e.to_string(),
        })?;
        validate(&raw, line_no)?;
        let resolved = match base_dir {
            Some(dir) if Path::new(&raw.path).is_relative() => dir.join(&raw.path),
            _ => PathBuf::from(&raw.path),
        };
        entries.push(ManifestEntry {
            path: raw.path,
            resolved,
            role: raw.role,
            points: raw.points.into_iter().map(|[x, y]| (x, y)).collect(),
            boxes: raw
                .boxes
                .into_iter()
                .map(|[x, y, w, h]| Rect::new(x, y, w, h))
                .collect(),
        });
    }
    if entries.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    Ok(Manifest { entries })
}

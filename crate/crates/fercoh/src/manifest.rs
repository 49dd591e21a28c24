//! JSON-lines frame manifests.
//!
//! One record per line:
//!
//! ```json
//! {"video_id": "anger-000", "t": 1, "image": "frames/anger-000/001.png",
//!  "landmarks": "landmarks/anger-000/001.csv", "video_label": "anger"}
//! ```
//!
//! `landmarks` is either a relative CSV path (68 rows of `x,y`) or an inline
//! `[[x, y], ...]` array. Paths are relative to the manifest's directory.
//! A video with one frame is a still image; its label may be `neutral`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fercoh_core::dataset::{Emotion, FrameRecord, VideoSequence};
use fercoh_core::repr::{GrayImage, Landmarks68};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::imageio::{read_gray, write_png};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LandmarkSource {
    Inline(Vec<Vec<f64>>),
    File(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub video_id: String,
    pub t: usize,
    pub image: String,
    pub landmarks: LandmarkSource,
    pub video_label: Option<String>,
}

fn points_from_rows(rows: &[Vec<f64>]) -> std::result::Result<Vec<(f64, f64)>, String> {
    if rows.len() != Landmarks68::COUNT {
        return Err(format!("{} landmark rows, expected 68", rows.len()));
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [x, y] => Ok((*x, *y)),
            _ => Err(format!("landmark row {} has {} values, expected 2", i + 1, r.len())),
        })
        .collect()
}

/// Reads a landmark CSV: 68 rows of `x,y`, optionally preceded by an `x,y`
/// header.
pub fn read_landmark_csv(path: &Path) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        if i == 0 && rec.iter().eq(["x", "y"]) {
            continue;
        }
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| format!("{}: line {} is not numeric", path.display(), i + 1))?;
        rows.push(row);
    }
    Ok(rows)
}

fn write_landmark_csv(path: &Path, lm: &Landmarks68) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    for &(x, y) in lm.points() {
        w.write_record([x.to_string(), y.to_string()])
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Loads and validates every record. Any problem rejects the whole manifest;
/// the error lists each one.
pub fn load_manifest(path: &Path) -> Result<Vec<VideoSequence>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut issues: Vec<String> = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<(usize, ManifestRecord)>> = BTreeMap::new();

    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ManifestRecord>(line) {
            Ok(rec) => {
                if !groups.contains_key(&rec.video_id) {
                    order.push(rec.video_id.clone());
                }
                groups.entry(rec.video_id.clone()).or_default().push((n + 1, rec));
            }
            Err(e) => issues.push(format!("line {}: {e}", n + 1)),
        }
    }
    if order.is_empty() && issues.is_empty() {
        issues.push("manifest has no records".into());
    }

    let mut videos = Vec::new();
    for id in order {
        let mut recs = groups.remove(&id).expect("grouped above");
        recs.sort_by_key(|(_, r)| r.t);
        let labels: Vec<&Option<String>> = recs.iter().map(|(_, r)| &r.video_label).collect();
        if labels.windows(2).any(|w| w[0] != w[1]) {
            issues.push(format!("{id}: records disagree on the video label"));
            continue;
        }
        let label = match labels[0].as_deref().map(Emotion::from_name).transpose() {
            Ok(l) => l,
            Err(e) => {
                issues.push(format!("{id}: {e}"));
                continue;
            }
        };
        let still = recs.len() == 1;
        let mut frames = Vec::with_capacity(recs.len());
        for (k, (line, rec)) in recs.iter().enumerate() {
            let key = format!("{id}#{} (line {line})", rec.t);
            if rec.t != k + 1 {
                issues.push(format!("{key}: time index {} where {} was expected", rec.t, k + 1));
                continue;
            }
            let rows = match &rec.landmarks {
                LandmarkSource::Inline(rows) => Ok(rows.clone()),
                LandmarkSource::File(f) => read_landmark_csv(&base.join(f)),
            };
            let landmarks = rows
                .and_then(|r| points_from_rows(&r))
                .and_then(|p| Landmarks68::new(p).map_err(|e| e.to_string()));
            let image = read_gray(&base.join(&rec.image));
            match (image, landmarks) {
                (Ok(image), Ok(landmarks)) => {
                    let inside = landmarks.points().iter().all(|&(x, y)| {
                        (0.0..=image.width as f64).contains(&x) && (0.0..=image.height as f64).contains(&y)
                    });
                    if !inside {
                        issues.push(format!("{key}: landmarks fall outside the image"));
                    }
                    frames.push(FrameRecord {
                        video_id: id.clone(),
                        t: rec.t,
                        image,
                        landmarks,
                        label: if still { label } else { None },
                    });
                }
                (image, landmarks) => {
                    if let Err(e) = image {
                        issues.push(format!("{key}: {e}"));
                    }
                    if let Err(e) = landmarks {
                        issues.push(format!("{key}: {e}"));
                    }
                }
            }
        }
        if frames.len() == recs.len() {
            match VideoSequence::new(id.clone(), frames, label) {
                Ok(v) => videos.push(v),
                Err(fercoh_core::Error::Validation(v)) => issues.extend(v),
                Err(e) => issues.push(format!("{id}: {e}")),
            }
        }
    }
    if !issues.is_empty() {
        return Err(CliError::Core(fercoh_core::Error::Validation(issues)));
    }
    Ok(videos)
}

/// Writes frames as PNG, landmarks as CSV and a manifest referencing them.
/// Returns the manifest path.
pub fn write_corpus(dir: &Path, videos: &[VideoSequence]) -> Result<PathBuf> {
    let manifest = dir.join("manifest.jsonl");
    let mut lines = Vec::new();
    for v in videos {
        let fdir = dir.join("frames").join(&v.id);
        let ldir = dir.join("landmarks").join(&v.id);
        fs::create_dir_all(&fdir).map_err(|e| CliError::io(&fdir, e))?;
        fs::create_dir_all(&ldir).map_err(|e| CliError::io(&ldir, e))?;
        for f in &v.frames {
            let image = format!("frames/{}/{:03}.png", v.id, f.t);
            let landmarks = format!("landmarks/{}/{:03}.csv", v.id, f.t);
            write_png(&dir.join(&image), &f.image)?;
            write_landmark_csv(&dir.join(&landmarks), &f.landmarks)?;
            let rec = ManifestRecord {
                video_id: v.id.clone(),
                t: f.t,
                image,
                landmarks: LandmarkSource::File(landmarks),
                video_label: v.label.map(|l| l.name().to_string()),
            };
            lines.push(serde_json::to_string(&rec).expect("plain record"));
        }
    }
    let mut out = fs::File::create(&manifest).map_err(|e| CliError::io(&manifest, e))?;
    for l in lines {
        writeln!(out, "{l}").map_err(|e| CliError::io(&manifest, e))?;
    }
    Ok(manifest)
}

/// Helper for callers that already hold pixels and points.
pub fn still(id: &str, image: GrayImage, landmarks: Landmarks68, label: Emotion) -> Result<VideoSequence> {
    let frame = FrameRecord {
        video_id: id.to_string(),
        t: 1,
        image,
        landmarks,
        label: Some(label),
    };
    Ok(VideoSequence::new(id.to_string(), vec![frame], Some(label))?)
}

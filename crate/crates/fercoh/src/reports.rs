//! CSV report files.

use std::path::Path;

use fercoh_core::dataset::Emotion;
use fercoh_core::eval::{Classifier, MeanStd, OcclusionRow, SummaryRow};
use fercoh_core::loss::LossBreakdown;
use fercoh_core::repr::{Kind, Part};
use fercoh_core::train::{EpochLog, StepLog};

use crate::error::{CliError, Result};

pub struct CsvFile {
    path: std::path::PathBuf,
    w: csv::Writer<std::fs::File>,
}

impl CsvFile {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut f = CsvFile {
            path: path.to_path_buf(),
            w,
        };
        f.row(header.iter().map(|s| s.to_string()))?;
        Ok(f)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.w.write_record(&fields).map_err(|e| csv_err(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn mean(x: &Option<MeanStd>) -> String {
    opt(x.map(|m| m.mean))
}

fn std(x: &Option<MeanStd>) -> String {
    opt(x.map(|m| m.std))
}

pub const STEP_HEADER: [&str; 13] = [
    "step",
    "epoch",
    "ce_app",
    "ce_shape",
    "temporal_app",
    "temporal_shape",
    "part_app",
    "part_shape",
    "app_shape",
    "total",
    "lambda_t",
    "lambda_c",
    "lambda_r",
];

pub fn step_fields(s: &StepLog) -> Vec<String> {
    let mut v = vec![s.step.to_string(), s.epoch.to_string()];
    v.extend(s.breakdown.terms().iter().map(|&x| num(x)));
    v.push(num(s.breakdown.total));
    v.extend([s.weights.lambda_t, s.weights.lambda_c, s.weights.lambda_r].map(num));
    v
}

/// Writes the step and epoch logs of a training run.
pub fn write_train_logs(dir: &Path, steps: &[StepLog], epochs: &[EpochLog]) -> Result<()> {
    debug_assert_eq!(&STEP_HEADER[2..9], &LossBreakdown::TERM_NAMES);
    let mut f = CsvFile::create(&dir.join("train_log.csv"), &STEP_HEADER)?;
    for s in steps {
        f.row(step_fields(s))?;
    }
    f.finish()?;
    let mut f = CsvFile::create(
        &dir.join("epochs.csv"),
        &["epoch", "mean_loss", "val_micro", "val_macro", "improved"],
    )?;
    for e in epochs {
        f.row([
            e.epoch.to_string(),
            num(e.mean_loss),
            num(e.val_micro),
            num(e.val_macro),
            e.improved.to_string(),
        ])?;
    }
    f.finish()
}

const SUMMARY_HEADER: [&str; 10] = [
    "classifier",
    "image_micro",
    "image_micro_std",
    "image_macro",
    "image_macro_std",
    "video_micro",
    "video_micro_std",
    "video_macro",
    "video_macro_std",
    "runs",
];

fn summary_fields(r: &SummaryRow) -> Vec<String> {
    vec![
        r.classifier.label(),
        mean(&r.image_micro),
        std(&r.image_micro),
        mean(&r.image_macro),
        std(&r.image_macro),
        mean(&r.video_micro),
        std(&r.video_micro),
        mean(&r.video_macro),
        std(&r.video_macro),
        r.image_micro.map(|m| m.n).unwrap_or(0).to_string(),
    ]
}

fn is_face(c: Classifier) -> bool {
    match c {
        Classifier::Network(id) => id.part == Part::Face,
        Classifier::Ensemble => true,
    }
}

/// Micro/macro tables: full-face classifiers with the ensemble, then the
/// part classifiers.
pub fn write_accuracy_tables(dir: &Path, rows: &[SummaryRow]) -> Result<()> {
    for (name, face) in [("table1.csv", true), ("table2.csv", false)] {
        let mut f = CsvFile::create(&dir.join(name), &SUMMARY_HEADER)?;
        for r in rows.iter().filter(|r| is_face(r.classifier) == face) {
            f.row(summary_fields(r))?;
        }
        f.finish()?;
    }
    Ok(())
}

/// Per-class accuracies, one row per classifier, level and class. Video
/// level has no neutral row.
pub fn write_per_class_table(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut f = CsvFile::create(path, &["classifier", "level", "class", "accuracy", "std", "runs"])?;
    for r in rows {
        for (level, per) in [("image", &r.image_per_class), ("video", &r.video_per_class)] {
            for e in Emotion::ALL {
                if level == "video" && e == Emotion::Neutral {
                    continue;
                }
                let m = &per[e.index()];
                f.row([
                    r.classifier.label(),
                    level.to_string(),
                    e.name().to_string(),
                    mean(m),
                    std(m),
                    m.map(|m| m.n).unwrap_or(0).to_string(),
                ])?;
            }
        }
    }
    f.finish()
}

/// Micro, macro and per-class accuracy of the face-appearance classifier in
/// one row per level.
pub fn write_face_app_table(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut header = vec!["level", "micro", "macro"];
    header.extend(Emotion::ALL.iter().map(|e| e.name()));
    let mut f = CsvFile::create(path, &header)?;
    let face_app = Classifier::Network(fercoh_core::repr::RepresentationId::new(Part::Face, Kind::Appearance));
    if let Some(r) = rows.iter().find(|r| r.classifier == face_app) {
        for (level, micro, macro_avg, per) in [
            ("image", &r.image_micro, &r.image_macro, &r.image_per_class),
            ("video", &r.video_micro, &r.video_macro, &r.video_per_class),
        ] {
            let mut v = vec![level.to_string(), mean(micro), mean(macro_avg)];
            v.extend(per.iter().map(mean));
            f.row(v)?;
        }
    }
    f.finish()
}

pub fn write_occlusion_table(path: &Path, rows: &[OcclusionRow]) -> Result<()> {
    let mut f = CsvFile::create(path, &["emotion", "covered_part", "acc_app", "acc_shape", "frames"])?;
    for r in rows {
        f.row([
            r.emotion.name().to_string(),
            r.part.map_or("none", |p| p.name()).to_string(),
            num(r.acc_app),
            num(r.acc_shape),
            r.frames.to_string(),
        ])?;
    }
    f.finish()
}

//! Frame and video decisions, accuracy reports, the occlusion study and
//! prediction timelines.

mod metrics;

pub use metrics::{
    flip_count, macro_accuracy, majority_vote, median, micro_accuracy, ConfusionMatrix, MeanStd,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dataset::{Emotion, FrameRecord, VideoSequence, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::loss::Probs;
use crate::model::{argmax, ensemble_mean, ModelPool};
use crate::repr::{
    apply_occlusion, crop_part, make_representation, render_shape_sketch_without, Kind, Part,
    RepresentationId,
};

/// A single network or the mean of several.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classifier {
    Network(RepresentationId),
    /// Mean distribution of the evaluated networks.
    Ensemble,
}

impl Classifier {
    pub fn label(&self) -> String {
        match self {
            Classifier::Network(id) => id.label(),
            Classifier::Ensemble => "avg-all".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "avg-all" {
            Some(Classifier::Ensemble)
        } else {
            RepresentationId::parse(s).map(Classifier::Network)
        }
    }
}

/// Distributions of `networks` on one frame, in the given order.
pub fn frame_distributions(
    pool: &ModelPool,
    frame: &FrameRecord,
    networks: &[RepresentationId],
) -> Result<Vec<Probs>> {
    let key = frame.key();
    networks
        .iter()
        .map(|&id| {
            let x = make_representation(
                &frame.image,
                &frame.landmarks,
                id,
                &pool.config.representation,
                &key,
            )?;
            Ok(pool.network(id).forward(&x)?.probs)
        })
        .collect()
}

/// Per-frame distributions of one classifier over a whole video.
pub fn video_distributions(
    pool: &ModelPool,
    video: &VideoSequence,
    classifier: Classifier,
) -> Result<Vec<Probs>> {
    let nets: Vec<RepresentationId> = match classifier {
        Classifier::Network(id) => alloc::vec![id],
        Classifier::Ensemble => RepresentationId::ALL.to_vec(),
    };
    video
        .frames
        .iter()
        .map(|f| Ok(mean_probs(&frame_distributions(pool, f, &nets)?)))
        .collect()
}

fn mean_probs(dists: &[Probs]) -> Probs {
    let wrapped: Vec<_> = dists
        .iter()
        .map(|p| crate::model::PredictionDistribution::new(None, *p))
        .collect();
    ensemble_mean(&wrapped).probs
}

/// Decision of one classifier over a window of frames.
pub fn predict_video(pool: &ModelPool, classifier: Classifier, frames: &[FrameRecord]) -> Result<Emotion> {
    let nets: Vec<RepresentationId> = match classifier {
        Classifier::Network(id) => alloc::vec![id],
        Classifier::Ensemble => RepresentationId::ALL.to_vec(),
    };
    let dists = frames
        .iter()
        .map(|f| Ok(mean_probs(&frame_distributions(pool, f, &nets)?)))
        .collect::<Result<Vec<_>>>()?;
    majority_vote(&dists)
}

/// Which classifiers [`evaluate`] reports.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub networks: Vec<RepresentationId>,
    /// Adds a row for the mean of `networks`.
    pub ensemble: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            networks: RepresentationId::ALL.to_vec(),
            ensemble: true,
        }
    }
}

/// Accuracies at one granularity.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelMetrics {
    pub micro: Option<f64>,
    pub macro_avg: Option<f64>,
    pub per_class: [Option<f64>; NUM_CLASSES],
    pub confusion: ConfusionMatrix,
}

impl LevelMetrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        LevelMetrics {
            micro: confusion.micro().ok(),
            macro_avg: confusion.macro_avg().ok(),
            per_class: confusion.per_class(),
            confusion,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierReport {
    pub classifier: Classifier,
    /// Labeled frames.
    pub image: LevelMetrics,
    /// Whole sequences with a non-neutral label, decided by majority vote.
    pub video: LevelMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ClassifierReport>,
    pub labeled_frames: usize,
    pub videos: usize,
}

impl EvalReport {
    pub fn row(&self, c: Classifier) -> Option<&ClassifierReport> {
        self.rows.iter().find(|r| r.classifier == c)
    }
}

/// Image-level metrics over labeled frames and video-level metrics over
/// sequences for every requested classifier. Neutral never counts at video
/// level; stills labeled neutral are skipped there.
pub fn evaluate(pool: &ModelPool, videos: &[VideoSequence], opts: &EvalOptions) -> Result<EvalReport> {
    if opts.networks.is_empty() {
        return Err(Error::config("no classifiers to evaluate"));
    }
    let mut classifiers: Vec<Classifier> = opts.networks.iter().map(|&id| Classifier::Network(id)).collect();
    if opts.ensemble {
        classifiers.push(Classifier::Ensemble);
    }
    let mut image = alloc::vec![ConfusionMatrix::default(); classifiers.len()];
    let mut video = alloc::vec![ConfusionMatrix::default(); classifiers.len()];
    let mut labeled_frames = 0;
    let mut counted_videos = 0;

    for v in videos {
        // per[c][t]
        let mut per: Vec<Vec<Probs>> = alloc::vec![Vec::with_capacity(v.len()); classifiers.len()];
        for f in &v.frames {
            let d = frame_distributions(pool, f, &opts.networks)?;
            for (k, p) in d.iter().enumerate() {
                per[k].push(*p);
            }
            if opts.ensemble {
                per[classifiers.len() - 1].push(mean_probs(&d));
            }
            if let Some(y) = f.label {
                labeled_frames += 1;
                for (k, m) in image.iter_mut().enumerate() {
                    let p = per[k].last().expect("just pushed");
                    m.add(y, Emotion::from_index(argmax(p)).expect("7 classes"));
                }
            }
        }
        if let Some(y) = v.label.filter(|&y| y != Emotion::Neutral) {
            counted_videos += 1;
            for (k, m) in video.iter_mut().enumerate() {
                m.add(y, majority_vote(&per[k])?);
            }
        }
    }
    let rows = classifiers
        .into_iter()
        .zip(image.into_iter().zip(video))
        .map(|(classifier, (i, v))| ClassifierReport {
            classifier,
            image: LevelMetrics::from_confusion(i),
            video: LevelMetrics::from_confusion(v),
        })
        .collect();
    Ok(EvalReport {
        rows,
        labeled_frames,
        videos: counted_videos,
    })
}

/// Mean and spread of one classifier's metrics across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub classifier: Classifier,
    pub image_micro: Option<MeanStd>,
    pub image_macro: Option<MeanStd>,
    pub video_micro: Option<MeanStd>,
    pub video_macro: Option<MeanStd>,
    pub image_per_class: [Option<MeanStd>; NUM_CLASSES],
    pub video_per_class: [Option<MeanStd>; NUM_CLASSES],
}

/// Aggregates reports of independent runs (seeds or partitions) row by row.
pub fn summarize(reports: &[EvalReport]) -> Result<Vec<SummaryRow>> {
    let first = reports.first().ok_or(Error::EmptyInput("no reports to summarize"))?;
    first
        .rows
        .iter()
        .map(|row| {
            let c = row.classifier;
            let rows = reports
                .iter()
                .map(|r| {
                    r.row(c)
                        .ok_or_else(|| Error::config(format!("{} missing from a report", c.label())))
                })
                .collect::<Result<Vec<_>>>()?;
            let stat = |f: &dyn Fn(&ClassifierReport) -> Option<f64>| {
                let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                MeanStd::of(&v)
            };
            Ok(SummaryRow {
                classifier: c,
                image_micro: stat(&|r| r.image.micro),
                image_macro: stat(&|r| r.image.macro_avg),
                video_micro: stat(&|r| r.video.micro),
                video_macro: stat(&|r| r.video.macro_avg),
                image_per_class: core::array::from_fn(|k| stat(&|r| r.image.per_class[k])),
                video_per_class: core::array::from_fn(|k| stat(&|r| r.video.per_class[k])),
            })
        })
        .collect()
}

/// How the face-shape input is formed for an occluded frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OcclusionShape {
    /// Landmarks of the unoccluded frame; the sketch is unchanged.
    #[default]
    ReuseLandmarks,
    /// The covered part's landmarks are treated as undetected.
    HideOccludedLandmarks,
}

/// Accuracy of the two face classifiers on one emotion with one part
/// covered (`part == None` for the unoccluded baseline).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OcclusionRow {
    pub emotion: Emotion,
    pub part: Option<Part>,
    pub acc_app: f64,
    pub acc_shape: f64,
    pub frames: usize,
}

/// The last (most expressive) frame of every labeled sequence, paired with
/// the sequence label.
pub fn peak_frames(videos: &[VideoSequence]) -> Vec<(&FrameRecord, Emotion)> {
    videos
        .iter()
        .filter_map(|v| Some((v.frames.last()?, v.label.or(v.frames.last()?.label)?)))
        .filter(|(_, y)| *y != Emotion::Neutral)
        .collect()
}

/// Face-appearance accuracy on frames with `parts` blacked out against
/// face-shape accuracy, per emotion. Each accuracy is over that emotion's
/// frames only. Baseline rows come first.
pub fn occlusion_experiment(
    pool: &ModelPool,
    peaks: &[(&FrameRecord, Emotion)],
    parts: &[Part],
    mode: OcclusionShape,
) -> Result<Vec<OcclusionRow>> {
    if peaks.is_empty() {
        return Err(Error::EmptyInput("no peak frames"));
    }
    let cfg = &pool.config.representation;
    let face = cfg.spec(Part::Face);
    let app_net = pool.network(RepresentationId::FACE_APP);
    let shape_net = pool.network(RepresentationId::FACE_SHAPE);
    let mut conditions: Vec<Option<Part>> = alloc::vec![None];
    conditions.extend(parts.iter().map(|&p| Some(p)));

    let mut rows = Vec::new();
    for cond in conditions {
        let mut app_hits = [0usize; NUM_CLASSES];
        let mut shape_hits = [0usize; NUM_CLASSES];
        let mut totals = [0usize; NUM_CLASSES];
        for (frame, y) in peaks {
            let key = frame.key();
            let image = match cond {
                Some(p) => apply_occlusion(&frame.image, &frame.landmarks, &cfg.spec(p))?,
                None => frame.image.clone(),
            };
            let x_app = crop_part(&image, &frame.landmarks, &face, &key)?;
            let x_shape = match (cond, mode) {
                (Some(p), OcclusionShape::HideOccludedLandmarks) => {
                    render_shape_sketch_without(&frame.landmarks, &face, p)
                }
                _ => make_representation(
                    &image,
                    &frame.landmarks,
                    RepresentationId::new(Part::Face, Kind::Shape),
                    cfg,
                    &key,
                )?,
            };
            let k = y.index();
            totals[k] += 1;
            if app_net.forward(&x_app)?.argmax() == *y {
                app_hits[k] += 1;
            }
            if shape_net.forward(&x_shape)?.argmax() == *y {
                shape_hits[k] += 1;
            }
        }
        for e in Emotion::ALL {
            let k = e.index();
            if totals[k] == 0 {
                continue;
            }
            rows.push(OcclusionRow {
                emotion: e,
                part: cond,
                acc_app: 100.0 * app_hits[k] as f64 / totals[k] as f64,
                acc_shape: 100.0 * shape_hits[k] as f64 / totals[k] as f64,
                frames: totals[k],
            });
        }
    }
    Ok(rows)
}

/// Frame decisions of one configuration along a video.
#[derive(Clone, Debug, PartialEq)]
pub struct TimelineTrack {
    pub name: String,
    pub decisions: Vec<Emotion>,
    pub flips: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimelineExport {
    pub video_id: String,
    pub video_label: Option<Emotion>,
    /// Per-frame ground truth where known.
    pub truth: Vec<Option<Emotion>>,
    pub tracks: Vec<TimelineTrack>,
}

/// Runs each named pool over `video` with the same classifier.
pub fn export_timeline(
    configs: &[(String, &ModelPool)],
    classifier: Classifier,
    video: &VideoSequence,
) -> Result<TimelineExport> {
    let tracks = configs
        .iter()
        .map(|(name, pool)| {
            let decisions: Vec<Emotion> = video_distributions(pool, video, classifier)?
                .iter()
                .map(|p| Emotion::from_index(argmax(p)).expect("7 classes"))
                .collect();
            Ok(TimelineTrack {
                name: name.clone(),
                flips: flip_count(&decisions),
                decisions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimelineExport {
        video_id: video.id.clone(),
        video_label: video.label,
        truth: video.frames.iter().map(|f| f.label).collect(),
        tracks,
    })
}

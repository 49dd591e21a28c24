//! Label segmentation and video-level splitting properties.

use std::collections::BTreeSet;

use fercoh_core::dataset::{
    assign_labels, generate_synthetic_corpus, segment_lengths, split_dataset, Emotion, FrameRecord,
    SemiSupervisedConfig, SplitConfig, SyntheticConfig, VideoSequence,
};
use fercoh_core::repr::{GrayImage, Landmarks68};
use proptest::prelude::*;

fn default_cfg() -> SemiSupervisedConfig {
    SemiSupervisedConfig::new(0.1, 0.7).unwrap()
}

#[test]
fn twenty_frames_split_two_twelve_six() {
    let s = segment_lengths(20, &default_cfg());
    assert_eq!((s.neutral, s.unlabeled, s.labeled), (2, 12, 6));
    let labels = assign_labels(20, Some(Emotion::Fear), &default_cfg());
    assert_eq!(labels.iter().filter(|l| **l == Some(Emotion::Neutral)).count(), 2);
    assert_eq!(labels.iter().filter(|l| l.is_none()).count(), 12);
    assert_eq!(labels.iter().filter(|l| **l == Some(Emotion::Fear)).count(), 6);
}

/// Length of the leading run of `l[start..]` satisfying `pred`.
fn run(l: &[Option<Emotion>], start: usize, pred: impl Fn(&Option<Emotion>) -> bool) -> usize {
    l[start..].iter().take_while(|x| pred(x)).count()
}

proptest! {
    #[test]
    fn default_segments_are_contiguous_and_exhaustive(n in 2usize..=60, class in 0usize..6) {
        let y = Emotion::EXPRESSIONS[class];
        let labels = assign_labels(n, Some(y), &default_cfg());
        prop_assert_eq!(labels.len(), n);
        let a = run(&labels, 0, |l| *l == Some(Emotion::Neutral));
        let b = run(&labels, a, |l| l.is_none());
        let c = run(&labels, a + b, |l| *l == Some(y));
        prop_assert_eq!(a + b + c, n);
        // integer forms of the floors
        prop_assert_eq!(a, n / 10);
        prop_assert_eq!(a + b, 7 * n / 10);
    }

    #[test]
    fn any_fractions_give_ordered_segments(n in 2usize..=60, alpha in 0.01f64..0.5, gap in 0.01f64..0.49) {
        let cfg = SemiSupervisedConfig::new(alpha, alpha + gap).unwrap();
        let s = segment_lengths(n, &cfg);
        prop_assert_eq!(s.neutral + s.unlabeled + s.labeled, n);
        let labels = assign_labels(n, Some(Emotion::Anger), &cfg);
        let a = run(&labels, 0, |l| *l == Some(Emotion::Neutral));
        let b = run(&labels, a, |l| l.is_none());
        let c = run(&labels, a + b, |l| *l == Some(Emotion::Anger));
        prop_assert_eq!((a, b, c), (s.neutral, s.unlabeled, s.labeled));
    }
}

fn still(id: &str, label: Emotion) -> VideoSequence {
    let lm = Landmarks68::new(vec![(0.5, 0.5); 68]).unwrap();
    let frame = FrameRecord {
        video_id: id.into(),
        t: 1,
        image: GrayImage::filled(1, 1, 0),
        landmarks: lm,
        label: Some(label),
    };
    VideoSequence::new(id.into(), vec![frame], Some(label)).unwrap()
}

fn corpus_of(counts: &[usize]) -> Vec<VideoSequence> {
    let mut v = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for k in 0..n {
            v.push(still(&format!("{c}-{k}"), Emotion::EXPRESSIONS[c]));
        }
    }
    v
}

proptest! {
    #[test]
    fn split_is_a_stratified_partition(counts in prop::collection::vec(3usize..25, 1..6), seed in any::<u64>()) {
        let videos = corpus_of(&counts);
        let cfg = SplitConfig::with_seed(seed);
        let s = split_dataset(&videos, &cfg).unwrap();
        let all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        let set: BTreeSet<usize> = all.iter().copied().collect();
        prop_assert_eq!(all.len(), videos.len());
        prop_assert_eq!(set.len(), videos.len());
        for (c, &n) in counts.iter().enumerate() {
            let label = Some(Emotion::EXPRESSIONS[c]);
            for (part, frac) in [(&s.train, 0.7), (&s.validation, 0.15), (&s.test, 0.15)] {
                let got = part.iter().filter(|&&i| videos[i].label == label).count() as f64;
                let quota = frac * n as f64;
                prop_assert!(got >= (quota - 1e-9).floor() && got <= (quota + 1e-9).ceil(), "class {} n {} got {} quota {}", c, n, got, quota);
            }
        }
        prop_assert_eq!(split_dataset(&videos, &cfg).unwrap(), s);
    }
}

#[test]
fn ten_per_class_gives_seven_and_one_or_two() {
    let videos = corpus_of(&[10; 6]);
    let s = split_dataset(&videos, &SplitConfig::with_seed(0)).unwrap();
    for c in 0..6 {
        let label = Some(Emotion::EXPRESSIONS[c]);
        let n = |p: &[usize]| p.iter().filter(|&&i| videos[i].label == label).count();
        let got = (n(&s.train), n(&s.validation), n(&s.test));
        assert!(got == (7, 1, 2) || got == (7, 2, 1), "{got:?}");
    }
    assert!(s.warnings.is_empty());
}

#[test]
fn tiny_classes_are_dealt_round_robin_with_a_warning() {
    let videos = corpus_of(&[2, 5]);
    let s = split_dataset(&videos, &SplitConfig::with_seed(1)).unwrap();
    assert_eq!(s.warnings.len(), 1);
    assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 7);
}

#[test]
fn default_corpus_shape() {
    let corpus = generate_synthetic_corpus(&SyntheticConfig::default()).unwrap();
    assert_eq!(corpus.videos.len(), 60);
    let classes: BTreeSet<_> = corpus.videos.iter().map(|v| v.label).collect();
    assert_eq!(classes.len(), 6);
    for v in &corpus.videos {
        assert!((10..=60).contains(&v.len()), "{}", v.len());
        assert!(v.frames.iter().enumerate().all(|(k, f)| f.t == k + 1 && f.video_id == v.id));
    }
    let again = generate_synthetic_corpus(&SyntheticConfig::default()).unwrap();
    assert_eq!(again.videos, corpus.videos);
}

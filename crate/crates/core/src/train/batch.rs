use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::VideoSequence;

/// Position of a frame: `(sequence, frame)` indices, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameRef {
    pub video: usize,
    pub frame: usize,
}

/// A mini-batch: distinct frames plus the adjacent pairs among them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<FrameRef>,
    /// `(i, j)` item indices with `items[j]` directly following `items[i]`.
    pub pairs: Vec<(usize, usize)>,
}

impl Batch {
    fn push(&mut self, f: FrameRef) -> usize {
        match self.items.iter().position(|g| *g == f) {
            Some(i) => i,
            None => {
                self.items.push(f);
                self.items.len() - 1
            }
        }
    }

    fn add_pair(&mut self, a: FrameRef, b: FrameRef) {
        let i = self.push(a);
        let j = self.push(b);
        self.pairs.push((i, j));
    }
}

/// One epoch of batches. Every consecutive-frame pair of every sequence is
/// drawn once, without replacement, `batch_size / 2` pairs per batch; a
/// frame shared by two pairs of a batch appears once. Single-frame
/// sequences fill the space left in the last batch, then further batches.
pub fn make_batches(videos: &[VideoSequence], batch_size: usize, rng: &mut impl Rng) -> Vec<Batch> {
    let per_batch = (batch_size / 2).max(1);
    let mut pairs: Vec<(FrameRef, FrameRef)> = Vec::new();
    let mut singles: Vec<FrameRef> = Vec::new();
    for (v, seq) in videos.iter().enumerate() {
        if seq.len() == 1 {
            singles.push(FrameRef { video: v, frame: 0 });
        }
        for t in 1..seq.len() {
            pairs.push((FrameRef { video: v, frame: t - 1 }, FrameRef { video: v, frame: t }));
        }
    }
    pairs.shuffle(rng);
    singles.shuffle(rng);

    let mut batches: Vec<Batch> = Vec::new();
    for chunk in pairs.chunks(per_batch) {
        let mut b = Batch::default();
        for &(a, c) in chunk {
            b.add_pair(a, c);
        }
        batches.push(b);
    }
    let mut singles = singles.into_iter().peekable();
    if let Some(last) = batches.last_mut() {
        let used = 2 * last.pairs.len();
        for _ in used..batch_size.max(used) {
            match singles.next() {
                Some(f) => {
                    last.push(f);
                }
                None => break,
            }
        }
    }
    while singles.peek().is_some() {
        let mut b = Batch::default();
        for f in singles.by_ref().take(batch_size.max(1)) {
            b.push(f);
        }
        batches.push(b);
    }
    batches
}

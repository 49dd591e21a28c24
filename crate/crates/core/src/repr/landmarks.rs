use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// 68 facial landmark points `(x, y)` in source-pixel units, where pixel
/// `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Landmarks68 {
    points: Vec<(f64, f64)>,
}

impl Landmarks68 {
    pub const COUNT: usize = 68;

    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() != Self::COUNT {
            return Err(Error::Landmarks(format!(
                "expected 68 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points
            .iter()
            .position(|(x, y)| !(x.is_finite() && y.is_finite()))
        {
            return Err(Error::Landmarks(format!("point {i} is not finite")));
        }
        Ok(Landmarks68 { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        self.points[i]
    }

    /// Points moved inside `[0, width] x [0, height]`.
    pub fn clamped(&self, width: usize, height: usize) -> Self {
        let (w, h) = (width as f64, height as f64);
        Landmarks68 {
            points: self
                .points
                .iter()
                .map(|&(x, y)| (x.clamp(0.0, w), y.clamp(0.0, h)))
                .collect(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Landmarks68 {
            points: self.points.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
        }
    }

    /// `(min_x, min_y, max_x, max_y)` over an index range.
    pub fn extent(&self, range: core::ops::RangeInclusive<usize>) -> (f64, f64, f64, f64) {
        let mut e = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.points[range] {
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
        }
        e
    }
}

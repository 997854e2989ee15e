//! Box arithmetic on half-open integer pixel rectangles.
//!
//! A pixel `(px, py)` lies inside `[x0, y0, x1, y1]` iff `x0 <= px < x1` and
//! `y0 <= py < y1`, so `area = (x1 - x0) * (y1 - y0)` counts pixels exactly.

use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Snap tolerance applied before flooring/ceiling enlarged coordinates, so
/// that e.g. `20 * 1.2 / 2` landing a hair above 12 does not widen the box by
/// a whole pixel.
const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate box [{x0},{y0},{x1},{y1}]: need x0 < x1 and y0 < y1")]
    Degenerate { x0: i64, y0: i64, x1: i64, y1: i64 },
    #[error("box coordinate {value} is negative")]
    Negative { value: i64 },
    #[error("enlarge ratio {0} must be finite and >= 1")]
    BadRatio(f64),
    #[error("box {bbox} does not fit inside a {width}x{height} image")]
    OutOfBounds { bbox: BBox, width: u32, height: u32 },
}

/// Axis-aligned half-open pixel rectangle with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[u32; 4]")]
pub struct BBox {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, GeometryError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(GeometryError::Degenerate {
                x0: x0.into(),
                y0: y0.into(),
                x1: x1.into(),
                y1: y1.into(),
            });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Like [`BBox::new`] but accepts signed input, rejecting negatives.
    pub fn from_signed(x0: i64, y0: i64, x1: i64, y1: i64) -> Result<Self, GeometryError> {
        for v in [x0, y0, x1, y1] {
            if v < 0 {
                return Err(GeometryError::Negative { value: v });
            }
        }
        let cast = |v: i64| u32::try_from(v).map_err(|_| GeometryError::Negative { value: v });
        if x0 >= x1 || y0 >= y1 {
            return Err(GeometryError::Degenerate { x0, y0, x1, y1 });
        }
        Self::new(cast(x0)?, cast(y0)?, cast(x1)?, cast(y1)?)
    }

    #[inline]
    pub fn x0(&self) -> u32 {
        self.x0
    }
    #[inline]
    pub fn y0(&self) -> u32 {
        self.y0
    }
    #[inline]
    pub fn x1(&self) -> u32 {
        self.x1
    }
    #[inline]
    pub fn y1(&self) -> u32 {
        self.y1
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    #[inline]
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains_pixel(&self, px: u32, py: u32) -> bool {
        self.x0 <= px && px < self.x1 && self.y0 <= py && py < self.y1
    }

    /// `other` is a subset of `self`.
    pub fn contains(&self, other: &BBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.x1 <= width && self.y1 <= height
    }

    pub fn check_bounds(&self, width: u32, height: u32) -> Result<(), GeometryError> {
        if self.fits_in(width, height) {
            Ok(())
        } else {
            Err(GeometryError::OutOfBounds { bbox: *self, width, height })
        }
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        BBox::new(x0, y0, x1, y1).ok()
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        self.intersection(other).map_or(0, |b| b.area())
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }

    pub fn enlarge(&self, ratio: f64, width: u32, height: u32) -> Result<BBox, GeometryError> {
        enlarge(self, ratio, width, height)
    }

    pub fn ring(&self, ratio: f64, width: u32, height: u32) -> Result<RingRegion, GeometryError> {
        ring(self, ratio, width, height)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.x0, self.y0, self.x1, self.y1)
    }
}

impl TryFrom<[i64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [i64; 4]) -> Result<Self, Self::Error> {
        BBox::from_signed(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// Intersection over union of pixel sets; 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Scales width and height by `ratio` about the box centre, rounds outward
/// and clips to `[0, width) x [0, height)`.
pub fn enlarge(b: &BBox, ratio: f64, width: u32, height: u32) -> Result<BBox, GeometryError> {
    if !ratio.is_finite() || ratio < 1.0 {
        return Err(GeometryError::BadRatio(ratio));
    }
    b.check_bounds(width, height)?;

    let span = |lo: u32, hi: u32, limit: u32| -> (u32, u32) {
        let centre = (f64::from(lo) + f64::from(hi)) * 0.5;
        let half = f64::from(hi - lo) * ratio * 0.5;
        let new_lo = libm::floor(centre - half + SNAP_EPS);
        let new_hi = libm::ceil(centre + half - SNAP_EPS);
        let new_lo = if new_lo <= 0.0 { 0 } else { (new_lo as u32).min(lo) };
        let new_hi = if new_hi >= f64::from(limit) { limit } else { (new_hi as u32).max(hi) };
        (new_lo, new_hi)
    };
    let (x0, x1) = span(b.x0, b.x1, width);
    let (y0, y1) = span(b.y0, b.y1, height);
    Ok(BBox { x0, y0, x1, y1 })
}

/// Pixels of `outer` that are not in `inner`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingRegion {
    outer: BBox,
    inner: BBox,
}

impl RingRegion {
    pub fn new(outer: BBox, inner: BBox) -> Option<Self> {
        outer.contains(&inner).then_some(Self { outer, inner })
    }

    pub fn outer(&self) -> BBox {
        self.outer
    }

    pub fn inner(&self) -> BBox {
        self.inner
    }

    pub fn pixel_count(&self) -> u64 {
        self.outer.area() - self.inner.area()
    }

    pub fn is_empty(&self) -> bool {
        self.outer == self.inner
    }

    pub fn contains_pixel(&self, px: u32, py: u32) -> bool {
        self.outer.contains_pixel(px, py) && !self.inner.contains_pixel(px, py)
    }
}

pub fn ring(b: &BBox, ratio: f64, width: u32, height: u32) -> Result<RingRegion, GeometryError> {
    let outer = enlarge(b, ratio, width, height)?;
    Ok(RingRegion { outer, inner: *b })
}

//! Per-class confidence maps and summed-area tables over them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, RingRegion};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfMapError {
    #[error("map is {width}x{height} but holds {len} values")]
    LengthMismatch { width: u32, height: u32, len: usize },
    #[error("map has zero width or height")]
    Empty,
    #[error("value {value} at pixel ({x},{y}) is outside [0, 1]")]
    OutOfRange { x: u32, y: u32, value: f32 },
    #[error("value {value} at pixel ({x},{y}) is negative or not finite")]
    InvalidActivation { x: u32, y: u32, value: f32 },
    #[error("{width}x{height} overflows the addressable pixel count")]
    DimensionOverflow { width: u32, height: u32 },
}

fn check_len(width: u32, height: u32, len: usize) -> Result<(), ConfMapError> {
    if width == 0 || height == 0 {
        return Err(ConfMapError::Empty);
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .ok_or(ConfMapError::DimensionOverflow { width, height })?;
    if expected != len {
        return Err(ConfMapError::LengthMismatch { width, height, len });
    }
    Ok(())
}

/// One class's per-pixel confidence, row-major, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfMap {
    class_id: u32,
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl ConfMap {
    /// Negative zero is stored as `0.0`.
    pub fn new(class_id: u32, width: u32, height: u32, mut values: Vec<f32>) -> Result<Self, ConfMapError> {
        check_len(width, height, values.len())?;
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(ConfMapError::OutOfRange {
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
                value: values[i],
            });
        }
        for v in &mut values {
            *v += 0.0;
        }
        Ok(Self { class_id, width, height, values })
    }

    pub fn filled(class_id: u32, width: u32, height: u32, value: f32) -> Result<Self, ConfMapError> {
        let n = (width as usize)
            .checked_mul(height as usize)
            .ok_or(ConfMapError::DimensionOverflow { width, height })?;
        Self::new(class_id, width, height, alloc::vec![value; n])
    }

    /// Builds a map from a pixel function evaluated in row-major order.
    pub fn from_fn(
        class_id: u32,
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> f32,
    ) -> Result<Self, ConfMapError> {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(class_id, width, height, values)
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn with_class_id(mut self, class_id: u32) -> Self {
        self.class_id = class_id;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn row(&self, y: u32) -> &[f32] {
        let w = self.width as usize;
        let start = y as usize * w;
        &self.values[start..start + w]
    }

    pub fn same_shape(&self, other: &ConfMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn integral(&self) -> IntegralImage {
        IntegralImage::new(self)
    }

    /// Confidences of the ring pixels in row-major order, inner box skipped.
    pub fn ring_values(&self, ring: &RingRegion) -> Vec<f32> {
        let mut out = Vec::with_capacity(ring.pixel_count() as usize);
        self.ring_values_into(ring, &mut out);
        out
    }

    /// [`ConfMap::ring_values`] into a reusable buffer (cleared first).
    pub fn ring_values_into(&self, ring: &RingRegion, out: &mut Vec<f32>) {
        out.clear();
        if ring.is_empty() {
            return;
        }
        let (outer, inner) = (ring.outer(), ring.inner());
        let (ox0, ox1) = (outer.x0() as usize, outer.x1() as usize);
        let (ix0, ix1) = (inner.x0() as usize, inner.x1() as usize);
        for y in outer.y0()..outer.y1() {
            let row = self.row(y);
            if y < inner.y0() || y >= inner.y1() {
                out.extend_from_slice(&row[ox0..ox1]);
            } else {
                out.extend_from_slice(&row[ox0..ix0]);
                out.extend_from_slice(&row[ix1..ox1]);
            }
        }
    }
}

impl<'de> Deserialize<'de> for ConfMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            class_id: u32,
            width: u32,
            height: u32,
            values: Vec<f32>,
        }
        let r = Raw::deserialize(d)?;
        ConfMap::new(r.class_id, r.width, r.height, r.values).map_err(serde::de::Error::custom)
    }
}

/// Map with arbitrary non-negative activations, e.g. an unnormalized CAM.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMap {
    class_id: u32,
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl RawMap {
    pub fn new(class_id: u32, width: u32, height: u32, values: Vec<f32>) -> Result<Self, ConfMapError> {
        check_len(width, height, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(ConfMapError::InvalidActivation {
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
                value: values[i],
            });
        }
        Ok(Self { class_id, width, height, values })
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    pub(crate) fn into_parts(self) -> (u32, u32, u32, Vec<f32>) {
        (self.class_id, self.width, self.height, self.values)
    }
}

impl From<ConfMap> for RawMap {
    fn from(m: ConfMap) -> Self {
        Self { class_id: m.class_id, width: m.width, height: m.height, values: m.values }
    }
}

/// Summed-area table: entry `(i, j)` holds the sum of all map values with
/// `x < i` and `y < j`, accumulated in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(map: &ConfMap) -> Self {
        let w = map.width as usize;
        let h = map.height as usize;
        let stride = w + 1;
        let mut sums = alloc::vec![0.0f64; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0.0f64;
            let src = &map.values[y * w..(y + 1) * w];
            let (above, below) = sums.split_at_mut((y + 1) * stride);
            let prev = &above[y * stride..];
            let cur = &mut below[..stride];
            for x in 0..w {
                row_sum += f64::from(src[x]);
                cur[x + 1] = prev[x + 1] + row_sum;
            }
        }
        Self { width: map.width, height: map.height, sums }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Raw table entry; `i <= width`, `j <= height`.
    #[inline]
    pub fn at(&self, i: u32, j: u32) -> f64 {
        self.sums[j as usize * (self.width as usize + 1) + i as usize]
    }

    /// Sum of the map over `b`. The box must lie inside the map.
    #[inline]
    pub fn box_sum(&self, b: &BBox) -> f64 {
        debug_assert!(b.fits_in(self.width, self.height));
        self.at(b.x1(), b.y1()) - self.at(b.x0(), b.y1()) - self.at(b.x1(), b.y0())
            + self.at(b.x0(), b.y0())
    }

    /// Mean confidence over `b`, clamped to `[0, 1]` against rounding drift.
    #[inline]
    pub fn box_mean(&self, b: &BBox) -> f64 {
        (self.box_sum(b) / b.area() as f64).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn negative_zero_is_stored_as_zero() {
        let m = ConfMap::new(0, 2, 1, alloc::vec![-0.0, 0.5]).unwrap();
        assert_eq!(m.values()[0].to_bits(), 0.0f32.to_bits());
    }

    fn naive_sum(m: &ConfMap, b: &BBox) -> f64 {
        let mut s = 0.0;
        for y in b.y0()..b.y1() {
            for x in b.x0()..b.x1() {
                s += f64::from(m.get(x, y));
            }
        }
        s
    }

    #[test]
    fn validation() {
        assert!(matches!(
            ConfMap::new(0, 2, 2, alloc::vec![0.0; 3]),
            Err(ConfMapError::LengthMismatch { .. })
        ));
        assert!(matches!(
            ConfMap::new(0, 2, 1, alloc::vec![0.5, 1.5]),
            Err(ConfMapError::OutOfRange { x: 1, y: 0, .. })
        ));
        assert!(ConfMap::new(0, 1, 1, alloc::vec![f32::NAN]).is_err());
        assert!(matches!(ConfMap::new(0, 0, 3, alloc::vec![]), Err(ConfMapError::Empty)));
        assert!(RawMap::new(0, 1, 2, alloc::vec![3.0, -0.1]).is_err());
        assert!(RawMap::new(0, 1, 2, alloc::vec![3.0, 0.1]).is_ok());
    }

    #[test]
    fn integral_small_examples() {
        let ones = ConfMap::filled(0, 2, 2, 1.0).unwrap();
        assert_eq!(ones.integral().box_sum(&bx(0, 0, 2, 2)), 4.0);

        let diag = ConfMap::new(0, 2, 2, alloc::vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(diag.integral().box_sum(&bx(0, 0, 1, 1)), 0.5);
    }

    #[test]
    fn integral_matches_pixel_loop_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = ConfMap::from_fn(0, 64, 64, |_, _| rng.random::<f32>()).unwrap();
        let ii = m.integral();
        for _ in 0..1000 {
            let x0 = rng.random_range(0..64);
            let y0 = rng.random_range(0..64);
            let b = bx(x0, y0, rng.random_range(x0 + 1..=64), rng.random_range(y0 + 1..=64));
            assert!((ii.box_sum(&b) - naive_sum(&m, &b)).abs() <= 1e-9);
        }
    }

    #[test]
    fn box_mean_examples() {
        let half = ConfMap::filled(0, 7, 5, 0.5).unwrap();
        assert_eq!(half.integral().box_mean(&bx(1, 2, 6, 5)), 0.5);

        let sat = ConfMap::from_fn(0, 8, 8, |x, y| if (2..5).contains(&x) && y < 4 { 1.0 } else { 0.2 })
            .unwrap();
        assert_eq!(sat.integral().box_mean(&bx(2, 0, 5, 4)), 1.0);

        let idx = ConfMap::from_fn(0, 4, 4, |x, y| (y * 4 + x) as f32 / 16.0).unwrap();
        let expected = [5.0, 6.0, 9.0, 10.0].iter().sum::<f64>() / 4.0 / 16.0;
        assert_eq!(expected, 0.46875);
        assert!((idx.integral().box_mean(&bx(1, 1, 3, 3)) - 0.46875).abs() < 1e-12);
    }

    #[test]
    fn ring_values_examples() {
        let m = ConfMap::filled(0, 4, 4, 0.3).unwrap();
        let empty = bx(1, 1, 3, 3).ring(1.0, 4, 4).unwrap();
        assert!(m.ring_values(&empty).is_empty());

        let r = RingRegion::new(bx(0, 0, 4, 4), bx(1, 1, 3, 3)).unwrap();
        let v = m.ring_values(&r);
        assert_eq!(v.len(), 12);
        assert!(v.iter().all(|&x| x == 0.3));

        let idx = ConfMap::from_fn(0, 4, 4, |x, y| (y * 4 + x) as f32 / 16.0).unwrap();
        // row-major enumeration oracle
        let mut expected = Vec::new();
        for y in 0..4 {
            for x in 0..4 {
                if !r.inner().contains_pixel(x, y) {
                    expected.push(idx.get(x, y));
                }
            }
        }
        assert_eq!(idx.ring_values(&r), expected);
        let ids: Vec<u32> = expected.iter().map(|v| (v * 16.0) as u32).collect();
        assert_eq!(ids, [0, 1, 2, 3, 4, 7, 8, 11, 12, 13, 14, 15]);
    }

    proptest! {
        #[test]
        fn integral_monotone_and_exact(seed in any::<u64>(), w in 1u32..24, h in 1u32..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = ConfMap::from_fn(3, w, h, |_, _| rng.random::<f32>()).unwrap();
            let ii = m.integral();
            for j in 0..=h {
                for i in 0..w {
                    prop_assert!(ii.at(i + 1, j) >= ii.at(i, j));
                }
            }
            for j in 0..h {
                for i in 0..=w {
                    prop_assert!(ii.at(i, j + 1) >= ii.at(i, j));
                }
            }
            let x0 = rng.random_range(0..w);
            let y0 = rng.random_range(0..h);
            let b = bx(x0, y0, rng.random_range(x0 + 1..=w), rng.random_range(y0 + 1..=h));
            let mean = ii.box_mean(&b);
            prop_assert!((0.0..=1.0).contains(&mean));
            prop_assert!((mean - naive_sum(&m, &b) / b.area() as f64).abs() <= 1e-9);
        }

        #[test]
        fn ring_len_matches_area(x0 in 0u32..20, y0 in 0u32..20, w in 1u32..10, h in 1u32..10, r in 1.0f64..1.6) {
            let m = ConfMap::filled(0, 30, 30, 0.1).unwrap();
            let rg = bx(x0, y0, x0 + w, y0 + h).ring(r, 30, 30).unwrap();
            prop_assert_eq!(m.ring_values(&rg).len() as u64, rg.pixel_count());
        }
    }
}

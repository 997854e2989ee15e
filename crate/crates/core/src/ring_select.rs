//! Exact top-k means over ring regions.

use alloc::vec::Vec;

use crate::confmap::{ConfMap, IntegralImage};
use crate::geometry::{BBox, RingRegion};
use crate::scoring::top_count;

/// Rings smaller than this are selected directly.
const BAND_MIN_RING: usize = 2048;
const MAX_SAMPLE: usize = 1024;

/// Reusable buffers for ring selection.
#[derive(Debug, Clone, Default)]
pub struct RingScratch {
    ring: Vec<u32>,
    band: Vec<u32>,
    sample: Vec<u32>,
}

/// Calls `f` on each contiguous row segment of the ring, top to bottom.
#[inline(always)]
fn for_ring_segments(map: &ConfMap, ring: &RingRegion, mut f: impl FnMut(&[f32])) {
    let (outer, inner) = (ring.outer(), ring.inner());
    let (ox0, ox1) = (outer.x0() as usize, outer.x1() as usize);
    let (ix0, ix1) = (inner.x0() as usize, inner.x1() as usize);
    for y in outer.y0()..outer.y1() {
        let row = map.row(y);
        if y < inner.y0() || y >= inner.y1() {
            f(&row[ox0..ox1]);
        } else {
            f(&row[ox0..ix0]);
            f(&row[ix1..ox1]);
        }
    }
}

fn sum_bits(bits: &[u32]) -> f64 {
    bits.iter().map(|&b| f64::from(f32::from_bits(b))).sum()
}

/// Sum of the `k` largest bit patterns (`k <= bits.len()`).
fn top_sum_bits(bits: &mut [u32], k: usize) -> f64 {
    let n = bits.len();
    if k == n {
        return sum_bits(bits);
    }
    if k == 0 {
        return 0.0;
    }
    let (_, _, upper) = bits.select_nth_unstable(n - k - 1);
    sum_bits(upper)
}

/// Count and sum of the values `> t`, in lanes so both loops vectorize.
fn count_sum_above(bits: &[u32], t: f32) -> (usize, f64) {
    const LANES: usize = 8;
    let chunks = bits.chunks_exact(LANES);
    let rest = chunks.remainder();
    let mut counts = [0u32; LANES];
    for c in chunks.clone() {
        for j in 0..LANES {
            counts[j] = counts[j].wrapping_add(u32::from(f32::from_bits(c[j]) > t));
        }
    }
    let mut sums = [0.0f64; LANES];
    for c in chunks {
        for j in 0..LANES {
            let v = f32::from_bits(c[j]);
            sums[j] += if v > t { f64::from(v) } else { 0.0 };
        }
    }
    let mut count = counts.iter().map(|&c| c as usize).sum::<usize>();
    let mut sum = sums.iter().sum::<f64>();
    for &b in rest {
        let v = f32::from_bits(b);
        if v > t {
            count += 1;
            sum += f64::from(v);
        }
    }
    (count, sum)
}

/// Copies the patterns in `[lo, hi]` to the front of `out`.
fn gather_band(bits: &[u32], out: &mut [u32], lo: u32, hi: u32) -> usize {
    let width = hi - lo;
    let mut j = 0;
    for &b in bits {
        if b.wrapping_sub(lo) <= width {
            out[j] = b;
            j += 1;
        }
    }
    j
}

/// Exact mean of the `top_count(n, fraction)` largest ring values.
///
/// With a [`LevelTable`] the bucket holding the k-th largest value is found
/// from summed-area lookups and only that bucket is gathered. Otherwise
/// large rings avoid a full selection: a strided sample brackets the k-th
/// largest value in a band `[lo, hi]`, values above the band are summed
/// and only the band is selected. If the sample misjudged the band the
/// whole ring is selected instead.
pub(crate) fn ring_top_mean(
    map: &ConfMap,
    ii: Option<&IntegralImage>,
    levels: Option<&LevelTable>,
    ring: &RingRegion,
    fraction: f64,
    scratch: &mut RingScratch,
) -> f64 {
    let n = ring.pixel_count() as usize;
    debug_assert!(n > 0);
    let k = top_count(n, fraction);
    if k == n {
        let sum = match ii {
            Some(ii) => ii.box_sum(&ring.outer()) - ii.box_sum(&ring.inner()),
            None => {
                let mut s = 0.0;
                for_ring_segments(map, ring, |seg| s += seg.iter().map(|&v| f64::from(v)).sum::<f64>());
                s
            }
        };
        return (sum / n as f64).clamp(0.0, 1.0);
    }
    if let Some(sum) = levels.and_then(|t| t.top_sum(map, ring, k, scratch)) {
        return (sum / k as f64).clamp(0.0, 1.0);
    }

    let bits = &mut scratch.ring;
    bits.clear();
    // non-negative floats order like their bit patterns
    for_ring_segments(map, ring, |seg| bits.extend(seg.iter().map(|v| v.to_bits())));
    let sum = if n < BAND_MIN_RING {
        top_sum_bits(bits, k)
    } else {
        match band_sum(bits, k, &mut scratch.sample, &mut scratch.band) {
            Some(sum) => sum,
            None => top_sum_bits(bits, k),
        }
    };
    (sum / k as f64).clamp(0.0, 1.0)
}

/// Sum of the `k` largest patterns of `bits` via a sampled band, or `None`
/// when the k-th largest falls outside the band.
fn band_sum(bits: &[u32], k: usize, sample: &mut Vec<u32>, band: &mut Vec<u32>) -> Option<f64> {
    let n = bits.len();
    let stride = n.div_ceil(MAX_SAMPLE).max(8);
    sample.clear();
    sample.extend(bits.iter().step_by(stride));
    let m = sample.len();

    // the k-th largest sits near ascending rank (1 - k/n) * m of the sample
    let p = k as f64 / n as f64;
    let centre = (1.0 - p) * m as f64;
    let margin = 3.0 * libm::sqrt(m as f64 * p * (1.0 - p)) + 4.0;
    let (lo_rank, hi_rank) = (centre - margin, centre + margin);
    let (hi, below) = if hi_rank >= (m - 1) as f64 {
        (f32::INFINITY.to_bits(), &mut sample[..])
    } else {
        let (below, &mut hi, _) = sample.select_nth_unstable(hi_rank as usize);
        (hi, below)
    };
    let lo = if lo_rank < 0.0 || below.is_empty() {
        0
    } else {
        *below.select_nth_unstable(lo_rank as usize).1
    };

    let (above, sum) = count_sum_above(bits, f32::from_bits(hi));
    if above > k {
        return None;
    }
    if band.len() < n {
        band.resize(n, 0);
    }
    let len = gather_band(bits, band, lo, hi);
    if above + len < k {
        return None;
    }
    Some(sum + top_sum_bits(&mut band[..len], k - above))
}


const LEVELS: usize = 16;

/// Per-bucket pixel counts of one map as summed-area tables. Bucket `i`
/// holds the values in `[edges[i], edges[i + 1])`, the last bucket is open
/// above. Edges are map quantiles, so rings spread over many buckets.
#[derive(Debug, Clone)]
pub struct LevelTable {
    edges: [f32; LEVELS],
    stride: usize,
    counts: Vec<[u32; LEVELS]>,
}

impl LevelTable {
    pub fn new(map: &ConfMap) -> Self {
        let values = map.values();
        let step = values.len().div_ceil(4096).max(1);
        let mut sample: Vec<u32> = values.iter().step_by(step).map(|v| v.to_bits()).collect();
        sample.sort_unstable();
        let mut edges = [0.0f32; LEVELS];
        for (i, e) in edges.iter_mut().enumerate().skip(1) {
            *e = f32::from_bits(sample[i * sample.len() / LEVELS]);
        }

        let (w, h) = (map.width() as usize, map.height() as usize);
        let stride = w + 1;
        let mut counts = Vec::with_capacity(stride * (h + 1));
        counts.resize(stride + 1, [0u32; LEVELS]);
        for y in 0..h {
            let mut row = [0u32; LEVELS];
            for (x, &v) in map.row(y as u32).iter().enumerate() {
                let b = bucket(&edges, v);
                row[b] = row[b].wrapping_add(1);
                let up = counts[y * stride + x + 1];
                let mut here = [0u32; LEVELS];
                for l in 0..LEVELS {
                    here[l] = up[l].wrapping_add(row[l]);
                }
                counts.push(here);
            }
            if y + 1 < h {
                counts.push([0u32; LEVELS]);
            }
        }
        Self { edges, stride, counts }
    }

    /// Per-bucket counts of `outer` minus those of `inner`.
    fn ring_counts(&self, ring: &RingRegion) -> [u32; LEVELS] {
        let s = self.stride;
        let corners = |b: &BBox| {
            let (x0, y0, x1, y1) = (b.x0() as usize, b.y0() as usize, b.x1() as usize, b.y1() as usize);
            [y1 * s + x1, y0 * s + x1, y1 * s + x0, y0 * s + x0]
        };
        let (o, i) = (corners(&ring.outer()), corners(&ring.inner()));
        let c = &self.counts;
        let mut out = [0u32; LEVELS];
        for (l, v) in out.iter_mut().enumerate() {
            let outer = c[o[0]][l].wrapping_sub(c[o[1]][l]).wrapping_sub(c[o[2]][l]).wrapping_add(c[o[3]][l]);
            let inner = c[i[0]][l].wrapping_sub(c[i[1]][l]).wrapping_sub(c[i[2]][l]).wrapping_add(c[i[3]][l]);
            *v = outer.wrapping_sub(inner);
        }
        out
    }

    /// Sum of the `k` largest ring values, or `None` when the bucket that
    /// holds the k-th largest is too crowded to beat sampling.
    fn top_sum(&self, map: &ConfMap, ring: &RingRegion, k: usize, scratch: &mut RingScratch) -> Option<f64> {
        let n = ring.pixel_count() as usize;
        let counts = self.ring_counts(ring);
        let mut above = 0usize;
        let mut j = LEVELS - 1;
        while above + (counts[j] as usize) < k {
            above += counts[j] as usize;
            j -= 1;
        }
        let crowded = counts[j] as usize;
        if n >= BAND_MIN_RING && crowded * 4 > n {
            return None;
        }

        let lo = self.edges[j].to_bits();
        let hi = if j + 1 < LEVELS { self.edges[j + 1].to_bits() } else { u32::MAX };
        let width = hi - lo;
        let band = &mut scratch.band;
        // One spare slot lets the gather store unconditionally.
        if band.len() <= crowded {
            band.resize(crowded + 1, 0);
        }
        let mut len = 0;
        let mut sum = 0.0f64;
        let floor = f32::from_bits(hi.min(f32::INFINITY.to_bits()));
        for_ring_segments(map, ring, |seg| {
            sum += sum_at_least(seg, floor);
            for &v in seg {
                let b = v.to_bits();
                band[len] = b;
                len += usize::from(b.wrapping_sub(lo) < width);
            }
        });
        debug_assert_eq!(len, crowded);
        Some(sum + top_sum_bits(&mut band[..len], k - above))
    }
}

/// Sum of the values `>= t`, in lanes so the loop vectorizes.
#[inline(always)]
fn sum_at_least(seg: &[f32], t: f32) -> f64 {
    let mut lanes = [0.0f64; 8];
    let chunks = seg.chunks_exact(8);
    let rest = chunks.remainder();
    for c in chunks {
        for (acc, &v) in lanes.iter_mut().zip(c) {
            *acc += if v >= t { f64::from(v) } else { 0.0 };
        }
    }
    let mut tail = 0.0;
    for &v in rest {
        if v >= t {
            tail += f64::from(v);
        }
    }
    lanes.iter().sum::<f64>() + tail
}

/// Last bucket whose lower edge is `<= v`; edges never decrease and
/// `edges[0] = 0`, so one always exists.
#[inline(always)]
fn bucket(edges: &[f32; LEVELS], v: f32) -> usize {
    let mut b = 0;
    let mut step = LEVELS / 2;
    while step > 0 {
        if edges[b + step] <= v {
            b += step;
        }
        step /= 2;
    }
    b
}

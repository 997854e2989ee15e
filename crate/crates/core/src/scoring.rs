//! Proposal objectness: purity inside the box minus the conditional average
//! of the surrounding ring.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confmap::{ConfMap, IntegralImage};
use crate::geometry::{BBox, GeometryError};
use crate::ring_select::{ring_top_mean, LevelTable, RingScratch};

pub const DEFAULT_ENLARGE_RATIO: f64 = 1.2;
pub const DEFAULT_TOP_FRACTION: f64 = 0.5;
pub const DEFAULT_POOL_SIZE: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("conditional average over an empty region")]
    EmptyRegion,
    #[error("box {0} has an empty surrounding ring and the skip policy excludes it")]
    EmptyRing(BBox),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("integral image is {ii_w}x{ii_h} but the map is {map_w}x{map_h}")]
    ShapeMismatch { map_w: u32, map_h: u32, ii_w: u32, ii_h: u32 },
    #[error("invalid scoring config: {0}")]
    InvalidConfig(&'static str),
}

/// What to do with a box whose ring is empty (it touches every image border
/// or the ratio is 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptyRingPolicy {
    /// Surrounding completeness is 0; the box keeps its purity as its score.
    #[default]
    Zero,
    /// The box is reported as an error and left out of pools.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub enlarge_ratio: f64,
    pub top_fraction: f64,
    pub pool_size: usize,
    pub empty_ring_policy: EmptyRingPolicy,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            enlarge_ratio: DEFAULT_ENLARGE_RATIO,
            top_fraction: DEFAULT_TOP_FRACTION,
            pool_size: DEFAULT_POOL_SIZE,
            empty_ring_policy: EmptyRingPolicy::Zero,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ScoringError> {
        if !self.enlarge_ratio.is_finite() || self.enlarge_ratio < 1.0 {
            return Err(ScoringError::InvalidConfig("enlarge_ratio must be finite and >= 1"));
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(ScoringError::InvalidConfig("top_fraction must lie in (0, 1]"));
        }
        if self.pool_size == 0 {
            return Err(ScoringError::InvalidConfig("pool_size must be >= 1"));
        }
        Ok(())
    }
}

/// A box rated against one class map. `objectness == p_inside - p_surround`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredProposal {
    bbox: BBox,
    class_id: u32,
    p_inside: f64,
    p_surround: f64,
    objectness: f64,
}

impl ScoredProposal {
    pub fn new(bbox: BBox, class_id: u32, p_inside: f64, p_surround: f64) -> Self {
        Self { bbox, class_id, p_inside, p_surround, objectness: p_inside - p_surround }
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }
    pub fn class_id(&self) -> u32 {
        self.class_id
    }
    pub fn p_inside(&self) -> f64 {
        self.p_inside
    }
    pub fn p_surround(&self) -> f64 {
        self.p_surround
    }
    pub fn objectness(&self) -> f64 {
        self.objectness
    }
}

/// Top proposals for one (image, class), best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub image_id: String,
    pub class_id: u32,
    pub entries: Vec<ScoredProposal>,
}

impl CandidatePool {
    pub fn top1(&self) -> Option<&ScoredProposal> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Which score orders a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Purity minus surrounding completeness.
    Objectness,
    /// Purity alone, the comparison baseline.
    PurityOnly,
}

/// Number of values the conditional average keeps: `ceil(fraction * n)`,
/// at least 1 and at most `n`.
pub fn top_count(n: usize, fraction: f64) -> usize {
    let x = fraction * n as f64;
    // absorb products like 0.3 * 10 = 3.0000000000000004
    let k = libm::ceil(x - x * 1e-12) as usize;
    k.clamp(1, n.max(1))
}

/// Mean of `values` inside the box.
pub fn purity(ii: &IntegralImage, b: &BBox) -> f64 {
    ii.box_mean(b)
}

/// Mean of the `ceil(fraction * n)` largest values.
pub fn conditional_average(values: &[f32], top_fraction: f64) -> Result<f64, ScoringError> {
    let mut bits: Vec<u32> = values.iter().map(|v| v.to_bits()).collect();
    top_mean_bits(&mut bits, top_fraction)
}

/// Core of the conditional average over non-negative `f32` values stored as
/// raw bits. For non-negative floats the bit pattern orders like the value,
/// so the selection runs on plain integers.
fn top_mean_bits(bits: &mut [u32], top_fraction: f64) -> Result<f64, ScoringError> {
    let n = bits.len();
    if n == 0 {
        return Err(ScoringError::EmptyRegion);
    }
    let k = top_count(n, top_fraction);
    let top = if k == n {
        &bits[..]
    } else {
        let (_, _, upper) = bits.select_nth_unstable(n - k - 1);
        &upper[..]
    };
    let sum: f64 = top.iter().map(|&b| f64::from(f32::from_bits(b))).sum();
    Ok((sum / k as f64).clamp(0.0, 1.0))
}

fn completeness_with(
    map: &ConfMap,
    ii: Option<&IntegralImage>,
    levels: Option<&LevelTable>,
    b: &BBox,
    cfg: &ScoringConfig,
    scratch: &mut RingScratch,
) -> Result<f64, ScoringError> {
    let ring = b.ring(cfg.enlarge_ratio, map.width(), map.height())?;
    if ring.is_empty() {
        return match cfg.empty_ring_policy {
            EmptyRingPolicy::Zero => Ok(0.0),
            EmptyRingPolicy::Skip => Err(ScoringError::EmptyRing(*b)),
        };
    }
    Ok(ring_top_mean(map, ii, levels, &ring, cfg.top_fraction, scratch))
}

/// Conditional average over the ring between `b` and its enlargement.
pub fn surrounding_completeness(map: &ConfMap, b: &BBox, cfg: &ScoringConfig) -> Result<f64, ScoringError> {
    completeness_with(map, None, None, b, cfg, &mut RingScratch::default())
}

fn check_pair(map: &ConfMap, ii: &IntegralImage) -> Result<(), ScoringError> {
    if ii.width() != map.width() || ii.height() != map.height() {
        return Err(ScoringError::ShapeMismatch {
            map_w: map.width(),
            map_h: map.height(),
            ii_w: ii.width(),
            ii_h: ii.height(),
        });
    }
    Ok(())
}

pub fn score(map: &ConfMap, ii: &IntegralImage, b: &BBox, cfg: &ScoringConfig) -> Result<ScoredProposal, ScoringError> {
    check_pair(map, ii)?;
    score_with(map, ii, None, b, cfg, &mut RingScratch::default())
}

fn score_with(
    map: &ConfMap,
    ii: &IntegralImage,
    levels: Option<&LevelTable>,
    b: &BBox,
    cfg: &ScoringConfig,
    scratch: &mut RingScratch,
) -> Result<ScoredProposal, ScoringError> {
    b.check_bounds(map.width(), map.height())?;
    let p_surround = completeness_with(map, Some(ii), levels, b, cfg, scratch)?;
    Ok(ScoredProposal::new(*b, map.class_id(), purity(ii, b), p_surround))
}

/// Baseline that ignores the ring: `p_surround = 0`, objectness = purity.
pub fn purity_only_score(ii: &IntegralImage, b: &BBox, class_id: u32) -> Result<ScoredProposal, ScoringError> {
    b.check_bounds(ii.width(), ii.height())?;
    Ok(ScoredProposal::new(*b, class_id, purity(ii, b), 0.0))
}

/// Scores every box independently; output order matches input order and a
/// failing box never aborts the rest.
pub fn score_batch(map: &ConfMap, boxes: &[BBox], cfg: &ScoringConfig) -> Vec<Result<ScoredProposal, ScoringError>> {
    ClassScorer::new(map).score_batch(boxes, cfg)
}

fn pool_order(a: &ScoredProposal, b: &ScoredProposal) -> Ordering {
    b.objectness
        .total_cmp(&a.objectness)
        .then_with(|| b.p_inside.total_cmp(&a.p_inside))
}

/// Keeps the `pool_size` best proposals. Ties on objectness fall back to
/// higher purity, then to earlier input position.
pub fn build_pool(
    image_id: impl Into<String>,
    class_id: u32,
    scored: &[ScoredProposal],
    cfg: &ScoringConfig,
) -> CandidatePool {
    let mut entries = scored.to_vec();
    // stable: equal keys keep input order
    entries.sort_by(pool_order);
    entries.truncate(cfg.pool_size.max(1));
    CandidatePool { image_id: image_id.into(), class_id, entries }
}

// Ring buffers grow to the largest ring seen; keeping one per worker thread
// avoids regrowing them for every rayon split.
#[cfg(feature = "parallel")]
std::thread_local! {
    static SCRATCH: core::cell::RefCell<RingScratch> = core::cell::RefCell::new(RingScratch::default());
}

/// A class map paired with its summed-area table.
#[derive(Debug, Clone)]
pub struct ClassScorer<'a> {
    map: &'a ConfMap,
    integral: IntegralImage,
}

impl<'a> ClassScorer<'a> {
    pub fn new(map: &'a ConfMap) -> Self {
        Self { map, integral: map.integral() }
    }

    pub fn map(&self) -> &ConfMap {
        self.map
    }

    pub fn integral(&self) -> &IntegralImage {
        &self.integral
    }

    pub fn class_id(&self) -> u32 {
        self.map.class_id()
    }

    pub fn purity(&self, b: &BBox) -> Result<f64, ScoringError> {
        b.check_bounds(self.map.width(), self.map.height())?;
        Ok(purity(&self.integral, b))
    }

    pub fn score(&self, b: &BBox, cfg: &ScoringConfig) -> Result<ScoredProposal, ScoringError> {
        score_with(self.map, &self.integral, None, b, cfg, &mut RingScratch::default())
    }

    pub fn score_ranked(&self, b: &BBox, cfg: &ScoringConfig, ranking: Ranking) -> Result<ScoredProposal, ScoringError> {
        match ranking {
            Ranking::Objectness => self.score(b, cfg),
            Ranking::PurityOnly => purity_only_score(&self.integral, b, self.class_id()),
        }
    }

    pub fn score_batch(&self, boxes: &[BBox], cfg: &ScoringConfig) -> Vec<Result<ScoredProposal, ScoringError>> {
        self.batch(boxes, cfg, Ranking::Objectness)
    }

    /// Bucket tables pay off once the rings cover the map several times.
    fn levels_for(&self, boxes: &[BBox], cfg: &ScoringConfig, ranking: Ranking) -> Option<LevelTable> {
        if ranking != Ranking::Objectness || cfg.top_fraction >= 1.0 {
            return None;
        }
        let (w, h) = (self.map.width(), self.map.height());
        let grow = cfg.enlarge_ratio * cfg.enlarge_ratio - 1.0;
        let ring_area: f64 = boxes.iter().map(|b| b.area() as f64 * grow).sum();
        (ring_area >= 4.0 * f64::from(w) * f64::from(h)).then(|| LevelTable::new(self.map))
    }

    #[cfg(not(feature = "parallel"))]
    fn batch(&self, boxes: &[BBox], cfg: &ScoringConfig, ranking: Ranking) -> Vec<Result<ScoredProposal, ScoringError>> {
        let levels = self.levels_for(boxes, cfg, ranking);
        let mut scratch = RingScratch::default();
        boxes.iter().map(|b| self.one(b, cfg, ranking, levels.as_ref(), &mut scratch)).collect()
    }

    #[cfg(feature = "parallel")]
    fn batch(&self, boxes: &[BBox], cfg: &ScoringConfig, ranking: Ranking) -> Vec<Result<ScoredProposal, ScoringError>> {
        use rayon::prelude::*;
        let levels = self.levels_for(boxes, cfg, ranking);
        boxes
            .par_iter()
            .with_min_len(64)
            .map(|b| SCRATCH.with(|s| self.one(b, cfg, ranking, levels.as_ref(), &mut s.borrow_mut())))
            .collect()
    }

    fn one(
        &self,
        b: &BBox,
        cfg: &ScoringConfig,
        ranking: Ranking,
        levels: Option<&LevelTable>,
        scratch: &mut RingScratch,
    ) -> Result<ScoredProposal, ScoringError> {
        match ranking {
            Ranking::Objectness => score_with(self.map, &self.integral, levels, b, cfg, scratch),
            Ranking::PurityOnly => purity_only_score(&self.integral, b, self.class_id()),
        }
    }

    /// Scores `boxes` under `ranking` and keeps the pool. Boxes that fail to
    /// score (out of bounds, skipped empty rings) are left out.
    pub fn pool(
        &self,
        image_id: impl Into<String>,
        boxes: &[BBox],
        cfg: &ScoringConfig,
        ranking: Ranking,
    ) -> CandidatePool {
        let scored: Vec<ScoredProposal> =
            self.batch(boxes, cfg, ranking).into_iter().filter_map(Result::ok).collect();
        build_pool(image_id, self.class_id(), &scored, cfg)
    }
}

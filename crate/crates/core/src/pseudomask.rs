//! Pseudo segmentation labels from class activation maps and a saliency map.
//!
//! Per pixel, every class whose normalized activation reaches the
//! foreground threshold claims the pixel. The outcome table:
//!
//! | claimants | saliency      | label      |
//! |-----------|---------------|------------|
//! | 0         | <= bg         | background |
//! | 0         | > bg          | ignore     |
//! | 1         | > bg          | that class |
//! | 1         | <= bg         | ignore     |
//! | >= 2      | any           | ignore     |

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confmap::{ConfMap, RawMap};

pub const BACKGROUND: u8 = 0;
pub const IGNORE: u8 = 255;
/// Largest class id that still gets a foreground code (`class_id + 1 < 255`).
pub const MAX_CLASS_ID: u32 = 253;

pub const DEFAULT_FG_THRESHOLD: f32 = 0.78;
pub const DEFAULT_BG_THRESHOLD: f32 = 0.06;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("map for class {class_id} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch { class_id: u32, want_w: u32, want_h: u32, got_w: u32, got_h: u32 },
    #[error("class {0} appears more than once")]
    DuplicateClass(u32),
    #[error("class id {0} has no mask code (max {MAX_CLASS_ID})")]
    ClassOutOfRange(u32),
    #[error("thresholds need 0 <= bg ({bg}) < fg ({fg}) <= 1")]
    BadThresholds { fg: f32, bg: f32 },
    #[error("mask holds {len} labels for {width}x{height}")]
    LengthMismatch { width: u32, height: u32, len: usize },
}

/// Mask code for a class.
pub fn class_code(class_id: u32) -> Result<u8, MaskError> {
    if class_id > MAX_CLASS_ID {
        return Err(MaskError::ClassOutOfRange(class_id));
    }
    Ok(class_id as u8 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub fg_threshold: f32,
    pub bg_threshold: f32,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self { fg_threshold: DEFAULT_FG_THRESHOLD, bg_threshold: DEFAULT_BG_THRESHOLD }
    }
}

impl MaskConfig {
    pub fn new(fg_threshold: f32, bg_threshold: f32) -> Result<Self, MaskError> {
        let cfg = Self { fg_threshold, bg_threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        let (fg, bg) = (self.fg_threshold, self.bg_threshold);
        if !(0.0 <= bg && bg < fg && fg <= 1.0) {
            return Err(MaskError::BadThresholds { fg, bg });
        }
        Ok(())
    }
}

/// Per-pixel label codes: 0 background, `class_id + 1` foreground, 255 ignore.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoMask {
    width: u32,
    height: u32,
    labels: Vec<u8>,
}

impl PseudoMask {
    pub fn new(width: u32, height: u32, labels: Vec<u8>) -> Result<Self, MaskError> {
        if labels.len() != width as usize * height as usize {
            return Err(MaskError::LengthMismatch { width, height, len: labels.len() });
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.labels[y as usize * self.width as usize + x as usize]
    }
}

/// Divides every activation by the map maximum. An all-zero map stays zero.
pub fn normalize_cam(raw: RawMap) -> ConfMap {
    let max = raw.max();
    let (class_id, width, height, mut values) = raw.into_parts();
    if max > 0.0 {
        for v in &mut values {
            *v = (*v / max).min(1.0);
        }
    }
    ConfMap::new(class_id, width, height, values).expect("max-normalized values lie in [0, 1]")
}

/// Label for one pixel given how many classes claim it, the claiming class
/// code (meaningful only when `claimants == 1`), and the saliency value.
#[inline]
pub fn pixel_label(claimants: usize, claimant_code: u8, saliency: f32, cfg: &MaskConfig) -> u8 {
    let salient = saliency > cfg.bg_threshold;
    match (claimants, salient) {
        (0, false) => BACKGROUND,
        (0, true) => IGNORE,
        (1, true) => claimant_code,
        (1, false) => IGNORE,
        _ => IGNORE,
    }
}

/// Builds the pseudo mask. `cams` holds one normalized map per image label.
pub fn generate_mask(cams: &[ConfMap], saliency: &ConfMap, cfg: &MaskConfig) -> Result<PseudoMask, MaskError> {
    cfg.validate()?;
    let (w, h) = (saliency.width(), saliency.height());
    let mut codes = Vec::with_capacity(cams.len());
    for cam in cams {
        if !cam.same_shape(saliency) {
            return Err(MaskError::DimensionMismatch {
                class_id: cam.class_id(),
                want_w: w,
                want_h: h,
                got_w: cam.width(),
                got_h: cam.height(),
            });
        }
        let code = class_code(cam.class_id())?;
        if codes.contains(&code) {
            return Err(MaskError::DuplicateClass(cam.class_id()));
        }
        codes.push(code);
    }

    let labels = saliency
        .values()
        .iter()
        .enumerate()
        .map(|(i, &sal)| {
            let mut claimants = 0;
            let mut code = BACKGROUND;
            for (cam, &c) in cams.iter().zip(&codes) {
                if cam.values()[i] >= cfg.fg_threshold {
                    claimants += 1;
                    code = c;
                }
            }
            pixel_label(claimants, code, sal, cfg)
        })
        .collect();
    Ok(PseudoMask { width: w, height: h, labels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeCount {
    pub count: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub width: u32,
    pub height: u32,
    pub total: u64,
    /// Keyed by label code (0 background, 255 ignore, others `class_id + 1`).
    pub codes: BTreeMap<u8, CodeCount>,
    pub all_ignore: bool,
}

impl MaskStats {
    pub fn count(&self, code: u8) -> u64 {
        self.codes.get(&code).map_or(0, |c| c.count)
    }

    pub fn fraction(&self, code: u8) -> f64 {
        self.codes.get(&code).map_or(0.0, |c| c.fraction)
    }

    pub fn foreground(&self) -> u64 {
        self.codes
            .iter()
            .filter(|(&k, _)| k != BACKGROUND && k != IGNORE)
            .map(|(_, c)| c.count)
            .sum()
    }
}

pub fn mask_stats(mask: &PseudoMask) -> MaskStats {
    let mut hist = [0u64; 256];
    for &l in &mask.labels {
        hist[l as usize] += 1;
    }
    let total = mask.labels.len() as u64;
    let codes = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(code, &count)| (code as u8, CodeCount { count, fraction: count as f64 / total as f64 }))
        .collect();
    MaskStats {
        width: mask.width,
        height: mask.height,
        total,
        codes,
        all_ignore: total > 0 && hist[IGNORE as usize] == total,
    }
}

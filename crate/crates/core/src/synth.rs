//! Synthetic part-trap scenes, proposal families, and a naive reference
//! scorer.
//!
//! Each object paints a three-level confidence map: background, a body level
//! over the ground-truth box, and a brighter discriminative part inside it.
//! Purity alone prefers boxes on the part; the surrounding ring exposes them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confmap::{ConfMap, ConfMapError};
use crate::eval::{GroundTruth, GtEntry, ImageRecord};
use crate::geometry::{iou, BBox};
use crate::scoring::{ClassScorer, EmptyRingPolicy, ScoredProposal, ScoringConfig, ScoringError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("could not certify a trap scene after {0} attempts")]
    Uncertifiable(u32),
    #[error(transparent)]
    Map(#[from] ConfMapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class_id: u32,
    pub gt_box: BBox,
    pub part_box: BBox,
    pub body_conf: f32,
    pub part_conf: f32,
    pub bg_conf: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub image_w: u32,
    pub image_h: u32,
    pub objects: Vec<ObjectSpec>,
    pub noise_sigma: f64,
    pub blur_radius: u32,
    pub seed: u64,
    /// Same-class ground-truth boxes may overlap (the linked-instances
    /// failure corpus).
    #[serde(default)]
    pub linked: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.image_w == 0 || self.image_h == 0 {
            return bad("image has zero extent".into());
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return bad(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !o.gt_box.fits_in(self.image_w, self.image_h) {
                return bad(format!("object {i}: gt box {} outside image", o.gt_box));
            }
            if !o.gt_box.contains(&o.part_box) || o.gt_box == o.part_box {
                return bad(format!("object {i}: part box {} not strictly inside {}", o.part_box, o.gt_box));
            }
            let confs = [o.bg_conf, o.body_conf, o.part_conf];
            if confs.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return bad(format!("object {i}: confidences must lie in [0, 1]"));
            }
            if !(o.part_conf > o.body_conf && o.body_conf > o.bg_conf) {
                return bad(format!("object {i}: need part_conf > body_conf > bg_conf"));
            }
            if !self.linked {
                for (j, p) in self.objects[..i].iter().enumerate() {
                    if p.class_id == o.class_id && p.gt_box.intersection(&o.gt_box).is_some() {
                        return bad(format!("objects {j} and {i} overlap; set linked to allow same-class overlap"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.objects.iter().map(|o| o.class_id).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

/// Generated maps (one per class present, ascending class id) and the
/// ground truth they were painted from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub maps: Vec<ConfMap>,
    pub gt: Vec<GtEntry>,
}

impl Scene {
    pub fn map(&self, class_id: u32) -> Option<&ConfMap> {
        self.maps.iter().find(|m| m.class_id() == class_id)
    }
}

pub fn gen_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let (w, h) = (spec.image_w as usize, spec.image_h as usize);
    let mut maps = Vec::new();
    for class_id in spec.classes() {
        let objs: Vec<&ObjectSpec> = spec.objects.iter().filter(|o| o.class_id == class_id).collect();
        let bg = objs.iter().map(|o| o.bg_conf).fold(0.0f32, f32::max);
        let mut values = alloc::vec![bg; w * h];
        for o in &objs {
            paint(&mut values, w, &o.gt_box, o.body_conf);
        }
        for o in &objs {
            paint(&mut values, w, &o.part_box, o.part_conf);
        }
        if spec.blur_radius > 0 {
            box_blur(&mut values, w, h, spec.blur_radius as usize);
        }
        if spec.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(u64::from(class_id) + 1);
            let normal = Normal::new(0.0f64, spec.noise_sigma)
                .map_err(|e| SynthError::InvalidSpec(format!("noise: {e}")))?;
            for v in &mut values {
                *v = (f64::from(*v) + normal.sample(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }
        maps.push(ConfMap::new(class_id, spec.image_w, spec.image_h, values)?);
    }
    let gt = spec.objects.iter().map(|o| GtEntry::new(o.class_id, o.gt_box)).collect();
    Ok(Scene { spec: spec.clone(), maps, gt })
}

fn paint(values: &mut [f32], w: usize, b: &BBox, level: f32) {
    for y in b.y0() as usize..b.y1() as usize {
        for v in &mut values[y * w + b.x0() as usize..y * w + b.x1() as usize] {
            *v = v.max(level);
        }
    }
}

/// Separable mean filter over a `(2r+1)`-wide window clipped at the borders.
fn box_blur(values: &mut [f32], w: usize, h: usize, r: usize) {
    let mut prefix = Vec::with_capacity(w.max(h) + 1);
    let mut line = Vec::with_capacity(w.max(h));
    let mut blur_line = |line: &mut Vec<f32>| {
        prefix.clear();
        prefix.push(0.0f64);
        let mut acc = 0.0;
        for &v in line.iter() {
            acc += f64::from(v);
            prefix.push(acc);
        }
        let n = line.len();
        for (i, v) in line.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(n);
            *v = ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).clamp(0.0, 1.0) as f32;
        }
    };
    for y in 0..h {
        line.clear();
        line.extend_from_slice(&values[y * w..(y + 1) * w]);
        blur_line(&mut line);
        values[y * w..(y + 1) * w].copy_from_slice(&line);
    }
    for x in 0..w {
        line.clear();
        line.extend((0..h).map(|y| values[y * w + x]));
        blur_line(&mut line);
        for (y, v) in line.iter().enumerate() {
            values[y * w + x] = *v;
        }
    }
}

/// Proposals requested per object (`tight`, `partial`, `loose`) and per
/// scene (`background`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub tight: usize,
    pub partial: usize,
    pub loose: usize,
    pub background: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    /// Max corner displacement of tight boxes, as a fraction of box size.
    pub tight_jitter: f64,
    /// Max margin added on each side of loose boxes, as a fraction of box size.
    pub loose_margin: f64,
    /// Minimum share of the part box a partial proposal must cover.
    pub partial_min_cover: f64,
    pub max_retries: u32,
}

impl Default for JitterParams {
    fn default() -> Self {
        Self { tight_jitter: 0.15, loose_margin: 0.6, partial_min_cover: 0.8, max_retries: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKind {
    Tight,
    Partial,
    Loose,
    Background,
}

/// A generated proposal and the object index it was drawn around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BBox,
    pub kind: ProposalKind,
    pub object: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProposalFamily {
    pub tight: Vec<Proposal>,
    pub partial: Vec<Proposal>,
    pub loose: Vec<Proposal>,
    pub background: Vec<Proposal>,
    /// Families that could not be filled, e.g. loose boxes around a
    /// full-image object.
    pub warnings: Vec<String>,
}

impl ProposalFamily {
    /// All proposals in a fixed order: tight, partial, loose, background.
    pub fn all(&self) -> impl Iterator<Item = &Proposal> {
        self.tight.iter().chain(&self.partial).chain(&self.loose).chain(&self.background)
    }

    pub fn boxes(&self) -> Vec<BBox> {
        self.all().map(|p| p.bbox).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.all().next().is_none()
    }
}

fn cover(part: &BBox, b: &BBox) -> f64 {
    part.intersection_area(b) as f64 / part.area() as f64
}

pub fn is_tight(b: &BBox, gt: &BBox) -> bool {
    iou(b, gt) >= 0.5
}

/// Inside the object, covering most of its part, and too small to count as a
/// hit.
pub fn is_partial(b: &BBox, o: &ObjectSpec, min_cover: f64) -> bool {
    o.gt_box.contains(b) && cover(&o.part_box, b) >= min_cover && iou(b, &o.gt_box) < 0.5
}

pub fn is_loose(b: &BBox, gt: &BBox) -> bool {
    b.contains(gt) && b != gt
}

pub fn is_background(b: &BBox, objects: &[ObjectSpec]) -> bool {
    objects.iter().all(|o| o.gt_box.intersection(b).is_none())
}

fn uniform_i64(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn sample_box(rng: &mut ChaCha8Rng, x0: (i64, i64), y0: (i64, i64), x1: (i64, i64), y1: (i64, i64), w: u32, h: u32) -> Option<BBox> {
    let clip = |v: i64, lim: u32| v.clamp(0, i64::from(lim));
    let b = BBox::from_signed(
        clip(uniform_i64(rng, x0.0, x0.1), w),
        clip(uniform_i64(rng, y0.0, y0.1), h),
        clip(uniform_i64(rng, x1.0, x1.1), w),
        clip(uniform_i64(rng, y1.0, y1.1), h),
    )
    .ok()?;
    Some(b)
}

/// Draws each requested family by rejection sampling; every returned box
/// satisfies its family predicate.
pub fn gen_proposals(spec: &SceneSpec, counts: &FamilyCounts, jitter: &JitterParams, seed: u64) -> ProposalFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.image_w, spec.image_h);
    let mut fam = ProposalFamily::default();
    let retries = jitter.max_retries.max(1) as usize;

    for (idx, o) in spec.objects.iter().enumerate() {
        let g = o.gt_box;
        let (gx0, gy0, gx1, gy1) = (i64::from(g.x0()), i64::from(g.y0()), i64::from(g.x1()), i64::from(g.y1()));
        let (gw, gh) = (i64::from(g.width()), i64::from(g.height()));

        let jx = libm::ceil(gw as f64 * jitter.tight_jitter) as i64;
        let jy = libm::ceil(gh as f64 * jitter.tight_jitter) as i64;
        fill(&mut fam.tight, &mut fam.warnings, counts.tight, retries, "tight", idx, &mut rng, |rng| {
            sample_box(rng, (gx0 - jx, gx0 + jx), (gy0 - jy, gy0 + jy), (gx1 - jx, gx1 + jx), (gy1 - jy, gy1 + jy), w, h)
                .filter(|b| is_tight(b, &g))
                .map(|bbox| Proposal { bbox, kind: ProposalKind::Tight, object: Some(idx) })
        });

        let p = o.part_box;
        let (px0, py0, px1, py1) = (i64::from(p.x0()), i64::from(p.y0()), i64::from(p.x1()), i64::from(p.y1()));
        let (sx, sy) = (i64::from(p.width()) / 10, i64::from(p.height()) / 10);
        let (ex, ey) = (i64::from(p.width()), i64::from(p.height()));
        fill(&mut fam.partial, &mut fam.warnings, counts.partial, retries, "partial", idx, &mut rng, |rng| {
            sample_box(
                rng,
                ((px0 - ex).max(gx0), px0 + sx),
                ((py0 - ey).max(gy0), py0 + sy),
                (px1 - sx, (px1 + ex).min(gx1)),
                (py1 - sy, (py1 + ey).min(gy1)),
                w,
                h,
            )
            .filter(|b| is_partial(b, o, jitter.partial_min_cover))
            .map(|bbox| Proposal { bbox, kind: ProposalKind::Partial, object: Some(idx) })
        });

        let mx = libm::ceil(gw as f64 * jitter.loose_margin) as i64;
        let my = libm::ceil(gh as f64 * jitter.loose_margin) as i64;
        fill(&mut fam.loose, &mut fam.warnings, counts.loose, retries, "loose", idx, &mut rng, |rng| {
            sample_box(rng, (gx0 - mx, gx0), (gy0 - my, gy0), (gx1, gx1 + mx), (gy1, gy1 + my), w, h)
                .filter(|b| is_loose(b, &g))
                .map(|bbox| Proposal { bbox, kind: ProposalKind::Loose, object: Some(idx) })
        });
    }

    let (min_side, max_side) = background_sizes(spec);
    let mut fails = 0usize;
    while fam.background.len() < counts.background {
        let bw = rng.random_range(min_side..=max_side).min(w);
        let bh = rng.random_range(min_side..=max_side).min(h);
        let x0 = rng.random_range(0..=w - bw);
        let y0 = rng.random_range(0..=h - bh);
        let b = BBox::new(x0, y0, x0 + bw, y0 + bh).expect("positive extent");
        if is_background(&b, &spec.objects) {
            fam.background.push(Proposal { bbox: b, kind: ProposalKind::Background, object: None });
            fails = 0;
        } else {
            fails += 1;
            if fails >= retries {
                fam.warnings.push(format!(
                    "background: placed {} of {} boxes before giving up",
                    fam.background.len(),
                    counts.background
                ));
                break;
            }
        }
    }
    fam
}

fn background_sizes(spec: &SceneSpec) -> (u32, u32) {
    let mut lo = u32::MAX;
    let mut hi = 0;
    for o in &spec.objects {
        lo = lo.min(o.part_box.width().min(o.part_box.height()));
        hi = hi.max(o.gt_box.width().max(o.gt_box.height()));
    }
    if spec.objects.is_empty() {
        let side = spec.image_w.min(spec.image_h);
        return ((side / 8).max(1), (side / 2).max(1));
    }
    (lo.max(1), hi.max(lo.max(1)))
}

#[allow(clippy::too_many_arguments)]
fn fill(
    out: &mut Vec<Proposal>,
    warnings: &mut Vec<String>,
    want: usize,
    retries: usize,
    kind: &str,
    object: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Option<Proposal>,
) {
    let mut got = 0;
    let mut fails = 0;
    while got < want {
        match draw(rng) {
            Some(p) => {
                out.push(p);
                got += 1;
                fails = 0;
            }
            None => {
                fails += 1;
                if fails >= retries {
                    warnings.push(format!("{kind}: object {object}: placed {got} of {want} boxes before giving up"));
                    return;
                }
            }
        }
    }
}

/// Reference scorer: direct pixel loops and a full sort, no summed-area
/// table and no partial selection.
pub fn oracle_score(map: &ConfMap, b: &BBox, cfg: &ScoringConfig) -> Result<ScoredProposal, ScoringError> {
    b.check_bounds(map.width(), map.height())?;
    let mut inside = 0.0f64;
    for y in b.y0()..b.y1() {
        for x in b.x0()..b.x1() {
            inside += f64::from(map.get(x, y));
        }
    }
    let p_inside = inside / b.area() as f64;

    let outer = b.enlarge(cfg.enlarge_ratio, map.width(), map.height())?;
    let mut ring = Vec::new();
    for y in outer.y0()..outer.y1() {
        for x in outer.x0()..outer.x1() {
            if !b.contains_pixel(x, y) {
                ring.push(f64::from(map.get(x, y)));
            }
        }
    }
    let p_surround = if ring.is_empty() {
        match cfg.empty_ring_policy {
            EmptyRingPolicy::Zero => 0.0,
            EmptyRingPolicy::Skip => return Err(ScoringError::EmptyRing(*b)),
        }
    } else {
        ring.sort_by(|a, b| b.total_cmp(a));
        let exact = cfg.top_fraction * ring.len() as f64;
        let mut k = libm::ceil(exact) as usize;
        // 0.3 * 10 evaluates to 3.0000000000000004; count it as 3
        if k >= 1 && (k - 1) as f64 >= exact * (1.0 - 1e-12) {
            k -= 1;
        }
        let k = k.clamp(1, ring.len());
        ring[..k].iter().sum::<f64>() / k as f64
    };
    Ok(ScoredProposal::new(*b, map.class_id(), p_inside, p_surround))
}

/// Knobs for randomly drawn, certified trap scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub image_w: u32,
    pub image_h: u32,
    pub num_classes: u32,
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_object_side: u32,
    pub max_object_side: u32,
    /// Part side length as a fraction of the object side.
    pub part_scale: (f64, f64),
    pub part_conf: (f32, f32),
    pub body_conf: (f32, f32),
    pub bg_conf: (f32, f32),
    pub noise_sigma: f64,
    pub blur_radius: u32,
    /// Generate two touching or overlapping same-class objects per scene.
    pub linked: bool,
    pub counts: FamilyCounts,
    pub jitter: JitterParams,
}

impl Default for TrapParams {
    fn default() -> Self {
        Self {
            image_w: 128,
            image_h: 128,
            num_classes: 3,
            min_objects: 1,
            max_objects: 2,
            min_object_side: 28,
            max_object_side: 56,
            part_scale: (0.25, 0.4),
            part_conf: (0.85, 1.0),
            body_conf: (0.45, 0.7),
            bg_conf: (0.0, 0.1),
            noise_sigma: 0.0,
            blur_radius: 0,
            linked: false,
            counts: FamilyCounts { tight: 8, partial: 8, loose: 4, background: 8 },
            jitter: JitterParams::default(),
        }
    }
}

impl TrapParams {
    /// The noisy, blurred variant used for the statistical corpus.
    pub fn noisy() -> Self {
        Self { noise_sigma: 0.08, blur_radius: 1, ..Self::default() }
    }
}

const MAX_CERTIFY_ATTEMPTS: u32 = 1000;

fn range_f32(rng: &mut ChaCha8Rng, r: (f32, f32)) -> f32 {
    if r.0 >= r.1 {
        r.0
    } else {
        rng.random_range(r.0..r.1)
    }
}

fn range_f64(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.0 >= r.1 {
        r.0
    } else {
        rng.random_range(r.0..r.1)
    }
}

/// Draws a scene whose every object is a certified trap: on the noiseless
/// map, the part box is purer than the ground-truth box while the
/// ground-truth box has the higher objectness under the default scoring
/// config. Uncertified draws are rejected and redrawn.
pub fn random_trap_scene(params: &TrapParams, seed: u64) -> Result<SceneSpec, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_CERTIFY_ATTEMPTS {
        if let Some(spec) = draw_scene(params, seed, &mut rng) {
            if certify(&spec)? {
                return Ok(spec);
            }
        }
    }
    Err(SynthError::Uncertifiable(MAX_CERTIFY_ATTEMPTS))
}

fn draw_object(params: &TrapParams, rng: &mut ChaCha8Rng, class_id: u32, gt: BBox) -> ObjectSpec {
    let ps = range_f64(rng, params.part_scale);
    let pw = ((f64::from(gt.width()) * ps) as u32).clamp(1, gt.width() - 1);
    let ph = ((f64::from(gt.height()) * ps) as u32).clamp(1, gt.height() - 1);
    // parts may sit against the object border, like a head or a wheel
    let px = gt.x0() + rng.random_range(0..=gt.width() - pw);
    let py = gt.y0() + rng.random_range(0..=gt.height() - ph);
    let part_box = BBox::new(px, py, px + pw, py + ph).expect("positive extent");
    let part_conf = range_f32(rng, params.part_conf);
    let body_conf = range_f32(rng, params.body_conf).min(part_conf - 0.05);
    let bg_conf = range_f32(rng, params.bg_conf).min(body_conf - 0.05).max(0.0);
    ObjectSpec { class_id, gt_box: gt, part_box, body_conf, part_conf, bg_conf }
}

fn draw_scene(params: &TrapParams, seed: u64, rng: &mut ChaCha8Rng) -> Option<SceneSpec> {
    let (w, h) = (params.image_w, params.image_h);
    let side = |rng: &mut ChaCha8Rng, lim: u32| {
        rng.random_range(params.min_object_side..=params.max_object_side).min(lim.saturating_sub(2)).max(4)
    };
    let mut objects: Vec<ObjectSpec> = Vec::new();

    if params.linked {
        let class_id = rng.random_range(0..params.num_classes.max(1));
        let (bw, bh) = (side(rng, w / 2), side(rng, h));
        let overlap = rng.random_range(0..=bw / 4);
        let total = 2 * bw - overlap;
        if total + 2 > w || bh + 2 > h {
            return None;
        }
        let x0 = rng.random_range(1..=w - total - 1);
        let y0 = rng.random_range(1..=h - bh - 1);
        let a = BBox::new(x0, y0, x0 + bw, y0 + bh).ok()?;
        let b = BBox::new(x0 + bw - overlap, y0, x0 + total, y0 + bh).ok()?;
        objects.push(draw_object(params, rng, class_id, a));
        objects.push(draw_object(params, rng, class_id, b));
    } else {
        let n = rng.random_range(params.min_objects..=params.max_objects.max(params.min_objects));
        for _ in 0..n {
            let mut placed = false;
            for _ in 0..100 {
                let (bw, bh) = (side(rng, w), side(rng, h));
                if bw + 2 > w || bh + 2 > h {
                    return None;
                }
                let x0 = rng.random_range(1..=w - bw - 1);
                let y0 = rng.random_range(1..=h - bh - 1);
                let gt = BBox::new(x0, y0, x0 + bw, y0 + bh).ok()?;
                // keep other objects out of this one's context ring
                let guard = gt.enlarge(1.5, w, h).ok()?;
                if objects.iter().any(|o| o.gt_box.enlarge(1.5, w, h).map_or(true, |g| g.intersection(&guard).is_some())) {
                    continue;
                }
                let class_id = rng.random_range(0..params.num_classes.max(1));
                objects.push(draw_object(params, rng, class_id, gt));
                placed = true;
                break;
            }
            if !placed {
                return None;
            }
        }
    }
    let spec = SceneSpec {
        image_w: w,
        image_h: h,
        objects,
        noise_sigma: params.noise_sigma,
        blur_radius: params.blur_radius,
        seed,
        linked: params.linked,
    };
    spec.validate().ok()?;
    Some(spec)
}

/// Trap inequalities on the noiseless, unblurred rendering of `spec`. Linked
/// scenes only certify the purity side: a touching twin in the ring is the
/// failure they exist to show.
pub fn certify(spec: &SceneSpec) -> Result<bool, SynthError> {
    let clean = SceneSpec { noise_sigma: 0.0, blur_radius: 0, ..spec.clone() };
    let scene = gen_scene(&clean)?;
    let cfg = ScoringConfig::default();
    for o in &spec.objects {
        let map = scene.map(o.class_id).expect("one map per class");
        let scorer = ClassScorer::new(map);
        let (Ok(tight), Ok(part)) = (scorer.score(&o.gt_box, &cfg), scorer.score(&o.part_box, &cfg)) else {
            return Ok(false);
        };
        let separated = spec.linked || tight.objectness() > part.objectness();
        if !(part.p_inside() > tight.p_inside() && separated) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A certified scene with its proposals, as an evaluation record whose
/// annotated classes are the classes present.
pub fn trap_record(params: &TrapParams, seed: u64, image_id: impl Into<String>) -> Result<(Scene, ProposalFamily, ImageRecord), SynthError> {
    let spec = random_trap_scene(params, seed)?;
    let scene = gen_scene(&spec)?;
    let family = gen_proposals(&spec, &params.counts, &params.jitter, seed ^ 0x9E37_79B9_7F4A_7C15);
    let record = ImageRecord {
        gt: GroundTruth { image_id: image_id.into(), entries: scene.gt.clone() },
        maps: scene.maps.clone(),
        proposals: family.boxes(),
    };
    Ok((scene, family, record))
}

/// `n` certified scenes; scene `i` uses seed `base_seed + i`.
pub fn trap_corpus(params: &TrapParams, n: usize, base_seed: u64) -> Result<Vec<ImageRecord>, SynthError> {
    (0..n)
        .map(|i| trap_record(params, base_seed.wrapping_add(i as u64), format!("scene_{i:05}")).map(|(_, _, r)| r))
        .collect()
}

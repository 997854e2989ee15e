//! Detection-quality metrics at IoU >= 0.5 and the ablation sweep.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::confmap::ConfMap;
use crate::geometry::{iou, BBox};
use crate::scoring::{CandidatePool, ClassScorer, Ranking, ScoringConfig};

/// Matching threshold; a box hits when IoU is at least this value.
pub const IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_KS: [usize; 6] = [1, 5, 10, 50, 100, 200];

#[inline]
fn hits(a: &BBox, b: &BBox) -> bool {
    iou(a, b) >= IOU_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GtEntry {
    pub class_id: u32,
    pub bbox: BBox,
    /// Excluded from every count when set.
    #[serde(default)]
    pub ignore: bool,
}

impl GtEntry {
    pub fn new(class_id: u32, bbox: BBox) -> Self {
        Self { class_id, bbox, ignore: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    pub entries: Vec<GtEntry>,
}

impl GroundTruth {
    /// Classes with at least one counted instance, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.entries.iter().filter(|e| !e.ignore).map(|e| e.class_id).collect();
        set.into_iter().collect()
    }

    pub fn instances(&self, class_id: u32) -> impl Iterator<Item = &GtEntry> {
        self.entries.iter().filter(move |e| e.class_id == class_id && !e.ignore)
    }
}

/// One image with its class maps, annotations, and class-agnostic proposals.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub gt: GroundTruth,
    pub maps: Vec<ConfMap>,
    pub proposals: Vec<BBox>,
}

impl ImageRecord {
    pub fn image_id(&self) -> &str {
        &self.gt.image_id
    }

    pub fn map(&self, class_id: u32) -> Option<&ConfMap> {
        self.maps.iter().find(|m| m.class_id() == class_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    /// Best recall reachable with one box per (image, class).
    pub upper_bound: f64,
    pub total_instances: usize,
}

impl RecallCurve {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }
}

fn pool_index(pools: &[CandidatePool]) -> BTreeMap<(&str, u32), &CandidatePool> {
    pools.iter().map(|p| ((p.image_id.as_str(), p.class_id), p)).collect()
}

/// An instance counts as recalled at `k` when any of the first `k` pool
/// entries for its (image, class) overlaps it at IoU >= 0.5. Missing pools
/// recall nothing.
pub fn recall_at_k(pools: &[CandidatePool], gt: &[GroundTruth], ks: &[usize]) -> RecallCurve {
    let index = pool_index(pools);
    let mut recalled = alloc::vec![0usize; ks.len()];
    let mut total = 0usize;
    let mut pairs = 0usize;
    for image in gt {
        for class_id in image.classes() {
            pairs += 1;
            let pool = index.get(&(image.image_id.as_str(), class_id));
            for inst in image.instances(class_id) {
                total += 1;
                let Some(pool) = pool else { continue };
                // first pool rank that hits this instance
                if let Some(rank) = pool.entries.iter().position(|e| hits(&e.bbox(), &inst.bbox)) {
                    for (slot, &k) in recalled.iter_mut().zip(ks) {
                        if rank < k {
                            *slot += 1;
                        }
                    }
                }
            }
        }
    }
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    RecallCurve {
        ks: ks.to_vec(),
        recall: recalled.into_iter().map(frac).collect(),
        upper_bound: frac(pairs),
        total_instances: total,
    }
}

/// The single box chosen for an (image, class).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopBox {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BBox,
}

impl TopBox {
    pub fn from_pool(pool: &CandidatePool) -> Option<Self> {
        pool.top1().map(|p| TopBox { image_id: pool.image_id.clone(), class_id: pool.class_id, bbox: p.bbox() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorLocResult {
    pub per_class: BTreeMap<u32, f64>,
    /// Positive images per class.
    pub images: BTreeMap<u32, usize>,
    pub mean: f64,
}

/// Per class, the share of positive images whose top box hits some instance
/// of the class; `mean` averages over classes.
pub fn corloc(top1: &[TopBox], gt: &[GroundTruth]) -> CorLocResult {
    let tops: BTreeMap<(&str, u32), &TopBox> =
        top1.iter().map(|t| ((t.image_id.as_str(), t.class_id), t)).collect();
    let mut hit_count: BTreeMap<u32, usize> = BTreeMap::new();
    let mut images: BTreeMap<u32, usize> = BTreeMap::new();
    for image in gt {
        for class_id in image.classes() {
            *images.entry(class_id).or_default() += 1;
            let hit = tops
                .get(&(image.image_id.as_str(), class_id))
                .is_some_and(|t| image.instances(class_id).any(|e| hits(&t.bbox, &e.bbox)));
            if hit {
                *hit_count.entry(class_id).or_default() += 1;
            }
        }
    }
    let per_class: BTreeMap<u32, f64> = images
        .iter()
        .map(|(&c, &n)| (c, hit_count.get(&c).copied().unwrap_or(0) as f64 / n as f64))
        .collect();
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    CorLocResult { per_class, images, mean }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Mean of the interpolated precision at recall 0, 0.1, ..., 1.
    #[default]
    ElevenPoint,
    /// Area under the monotone precision envelope.
    Area,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub per_class: BTreeMap<u32, f64>,
    /// Classes that have detections but no counted ground truth.
    pub undefined: Vec<u32>,
    pub map: f64,
    pub iou_threshold: f64,
    pub mode: ApMode,
}

/// Precision/recall points of one class after greedy matching in
/// descending score order. A detection whose best-overlap instance is
/// already taken is a false positive; one whose best overlap is an ignored
/// instance is dropped.
pub fn precision_recall(detections: &[&Detection], gt: &[GroundTruth], class_id: u32) -> (Vec<f64>, Vec<f64>) {
    let by_image: BTreeMap<&str, &GroundTruth> = gt.iter().map(|g| (g.image_id.as_str(), g)).collect();
    let npos: usize = gt.iter().map(|g| g.instances(class_id).count()).sum();
    let mut used: BTreeMap<&str, Vec<bool>> = BTreeMap::new();

    let mut order: Vec<&Detection> = detections.to_vec();
    // stable: equal scores keep input order
    order.sort_by(|a, b| b.score.total_cmp(&a.score));

    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prec, mut rec) = (Vec::new(), Vec::new());
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        if let Some(g) = by_image.get(d.image_id.as_str()) {
            for (i, e) in g.entries.iter().enumerate() {
                if e.class_id != class_id {
                    continue;
                }
                let o = iou(&d.bbox, &e.bbox);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((i, o));
                }
            }
        }
        match best {
            Some((i, o)) if o >= IOU_THRESHOLD => {
                let g = by_image[d.image_id.as_str()];
                if g.entries[i].ignore {
                    continue;
                }
                let flags = used.entry(g.image_id.as_str()).or_insert_with(|| alloc::vec![false; g.entries.len()]);
                if flags[i] {
                    fp += 1;
                } else {
                    flags[i] = true;
                    tp += 1;
                }
            }
            _ => fp += 1,
        }
        prec.push(tp as f64 / (tp + fp) as f64);
        rec.push(if npos == 0 { 0.0 } else { tp as f64 / npos as f64 });
    }
    (prec, rec)
}

pub fn average_precision(prec: &[f64], rec: &[f64], mode: ApMode) -> f64 {
    match mode {
        ApMode::ElevenPoint => {
            let mut ap = 0.0;
            for i in 0..=10 {
                let t = f64::from(i) / 10.0;
                let p = rec
                    .iter()
                    .zip(prec)
                    .filter(|(&r, _)| r >= t)
                    .map(|(_, &p)| p)
                    .fold(0.0, f64::max);
                ap += p;
            }
            ap / 11.0
        }
        ApMode::Area => {
            let mut mrec = Vec::with_capacity(rec.len() + 2);
            let mut mpre = Vec::with_capacity(prec.len() + 2);
            mrec.push(0.0);
            mpre.push(0.0);
            mrec.extend_from_slice(rec);
            mpre.extend_from_slice(prec);
            mrec.push(1.0);
            mpre.push(0.0);
            for i in (0..mpre.len() - 1).rev() {
                mpre[i] = mpre[i].max(mpre[i + 1]);
            }
            (1..mrec.len())
                .filter(|&i| mrec[i] != mrec[i - 1])
                .map(|i| (mrec[i] - mrec[i - 1]) * mpre[i])
                .sum()
        }
    }
}

/// VOC-style AP per class and their mean. Classes without counted ground
/// truth are reported as undefined and left out of the mean.
pub fn voc_ap(detections: &[Detection], gt: &[GroundTruth], mode: ApMode) -> ApResult {
    let mut classes: BTreeSet<u32> = detections.iter().map(|d| d.class_id).collect();
    let gt_classes: BTreeSet<u32> = gt.iter().flat_map(|g| g.classes()).collect();
    classes.extend(&gt_classes);

    let mut per_class = BTreeMap::new();
    let mut undefined = Vec::new();
    for c in classes {
        if !gt_classes.contains(&c) {
            undefined.push(c);
            continue;
        }
        let dets: Vec<&Detection> = detections.iter().filter(|d| d.class_id == c).collect();
        let (prec, rec) = precision_recall(&dets, gt, c);
        per_class.insert(c, average_precision(&prec, &rec, mode));
    }
    let map = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    ApResult { per_class, undefined, map, iou_threshold: IOU_THRESHOLD, mode }
}

/// Pools for every annotated (image, class) of the corpus, in corpus order
/// then ascending class id. Classes without a map get no pool.
pub fn rank_corpus(corpus: &[ImageRecord], cfg: &ScoringConfig, ranking: Ranking) -> Vec<CandidatePool> {
    let per_image = |rec: &ImageRecord| -> Vec<CandidatePool> {
        rec.gt
            .classes()
            .into_iter()
            .filter_map(|c| rec.map(c))
            .map(|m| ClassScorer::new(m).pool(rec.image_id(), &rec.proposals, cfg, ranking))
            .collect()
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        corpus.par_iter().map(per_image).collect::<Vec<_>>().into_iter().flatten().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        corpus.iter().flat_map(per_image).collect()
    }
}

pub fn corpus_gt(corpus: &[ImageRecord]) -> Vec<GroundTruth> {
    corpus.iter().map(|r| r.gt.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub ratio: f64,
    pub fraction: f64,
    pub recall_at_1: f64,
    /// Mean objectness of the top-1 box over all pools.
    pub mean_objectness: f64,
    pub is_default: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    /// Purity-only ranking over the same corpus.
    pub purity_only: SweepCell,
    pub upper_bound: f64,
    pub total_instances: usize,
}

impl SweepTable {
    pub fn cell(&self, ratio: f64, fraction: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| same(c.ratio, ratio) && same(c.fraction, fraction))
    }

    /// Tab-separated report, one row per cell, purity-only baseline last.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("ratio\tfraction\trecall_at_1\tmean_objectness\tdefault\n");
        for c in self.cells.iter().chain(core::iter::once(&self.purity_only)) {
            let ratio = if c.ratio.is_nan() { String::from("purity") } else { alloc::format!("{}", c.ratio) };
            let frac = if c.fraction.is_nan() { String::from("-") } else { alloc::format!("{}", c.fraction) };
            let _ = writeln!(
                s,
                "{ratio}\t{frac}\t{:.6}\t{:.6}\t{}",
                c.recall_at_1,
                c.mean_objectness,
                if c.is_default { "*" } else { "" }
            );
        }
        let _ = writeln!(s, "# upper_bound_at_1\t{:.6}\tinstances\t{}", self.upper_bound, self.total_instances);
        s
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

fn sweep_cell(corpus: &[ImageRecord], gt: &[GroundTruth], cfg: &ScoringConfig, ranking: Ranking) -> (SweepCell, RecallCurve) {
    let pools = rank_corpus(corpus, cfg, ranking);
    let curve = recall_at_k(&pools, gt, &[1]);
    let tops: Vec<f64> = pools.iter().filter_map(|p| p.top1()).map(|p| p.objectness()).collect();
    let mean_objectness = if tops.is_empty() { 0.0 } else { tops.iter().sum::<f64>() / tops.len() as f64 };
    let cell = SweepCell {
        ratio: cfg.enlarge_ratio,
        fraction: cfg.top_fraction,
        recall_at_1: curve.recall[0],
        mean_objectness,
        is_default: same(cfg.enlarge_ratio, crate::scoring::DEFAULT_ENLARGE_RATIO)
            && same(cfg.top_fraction, crate::scoring::DEFAULT_TOP_FRACTION),
    };
    (cell, curve)
}

/// Evaluates every (ratio, fraction) pair, ratios outermost, plus the
/// purity-only baseline. Other config fields come from `base`.
pub fn ablation_sweep(corpus: &[ImageRecord], ratios: &[f64], fractions: &[f64], base: &ScoringConfig) -> SweepTable {
    let gt = corpus_gt(corpus);
    let mut cells = Vec::with_capacity(ratios.len() * fractions.len());
    for &ratio in ratios {
        for &fraction in fractions {
            let cfg = ScoringConfig { enlarge_ratio: ratio, top_fraction: fraction, ..*base };
            cells.push(sweep_cell(corpus, &gt, &cfg, Ranking::Objectness).0);
        }
    }
    let (mut purity_only, curve) = sweep_cell(corpus, &gt, base, Ranking::PurityOnly);
    purity_only.ratio = f64::NAN;
    purity_only.fraction = f64::NAN;
    purity_only.is_default = false;
    SweepTable { cells, purity_only, upper_bound: curve.upper_bound, total_instances: curve.total_instances }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ScoredProposal;
    use alloc::string::ToString;
    use alloc::vec;

    fn bx(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn pool(image: &str, class_id: u32, boxes: &[BBox]) -> CandidatePool {
        let n = boxes.len() as f64;
        CandidatePool {
            image_id: image.to_string(),
            class_id,
            entries: boxes
                .iter()
                .enumerate()
                .map(|(i, b)| ScoredProposal::new(*b, class_id, 1.0 - i as f64 / (n + 1.0), 0.0))
                .collect(),
        }
    }

    fn gt(image: &str, entries: &[(u32, BBox)]) -> GroundTruth {
        GroundTruth { image_id: image.to_string(), entries: entries.iter().map(|&(c, b)| GtEntry::new(c, b)).collect() }
    }

    #[test]
    fn recall_basic() {
        let g = [gt("a", &[(0, bx(0, 0, 10, 10))])];
        // IoU 0.6: 60 shared pixels, union 100
        let p = [pool("a", 0, &[bx(0, 0, 10, 6)])];
        let r = recall_at_k(&p, &g, &[1]);
        assert_eq!(r.recall, [1.0]);
        assert_eq!(r.upper_bound, 1.0);
    }

    #[test]
    fn recall_upper_bound_two_instances() {
        let g = [gt("a", &[(0, bx(0, 0, 10, 10)), (0, bx(20, 20, 30, 30))])];
        let p = [pool("a", 0, &[bx(0, 0, 10, 10), bx(20, 20, 30, 30)])];
        let r = recall_at_k(&p, &g, &[1, 2]);
        assert_eq!(r.upper_bound, 0.5);
        assert_eq!(r.recall, [0.5, 1.0]);
    }

    #[test]
    fn recall_threshold_inclusive() {
        let g = [gt("a", &[(0, bx(0, 0, 10, 10))])];
        // 50 shared pixels, union 100
        let p = [pool("a", 0, &[bx(0, 0, 10, 5)])];
        assert_eq!(iou(&bx(0, 0, 10, 5), &bx(0, 0, 10, 10)), 0.5);
        assert_eq!(recall_at_k(&p, &g, &[1]).recall, [1.0]);
    }

    #[test]
    fn recall_missing_pool_and_ignored() {
        let mut g = gt("a", &[(0, bx(0, 0, 10, 10)), (1, bx(0, 0, 5, 5))]);
        g.entries.push(GtEntry { class_id: 0, bbox: bx(40, 40, 50, 50), ignore: true });
        let p = [pool("a", 0, &[bx(0, 0, 10, 10)])];
        let r = recall_at_k(&p, &[g], &[1, 5]);
        assert_eq!(r.total_instances, 2);
        assert_eq!(r.recall, [0.5, 0.5]);
    }

    #[test]
    fn corloc_cases() {
        let g = [
            gt("a", &[(0, bx(0, 0, 10, 10))]),
            gt("b", &[(0, bx(0, 0, 10, 10))]),
            gt("c", &[(0, bx(0, 0, 10, 10))]),
        ];
        let top = |img: &str, b| TopBox { image_id: img.to_string(), class_id: 0, bbox: b };
        let all_hit = [top("a", bx(0, 0, 10, 10)), top("b", bx(0, 0, 10, 10)), top("c", bx(0, 0, 10, 10))];
        assert_eq!(corloc(&all_hit, &g).mean, 1.0);
        let none = [top("a", bx(50, 50, 60, 60)), top("b", bx(50, 50, 60, 60)), top("c", bx(50, 50, 60, 60))];
        assert_eq!(corloc(&none, &g).mean, 0.0);
        let two = [top("a", bx(0, 0, 10, 10)), top("b", bx(1, 1, 10, 10)), top("c", bx(50, 50, 60, 60))];
        assert!((corloc(&two, &g).per_class[&0] - 2.0 / 3.0).abs() < 1e-12);
    }

    fn det(image: &str, b: BBox, score: f64) -> Detection {
        Detection { image_id: image.to_string(), class_id: 0, bbox: b, score }
    }

    #[test]
    fn ap_cases() {
        let g = [gt("a", &[(0, bx(0, 0, 10, 10))])];
        let one = [det("a", bx(0, 0, 10, 10), 0.9)];
        for mode in [ApMode::ElevenPoint, ApMode::Area] {
            assert_eq!(voc_ap(&one, &g, mode).map, 1.0);
        }

        let two = [det("a", bx(50, 50, 60, 60), 0.9), det("a", bx(0, 0, 10, 10), 0.5)];
        let (p, r) = precision_recall(&two.iter().collect::<Vec<_>>(), &g, 0);
        assert_eq!((p, r), (vec![0.0, 0.5], vec![0.0, 1.0]));
        assert_eq!(voc_ap(&two, &g, ApMode::ElevenPoint).map, 0.5);
        assert_eq!(voc_ap(&two, &g, ApMode::Area).map, 0.5);

        let shuffled = [two[1].clone(), two[0].clone()];
        let sorted = [two[0].clone(), two[1].clone()];
        assert_eq!(voc_ap(&shuffled, &g, ApMode::Area), voc_ap(&sorted, &g, ApMode::Area));
    }

    #[test]
    fn ap_duplicate_is_false_positive() {
        let g = [gt("a", &[(0, bx(0, 0, 10, 10))])];
        let d = [det("a", bx(0, 0, 10, 10), 0.9), det("a", bx(0, 0, 10, 9), 0.8)];
        let (p, r) = precision_recall(&d.iter().collect::<Vec<_>>(), &g, 0);
        assert_eq!(p, [1.0, 0.5]);
        assert_eq!(r, [1.0, 1.0]);
    }

    #[test]
    fn ap_undefined_class() {
        let g = [gt("a", &[(0, bx(0, 0, 10, 10))])];
        let mut d = vec![det("a", bx(0, 0, 10, 10), 0.9)];
        d.push(Detection { class_id: 5, ..det("a", bx(0, 0, 3, 3), 0.4) });
        let r = voc_ap(&d, &g, ApMode::ElevenPoint);
        assert_eq!(r.undefined, [5]);
        assert_eq!(r.per_class.len(), 1);
        assert_eq!(r.map, 1.0);
    }
}

//! Acceptance suite. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero if any criterion fails.
//!
//! Run a subset by passing name fragments: `cargo test --test acceptance -- perf`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ts2c_core::eval::{self, ApMode, Detection, GroundTruth, GtEntry, ImageRecord, TopBox};
use ts2c_core::pseudomask::{self, MaskConfig, BACKGROUND, IGNORE};
use ts2c_core::scoring::{self, Ranking};
use ts2c_core::synth::{self, oracle_score, ProposalKind, TrapParams};
use ts2c_core::{BBox, CandidatePool, ClassScorer, ConfMap, ScoredProposal, ScoringConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Check = fn() -> Outcome;

fn main() {
    let checks: [(&str, Check); 8] = [
        ("oracle_equivalence", oracle_equivalence),
        ("part_trap_separation", part_trap_separation),
        ("recall_gain_over_purity", recall_gain_over_purity),
        ("half_fraction_not_worse", half_fraction_not_worse),
        ("metric_fixtures", metric_fixtures),
        ("mask_rule_table", mask_rule_table),
        ("performance", performance),
        ("cli_determinism", cli_determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_text(&e))));
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{}] {name}: {} ({:.1}s)", i + 1, outcome.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!outcome.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn bx(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
    BBox::new(x0, y0, x1, y1).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, w: u32, h: u32) -> BBox {
    let bw = rng.random_range(1..=w);
    let bh = rng.random_range(1..=h);
    let x = rng.random_range(0..=w - bw);
    let y = rng.random_range(0..=h - bh);
    bx(x, y, x + bw, y + bh)
}

/// Uniform noise, a few quantized levels, sparse spikes, or a smooth bump.
fn random_map(rng: &mut ChaCha8Rng, w: u32, h: u32) -> ConfMap {
    let texture = rng.random_range(0..4);
    let (cx, cy) = (rng.random_range(0.0..w as f32), rng.random_range(0.0..h as f32));
    let s = rng.random_range(2.0..(w.max(h) as f32 + 2.0));
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());
    ConfMap::from_fn(0, w, h, |x, y| match texture {
        0 => r.random::<f32>(),
        1 => r.random_range(0..4u8) as f32 / 3.0,
        2 => {
            if r.random::<f32>() < 0.1 {
                r.random()
            } else {
                0.0
            }
        }
        _ => (-((x as f32 - cx).powi(2) + (y as f32 - cy).powi(2)) / (s * s)).exp(),
    })
    .unwrap()
}

// 1 ------------------------------------------------------------------------

fn oracle_equivalence() -> Outcome {
    const MAPS: usize = 500;
    const BOXES: usize = 20;
    let fractions = [0.3, 0.5, 0.7, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    let start = Instant::now();
    let (mut cases, mut worst, mut mismatched) = (0usize, 0.0f64, 0usize);
    for _ in 0..MAPS {
        let (w, h) = (rng.random_range(1..=128), rng.random_range(1..=128));
        let map = random_map(&mut rng, w, h);
        let scorer = ClassScorer::new(&map);
        let cfg = ScoringConfig {
            enlarge_ratio: rng.random_range(1.0..=1.5),
            top_fraction: fractions[rng.random_range(0..fractions.len())],
            ..Default::default()
        };
        let boxes: Vec<BBox> = (0..BOXES).map(|_| random_box(&mut rng, w, h)).collect();
        let batch = scorer.score_batch(&boxes, &cfg);
        for (b, batched) in boxes.iter().zip(batch) {
            cases += 1;
            let want = oracle_score(&map, b, &cfg).expect("in-bounds box");
            for got in [scoring::score(&map, scorer.integral(), b, &cfg).expect("scores"), batched.expect("scores")] {
                let d = [
                    (got.p_inside() - want.p_inside()).abs(),
                    (got.p_surround() - want.p_surround()).abs(),
                    (got.objectness() - want.objectness()).abs(),
                ]
                .into_iter()
                .fold(0.0, f64::max);
                worst = worst.max(d);
                mismatched += usize::from(d > 1e-6);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        cases >= 10_000 && mismatched == 0 && secs < 60.0,
        format!("{cases} cases, {mismatched} beyond 1e-6, max |diff| {worst:.2e}, {secs:.1}s (limit 60s)"),
    )
}

// 2 ------------------------------------------------------------------------

fn part_trap_separation() -> Outcome {
    const SCENES: u64 = 200;
    let params = TrapParams { min_objects: 1, max_objects: 1, ..TrapParams::default() };
    let cfg = ScoringConfig::default();
    let start = Instant::now();
    let (mut separated, mut purity_fooled) = (0, 0);
    for seed in 0..SCENES {
        let (scene, family, _) = synth::trap_record(&params, 1_000 + seed, "s").expect("certified scene");
        let obj = &scene.spec.objects[0];
        let scorer = ClassScorer::new(scene.map(obj.class_id).expect("class map"));
        let score = |b: &BBox| scorer.score(b, &cfg).expect("in bounds");

        // the exact box plus the jittered tight family
        let best_tight = std::iter::once(obj.gt_box)
            .chain(family.tight.iter().map(|p| p.bbox))
            .map(|b| score(&b).objectness())
            .fold(f64::NEG_INFINITY, f64::max);
        let best_partial =
            family.partial.iter().map(|p| score(&p.bbox).objectness()).fold(f64::NEG_INFINITY, f64::max);
        separated += usize::from(best_tight > best_partial);

        let mut candidates: Vec<(BBox, ProposalKind)> = family.all().map(|p| (p.bbox, p.kind)).collect();
        candidates.push((obj.gt_box, ProposalKind::Tight));
        let top = candidates
            .iter()
            .max_by(|a, b| scorer.purity(&a.0).unwrap().total_cmp(&scorer.purity(&b.0).unwrap()))
            .expect("non-empty family");
        purity_fooled += usize::from(top.1 == ProposalKind::Partial);
    }
    let secs = start.elapsed().as_secs_f64();
    let fooled_rate = purity_fooled as f64 / SCENES as f64;
    Outcome::new(
        separated == SCENES as usize && fooled_rate >= 0.9 && secs < 30.0,
        format!(
            "tight beats best partial in {separated}/{SCENES}; purity ranks a partial first in {purity_fooled}/{SCENES} ({:.1}%, need >= 90%); {secs:.1}s (limit 30s)",
            100.0 * fooled_rate
        ),
    )
}

// 3, 4 ---------------------------------------------------------------------

const CORPUS_SCENES: usize = 500;
const CORPUS_SEED: u64 = 20_240_000;

fn noisy_corpus() -> Vec<ImageRecord> {
    synth::trap_corpus(&TrapParams::noisy(), CORPUS_SCENES, CORPUS_SEED).expect("corpus")
}

/// (instances, recalled at 1) per image.
fn hits_at_1(corpus: &[ImageRecord], cfg: &ScoringConfig, ranking: Ranking) -> Vec<(usize, usize)> {
    let pools = eval::rank_corpus(corpus, cfg, ranking);
    corpus
        .iter()
        .map(|rec| {
            let mine: Vec<CandidatePool> = pools.iter().filter(|p| p.image_id == rec.image_id()).cloned().collect();
            let curve = eval::recall_at_k(&mine, std::slice::from_ref(&rec.gt), &[1]);
            let n = curve.total_instances;
            (n, (curve.recall[0] * n as f64).round() as usize)
        })
        .collect()
}

fn recall(h: &[(usize, usize)]) -> f64 {
    let (n, r) = h.iter().fold((0, 0), |(n, r), &(a, b)| (n + a, r + b));
    r as f64 / n as f64
}

fn recall_gain_over_purity() -> Outcome {
    let start = Instant::now();
    let corpus = noisy_corpus();
    let cfg = ScoringConfig::default();
    let obj = hits_at_1(&corpus, &cfg, Ranking::Objectness);
    let pur = hits_at_1(&corpus, &cfg, Ranking::PurityOnly);
    let gap = recall(&obj) - recall(&pur);

    // resample images with replacement
    const ROUNDS: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut gaps: Vec<f64> = (0..ROUNDS)
        .map(|_| {
            let (mut n, mut a, mut b) = (0, 0, 0);
            for _ in 0..corpus.len() {
                let i = rng.random_range(0..corpus.len());
                n += obj[i].0;
                a += obj[i].1;
                b += pur[i].1;
            }
            (a as f64 - b as f64) / n as f64
        })
        .collect();
    gaps.sort_by(f64::total_cmp);
    let lower = gaps[ROUNDS / 100];
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        gap >= 0.10 && lower > 0.0 && secs < 120.0,
        format!(
            "recall@1 objectness {:.1}% vs purity {:.1}%: gap {:.1} pp (need >= 10), bootstrap 1% quantile {:.1} pp (need > 0); {secs:.1}s (limit 120s)",
            100.0 * recall(&obj),
            100.0 * recall(&pur),
            100.0 * gap,
            100.0 * lower
        ),
    )
}

fn half_fraction_not_worse() -> Outcome {
    let corpus = noisy_corpus();
    let at = |f: f64| recall(&hits_at_1(&corpus, &ScoringConfig { top_fraction: f, ..Default::default() }, Ranking::Objectness));
    let (half, all) = (at(0.5), at(1.0));
    Outcome::new(half >= all, format!("recall@1 fraction 0.5 = {:.2}%, fraction 1.0 = {:.2}%", 100.0 * half, 100.0 * all))
}

// 5 ------------------------------------------------------------------------

fn gt(image_id: &str, entries: &[(u32, BBox)]) -> GroundTruth {
    GroundTruth { image_id: image_id.into(), entries: entries.iter().map(|&(c, b)| GtEntry::new(c, b)).collect() }
}

fn gt_ignored(image_id: &str, entries: &[(u32, BBox, bool)]) -> GroundTruth {
    GroundTruth {
        image_id: image_id.into(),
        entries: entries.iter().map(|&(class_id, bbox, ignore)| GtEntry { class_id, bbox, ignore }).collect(),
    }
}

fn pool(image_id: &str, class_id: u32, boxes: &[BBox]) -> CandidatePool {
    CandidatePool {
        image_id: image_id.into(),
        class_id,
        entries: boxes.iter().map(|&b| ScoredProposal::new(b, class_id, 1.0, 0.0)).collect(),
    }
}

fn det(image_id: &str, class_id: u32, bbox: BBox, score: f64) -> Detection {
    Detection { image_id: image_id.into(), class_id, bbox, score }
}

fn top(image_id: &str, class_id: u32, bbox: BBox) -> TopBox {
    TopBox { image_id: image_id.into(), class_id, bbox }
}

struct Tally {
    total: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, name: &str, got: f64, want: f64) {
        self.total += 1;
        if (got - want).abs() > 1e-9 {
            self.failures.push(format!("{name}: got {got}, want {want}"));
        }
    }
}

// name, input, truth, cutoffs or expected per-class values, expectations
type RecallCase = (&'static str, Vec<CandidatePool>, Vec<GroundTruth>, Vec<usize>, Vec<f64>, f64);
type CorlocCase = (&'static str, Vec<TopBox>, Vec<GroundTruth>, Vec<(u32, f64)>, f64);
type ApCase = (&'static str, Vec<Detection>, Vec<GroundTruth>, f64, f64);

fn metric_fixtures() -> Outcome {
    // g is 10x10 at the origin; the others are named by their IoU with g
    let g = bx(0, 0, 10, 10);
    let half = bx(0, 0, 10, 5); // 50 / 100
    let wide = bx(0, 0, 20, 10); // 100 / 200
    let six = bx(0, 0, 10, 6); // 60 / 100
    let four = bx(0, 0, 10, 4); // 40 / 100
    let third = bx(5, 0, 15, 10); // 50 / 150
    let far = bx(50, 50, 60, 60);
    let far2 = bx(70, 0, 80, 10);

    let mut t = Tally { total: 0, failures: Vec::new() };
    let mut fixtures = BTreeMap::new();

    // recall@k
    let recall_cases: Vec<RecallCase> = vec![
        ("single hit", vec![pool("a", 0, &[six])], vec![gt("a", &[(0, g)])], vec![1], vec![1.0], 1.0),
        ("iou exactly 0.5", vec![pool("a", 0, &[half])], vec![gt("a", &[(0, g)])], vec![1], vec![1.0], 1.0),
        ("iou 0.5 by union", vec![pool("a", 0, &[wide])], vec![gt("a", &[(0, g)])], vec![1], vec![1.0], 1.0),
        ("iou 0.4 misses", vec![pool("a", 0, &[four, third])], vec![gt("a", &[(0, g)])], vec![1, 2], vec![0.0, 0.0], 1.0),
        ("two instances", vec![pool("a", 0, &[g, far])], vec![gt("a", &[(0, g), (0, far)])], vec![1, 2], vec![0.5, 1.0], 0.5),
        ("missing pool", vec![], vec![gt("a", &[(0, g)])], vec![1, 5], vec![0.0, 0.0], 1.0),
        ("hit at rank 2", vec![pool("a", 0, &[far, g])], vec![gt("a", &[(0, g)])], vec![1, 2, 3], vec![0.0, 1.0, 1.0], 1.0),
        (
            "ignored instance",
            vec![pool("a", 0, &[g])],
            vec![gt_ignored("a", &[(0, g, true), (0, far, false)])],
            vec![1],
            vec![0.0],
            1.0,
        ),
        (
            "two classes",
            vec![pool("a", 0, &[g]), pool("a", 1, &[four])],
            vec![gt("a", &[(0, g), (1, g)])],
            vec![1],
            vec![0.5],
            1.0,
        ),
        ("wrong class pool", vec![pool("a", 1, &[g])], vec![gt("a", &[(0, g)])], vec![1], vec![0.0], 1.0),
        (
            "three images",
            vec![pool("a", 0, &[g]), pool("b", 0, &[six]), pool("c", 2, &[far])],
            vec![gt("a", &[(0, g), (0, far)]), gt("b", &[(0, g)]), gt("c", &[(2, g)])],
            vec![1],
            vec![0.5],
            0.75,
        ),
        (
            "duplicate entries",
            vec![pool("a", 0, &[g, g])],
            vec![gt("a", &[(0, g), (0, far)])],
            vec![1, 2],
            vec![0.5, 0.5],
            0.5,
        ),
    ];
    // 19 instances in 11 (image, class) pairs: top-1 can reach at most 11/19 = 57.9%
    let (mut pools, mut truth) = (Vec::new(), Vec::new());
    for i in 0..11 {
        let id = format!("img{i}");
        let inst: Vec<(u32, BBox)> = if i < 8 { vec![(3, g), (3, far)] } else { vec![(3, g)] };
        pools.push(pool(&id, 3, &inst.iter().map(|e| e.1).collect::<Vec<_>>()));
        truth.push(gt(&id, &inst));
    }
    let mut recall_cases = recall_cases;
    recall_cases.push(("upper bound 11/19", pools, truth, vec![1, 2], vec![11.0 / 19.0, 1.0], 11.0 / 19.0));
    for (name, pools, truth, ks, want, ub) in &recall_cases {
        let c = eval::recall_at_k(pools, truth, ks);
        for (k, (got, w)) in ks.iter().zip(c.recall.iter().zip(want)) {
            t.check(&format!("recall {name} @{k}"), *got, *w);
        }
        t.check(&format!("recall {name} upper bound"), c.upper_bound, *ub);
    }
    fixtures.insert("recall", recall_cases.len());

    // CorLoc: (name, tops, truth, per-class, mean)
    let corloc_cases: Vec<CorlocCase> = vec![
        ("identical", vec![top("a", 0, g)], vec![gt("a", &[(0, g)])], vec![(0, 1.0)], 1.0),
        ("no overlap", vec![top("a", 0, far)], vec![gt("a", &[(0, g)])], vec![(0, 0.0)], 0.0),
        (
            "two of three",
            vec![top("a", 0, g), top("b", 0, six), top("c", 0, four)],
            vec![gt("a", &[(0, g)]), gt("b", &[(0, g)]), gt("c", &[(0, g)])],
            vec![(0, 2.0 / 3.0)],
            2.0 / 3.0,
        ),
        (
            "two classes",
            vec![top("a", 0, g), top("a", 1, far), top("b", 1, far)],
            vec![gt("a", &[(0, g), (1, g)]), gt("b", &[(1, g)])],
            vec![(0, 1.0), (1, 0.0)],
            0.5,
        ),
        (
            "missing top box",
            vec![top("a", 0, g)],
            vec![gt("a", &[(0, g)]), gt("b", &[(0, g)])],
            vec![(0, 0.5)],
            0.5,
        ),
        ("second instance", vec![top("a", 0, far)], vec![gt("a", &[(0, g), (0, far)])], vec![(0, 1.0)], 1.0),
        ("iou exactly 0.5", vec![top("a", 0, half)], vec![gt("a", &[(0, g)])], vec![(0, 1.0)], 1.0),
        (
            "negative class ignored",
            vec![top("a", 0, g), top("a", 1, far)],
            vec![gt("a", &[(0, g)])],
            vec![(0, 1.0)],
            1.0,
        ),
        ("only ignored instances", vec![top("a", 0, g)], vec![gt_ignored("a", &[(0, g, true)])], vec![], 0.0),
        (
            "other class instance",
            vec![top("a", 0, far)],
            vec![gt("a", &[(0, g), (1, far)])],
            vec![(0, 0.0), (1, 0.0)],
            0.0,
        ),
        (
            "four classes",
            vec![
                top("a", 0, g),
                top("a", 1, g),
                top("b", 1, far),
                top("a", 2, far),
                top("a", 3, g),
                top("b", 3, far),
                top("c", 3, far2),
            ],
            vec![
                gt("a", &[(0, g), (1, g), (2, g), (3, g)]),
                gt("b", &[(1, g), (3, g)]),
                gt("c", &[(3, g)]),
            ],
            vec![(0, 1.0), (1, 0.5), (2, 0.0), (3, 1.0 / 3.0)],
            (1.0 + 0.5 + 0.0 + 1.0 / 3.0) / 4.0,
        ),
    ];
    for (name, tops, truth, per_class, mean) in &corloc_cases {
        let r = eval::corloc(tops, truth);
        if r.per_class.len() != per_class.len() {
            t.failures.push(format!("corloc {name}: classes {:?}", r.per_class.keys().collect::<Vec<_>>()));
        }
        for (c, want) in per_class {
            t.check(&format!("corloc {name} class {c}"), r.per_class.get(c).copied().unwrap_or(f64::NAN), *want);
        }
        t.check(&format!("corloc {name} mean"), r.mean, *mean);
    }
    fixtures.insert("corloc", corloc_cases.len());

    // AP: (name, detections, truth, eleven-point mAP, area mAP)
    let ap_cases: Vec<ApCase> = vec![
        ("one match", vec![det("a", 0, g, 0.9)], vec![gt("a", &[(0, g)])], 1.0, 1.0),
        (
            "miss then hit",
            vec![det("a", 0, far, 0.9), det("a", 0, g, 0.4)],
            vec![gt("a", &[(0, g)])],
            0.5,
            0.5,
        ),
        (
            "miss then hit, reversed input",
            vec![det("a", 0, g, 0.4), det("a", 0, far, 0.9)],
            vec![gt("a", &[(0, g)])],
            0.5,
            0.5,
        ),
        (
            "two hits",
            vec![det("a", 0, g, 0.9), det("a", 0, far, 0.8)],
            vec![gt("a", &[(0, g), (0, far)])],
            1.0,
            1.0,
        ),
        (
            "duplicate is a false positive",
            vec![det("a", 0, g, 0.9), det("a", 0, six, 0.8)],
            vec![gt("a", &[(0, g)])],
            1.0,
            1.0,
        ),
        ("half recall", vec![det("a", 0, g, 0.9)], vec![gt("a", &[(0, g), (0, far)])], 6.0 / 11.0, 0.5),
        ("no detections", vec![], vec![gt("a", &[(0, g)])], 0.0, 0.0),
        (
            "mixed ranking",
            vec![det("a", 0, g, 0.9), det("a", 0, four, 0.8), det("a", 0, far, 0.7), det("a", 0, far2, 0.6)],
            vec![gt("a", &[(0, g), (0, far), (0, far2)])],
            9.25 / 11.0,
            1.0 / 3.0 + 0.5,
        ),
        (
            "ignored instance is neutral",
            vec![det("a", 0, g, 0.9), det("a", 0, far, 0.8)],
            vec![gt_ignored("a", &[(0, g, true), (0, far, false)])],
            1.0,
            1.0,
        ),
        (
            "image without ground truth",
            vec![det("b", 0, g, 0.9), det("a", 0, g, 0.5)],
            vec![gt("a", &[(0, g)])],
            0.5,
            0.5,
        ),
        ("iou exactly 0.5", vec![det("a", 0, half, 0.3)], vec![gt("a", &[(0, g)])], 1.0, 1.0),
        (
            "mean over classes",
            vec![det("a", 0, g, 0.9), det("a", 1, far, 0.9), det("a", 1, g, 0.4)],
            vec![gt("a", &[(0, g), (1, g)])],
            0.75,
            0.75,
        ),
        (
            "class without ground truth excluded",
            vec![det("a", 0, g, 0.9), det("a", 5, g, 0.9)],
            vec![gt("a", &[(0, g)])],
            1.0,
            1.0,
        ),
    ];
    for (name, dets, truth, eleven, area) in &ap_cases {
        t.check(&format!("ap {name} eleven-point"), eval::voc_ap(dets, truth, ApMode::ElevenPoint).map, *eleven);
        t.check(&format!("ap {name} area"), eval::voc_ap(dets, truth, ApMode::Area).map, *area);
    }
    let excluded = eval::voc_ap(&ap_cases.last().unwrap().1, &ap_cases.last().unwrap().2, ApMode::ElevenPoint);
    if excluded.undefined != vec![5] {
        t.failures.push(format!("undefined classes {:?}", excluded.undefined));
    }
    fixtures.insert("ap", ap_cases.len());

    let enough = fixtures.values().all(|&n| n >= 10);
    Outcome::new(
        enough && t.failures.is_empty(),
        format!(
            "fixtures recall {} / corloc {} / ap {}, {} values checked, {} off by more than 1e-9{}",
            fixtures["recall"],
            fixtures["corloc"],
            fixtures["ap"],
            t.total,
            t.failures.len(),
            if t.failures.is_empty() { String::new() } else { format!(": {}", t.failures.join("; ")) }
        ),
    )
}

// 6 ------------------------------------------------------------------------

/// The five outcomes written out as a decision table.
fn expected_label(cams: &[f32], codes: &[u8], sal: f32, fg: f32, bg: f32) -> (u8, usize) {
    let claims: Vec<usize> = (0..cams.len()).filter(|&i| cams[i] >= fg).collect();
    let salient = sal > bg;
    match (claims.as_slice(), salient) {
        ([], false) => (BACKGROUND, 3),
        ([], true) => (IGNORE, 4),
        ([one], true) => (codes[*one], 1),
        ([_], false) => (IGNORE, 5),
        (_, _) => (IGNORE, 2),
    }
}

fn mask_rule_table() -> Outcome {
    let levels: [f32; 12] = [0.0, 0.03, 0.05, 0.06, 0.0601, 0.3, 0.5, 0.77, 0.7799, 0.78, 0.79, 1.0];
    let thresholds = [(0.78, 0.06), (0.5, 0.3), (1.0, 0.0), (0.3, 0.29), (0.06, 0.05)];
    let class_ids = [0u32, 7, 19];
    let (mut pixels, mut mismatches) = (0usize, 0usize);
    let mut rules_seen = [0usize; 6];
    let l = levels.len();
    for claimants in 1..=3usize {
        // one pixel per combination of class values and saliency
        let n = l.pow(claimants as u32 + 1);
        let digit = |p: usize, d: usize| levels[(p / l.pow(d as u32)) % l];
        let cams: Vec<ConfMap> = (0..claimants)
            .map(|c| ConfMap::from_fn(class_ids[c], n as u32, 1, |x, _| digit(x as usize, c)).unwrap())
            .collect();
        let saliency = ConfMap::from_fn(99, n as u32, 1, |x, _| digit(x as usize, claimants)).unwrap();
        let codes: Vec<u8> = class_ids[..claimants].iter().map(|&c| c as u8 + 1).collect();
        for &(fg, bg) in &thresholds {
            let cfg = MaskConfig::new(fg, bg).expect("valid thresholds");
            let mask = pseudomask::generate_mask(&cams, &saliency, &cfg).expect("mask");
            for p in 0..n {
                let values: Vec<f32> = (0..claimants).map(|c| digit(p, c)).collect();
                let (want, rule) = expected_label(&values, &codes, digit(p, claimants), fg, bg);
                rules_seen[rule] += 1;
                pixels += 1;
                mismatches += usize::from(mask.labels()[p] != want);
            }
        }
    }
    let all_rules = rules_seen[1..].iter().all(|&c| c > 0);
    Outcome::new(
        mismatches == 0 && all_rules,
        format!(
            "{pixels} pixels over 1-3 classes x {} threshold pairs, {mismatches} mismatches; rule counts {:?}",
            thresholds.len(),
            &rules_seen[1..]
        ),
    )
}

// 7 ------------------------------------------------------------------------

const PERF_SIZE: u32 = 512;
const PERF_CLASSES: u32 = 20;
const PERF_BOXES: usize = 2000;

/// 2000 boxes with log-uniform sides between 16 and 384 pixels.
fn perf_boxes(rng: &mut ChaCha8Rng) -> Vec<BBox> {
    let side = |rng: &mut ChaCha8Rng| (rng.random_range(16f64.ln()..384f64.ln()).exp().round() as u32).min(PERF_SIZE);
    (0..PERF_BOXES)
        .map(|_| {
            let (w, h) = (side(rng), side(rng));
            let x = rng.random_range(0..=PERF_SIZE - w);
            let y = rng.random_range(0..=PERF_SIZE - h);
            bx(x, y, x + w, y + h)
        })
        .collect()
}

fn perf_maps(rng: &mut ChaCha8Rng) -> Vec<ConfMap> {
    (0..PERF_CLASSES).map(|c| ConfMap::from_fn(c, PERF_SIZE, PERF_SIZE, |_, _| rng.random::<f32>()).unwrap()).collect()
}

fn score_all(maps: &[ConfMap], boxes: &[BBox], cfg: &ScoringConfig) -> Vec<Vec<ScoredProposal>> {
    maps.iter()
        .map(|m| ClassScorer::new(m).score_batch(boxes, cfg).into_iter().map(|r| r.expect("in bounds")).collect())
        .collect()
}

fn performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let maps = perf_maps(&mut rng);
    let boxes = perf_boxes(&mut rng);
    let cfg = ScoringConfig::default();

    let mut runs: Vec<Duration> = Vec::new();
    let mut fast = Vec::new();
    for _ in 0..3 {
        let t = Instant::now();
        fast = std::hint::black_box(score_all(&maps, &boxes, &cfg));
        runs.push(t.elapsed());
    }
    runs.sort();
    let median = runs[1].as_secs_f64();

    let t = Instant::now();
    let slow: Vec<Vec<ScoredProposal>> = maps
        .iter()
        .map(|m| boxes.iter().map(|b| oracle_score(m, b, &cfg).expect("in bounds")).collect())
        .collect();
    let oracle = t.elapsed().as_secs_f64();

    let worst = fast
        .iter()
        .flatten()
        .zip(slow.iter().flatten())
        .map(|(a, b)| (a.objectness() - b.objectness()).abs())
        .fold(0.0, f64::max);
    let speedup = oracle / median;
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    Outcome::new(
        median < 1.0 && speedup >= 10.0 && worst <= 1e-6,
        format!(
            "{PERF_BOXES} boxes x {PERF_CLASSES} maps {PERF_SIZE}x{PERF_SIZE}: median of 3 runs {median:.3}s (runs {}; limit 1s), oracle {oracle:.1}s = {speedup:.0}x slower (need >= 10x), max |diff| {worst:.1e}, {cores} core(s)",
            runs.iter().map(|d| format!("{:.3}", d.as_secs_f64())).collect::<Vec<_>>().join("/")
        ),
    )
}

// 8 ------------------------------------------------------------------------

fn ts2c(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ts2c"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| format!("spawn: {e}"))?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("ts2c {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn pipeline_run(dir: &Path, threads: &str) -> Result<(), String> {
    let steps: [&[&str]; 7] = [
        &["synth", "--out", "corpus", "--scenes", "12", "--seed", "42", "--preset", "noisy"],
        &["score", "--input", "corpus", "--out", "scored.csv"],
        &["score", "--input", "corpus", "--out", "purity.csv", "--baseline", "purity"],
        &["eval", "recall", "--scored", "scored.csv", "--truth", "corpus", "--out", "recall.json", "--report", "recall.txt"],
        &["eval", "corloc", "--scored", "scored.csv", "--truth", "corpus", "--out", "corloc.json"],
        &["eval", "map", "--detections", "scored.csv", "--truth", "corpus", "--out", "map.json"],
        &["eval", "sweep", "--corpus", "corpus", "--out", "sweep.json", "--report", "sweep.tsv"],
    ];
    for step in steps {
        let mut args = vec!["--threads", threads];
        args.extend_from_slice(step);
        ts2c(dir, &args)?;
    }
    Ok(())
}

fn cli_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = pipeline_run(a.path(), "4").and_then(|_| pipeline_run(b.path(), "1")) {
        return Outcome::new(false, e);
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let same_names = ta.keys().eq(tb.keys());
    Outcome::new(
        same_names && differing.is_empty() && ta.len() > 12,
        format!(
            "synth+score+eval twice (4 threads, then 1): {} files, {} differ{}",
            ta.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({differing:?})") }
        ),
    )
}

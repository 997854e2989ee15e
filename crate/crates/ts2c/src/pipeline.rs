//! Whole-corpus operations behind the command-line tool, usable directly.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ts2c_core::eval::{GroundTruth, SweepCell, SweepTable};
use ts2c_core::scoring::Ranking;
use ts2c_core::synth::{trap_record, SynthError, TrapParams};
use ts2c_core::{CandidatePool, ClassScorer, ScoringConfig};

use crate::bundle::{self, Corpus, SceneBundle};
use crate::csvio;
use crate::error::Result;

/// Directory and image id of the `i`-th generated scene.
pub fn scene_id(i: usize) -> String {
    format!("scene_{i:05}")
}

/// `scenes` certified trap scenes; scene `i` is drawn from seed `seed + i`.
pub fn synth_bundles(params: &TrapParams, scenes: usize, seed: u64) -> Result<Vec<SceneBundle>, SynthError> {
    (0..scenes)
        .into_par_iter()
        .map(|i| {
            let id = scene_id(i);
            let (scene, family, _) = trap_record(params, seed.wrapping_add(i as u64), id.clone())?;
            Ok(SceneBundle::from_scene(id, &scene, &family))
        })
        .collect()
}

/// Pools for every class map of every bundle, bundles in corpus order and
/// classes ascending. Fails listing every bundle that lacks proposals.
pub fn score_corpus(corpus: &Corpus, cfg: &ScoringConfig, ranking: Ranking) -> Result<Vec<CandidatePool>, Vec<String>> {
    let missing: Vec<String> = corpus
        .bundles
        .iter()
        .filter(|b| b.proposals.is_none())
        .map(|b| format!("{}: no {}", b.image_id(), bundle::PROPOSALS_FILE))
        .collect();
    if !missing.is_empty() {
        return Err(missing);
    }
    let per_bundle: Vec<Vec<CandidatePool>> = corpus
        .bundles
        .par_iter()
        .map(|b| {
            let props = b.proposals.as_deref().unwrap_or_default();
            b.maps.iter().map(|m| ClassScorer::new(m).pool(b.image_id(), props, cfg, ranking)).collect()
        })
        .collect();
    Ok(per_bundle.into_iter().flatten().collect())
}

/// Ground truth from a CSV file, a bundle, or a corpus directory.
pub fn load_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    if path.is_dir() {
        Ok(bundle::read_bundles(path)?.bundles.into_iter().map(|b| b.gt).collect())
    } else {
        Ok(csvio::group_gt(&csvio::read_gt(path)?))
    }
}

/// Image ids used by results but absent from the ground truth, sorted.
pub fn unknown_images<'a>(ids: impl IntoIterator<Item = &'a str>, truth: &[GroundTruth]) -> Vec<String> {
    let known: BTreeSet<&str> = truth.iter().map(|g| g.image_id.as_str()).collect();
    let unknown: BTreeSet<&str> = ids.into_iter().filter(|id| !known.contains(id)).collect();
    unknown.into_iter().map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub ratio: f64,
    pub fraction: f64,
    pub recall_at_1: f64,
    pub mean_objectness: f64,
    pub is_default: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub recall_at_1: f64,
    pub mean_objectness: f64,
}

/// Sweep result as written to JSON: one entry per (ratio, fraction), ratios
/// outermost, and the purity-only baseline apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub key: [String; 2],
    pub cells: Vec<SweepEntry>,
    pub purity_only: BaselineEntry,
    pub upper_bound: f64,
    pub total_instances: usize,
}

impl From<&SweepTable> for SweepReport {
    fn from(t: &SweepTable) -> Self {
        let entry = |c: &SweepCell| SweepEntry {
            ratio: c.ratio,
            fraction: c.fraction,
            recall_at_1: c.recall_at_1,
            mean_objectness: c.mean_objectness,
            is_default: c.is_default,
        };
        Self {
            key: ["ratio".into(), "fraction".into()],
            cells: t.cells.iter().map(entry).collect(),
            purity_only: BaselineEntry { recall_at_1: t.purity_only.recall_at_1, mean_objectness: t.purity_only.mean_objectness },
            upper_bound: t.upper_bound,
            total_instances: t.total_instances,
        }
    }
}

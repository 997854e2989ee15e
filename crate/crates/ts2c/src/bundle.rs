//! Scene bundles: one image's class maps, annotation and proposals in a
//! directory, and corpora made of bundle directories.
//!
//! Layout of a bundle:
//! - `spec.json`: format version, image id, size, class list, optional scene spec
//! - `class_<id>.tscf` (or `class_<id>.pgm`): one confidence map per listed class
//! - `gt.csv`: ground truth rows
//! - `proposals.csv`: optional class-agnostic proposals; `class_id` is ignored
//!
//! Unknown files are tolerated with a warning so newer writers stay readable.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ts2c_core::eval::{GroundTruth, ImageRecord};
use ts2c_core::synth::{ProposalFamily, Scene, SceneSpec};
use ts2c_core::{BBox, ConfMap};

use crate::csvio::{self, BoxRecord, GtRecord};
use crate::error::{FormatError, Result};
use crate::mapfile;

pub const FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "spec.json";
pub const GT_FILE: &str = "gt.csv";
pub const PROPOSALS_FILE: &str = "proposals.csv";
pub const CORPUS_MANIFEST: &str = "manifest.json";

/// Contents of `spec.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub classes: Vec<u32>,
    /// How the maps were produced, when they were generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
}

/// A validated bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub meta: BundleMeta,
    /// Ascending class id.
    pub maps: Vec<ConfMap>,
    pub gt: GroundTruth,
    pub proposals: Option<Vec<BBox>>,
    /// Non-fatal findings such as unknown files.
    pub warnings: Vec<String>,
}

impl SceneBundle {
    pub fn image_id(&self) -> &str {
        &self.meta.image_id
    }

    /// Bundle for a generated scene.
    pub fn from_scene(image_id: impl Into<String>, scene: &Scene, family: &ProposalFamily) -> Self {
        let image_id = image_id.into();
        let mut maps = scene.maps.clone();
        maps.sort_by_key(ConfMap::class_id);
        Self {
            meta: BundleMeta {
                format_version: FORMAT_VERSION,
                image_id: image_id.clone(),
                width: scene.spec.image_w,
                height: scene.spec.image_h,
                classes: maps.iter().map(ConfMap::class_id).collect(),
                scene: Some(scene.spec.clone()),
            },
            maps,
            gt: GroundTruth { image_id, entries: scene.gt.clone() },
            proposals: Some(family.boxes()),
            warnings: Vec::new(),
        }
    }

    /// Evaluation record; a bundle without proposals yields none.
    pub fn to_record(&self) -> ImageRecord {
        ImageRecord { gt: self.gt.clone(), maps: self.maps.clone(), proposals: self.proposals.clone().unwrap_or_default() }
    }
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

fn map_name(class_id: u32) -> String {
    format!("class_{class_id}.tscf")
}

/// Writes every file of `bundle` into `dir`, creating it if needed.
pub fn write_bundle(dir: &Path, bundle: &SceneBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    csvio::write_file(&dir.join(META_FILE), &json_bytes(&bundle.meta))?;
    for m in &bundle.maps {
        mapfile::write_tscf(m, &dir.join(map_name(m.class_id())))?;
    }
    csvio::write_gt(&dir.join(GT_FILE), &csvio::gt_records(&bundle.gt))?;
    if let Some(props) = &bundle.proposals {
        let rows: Vec<BoxRecord> = props
            .iter()
            .map(|b| BoxRecord { image_id: bundle.meta.image_id.clone(), class_id: 0, bbox: *b, score: None })
            .collect();
        csvio::write_boxes(&dir.join(PROPOSALS_FILE), &rows)?;
    }
    Ok(())
}

fn check_rows<'a>(
    problems: &mut Vec<String>,
    file: &str,
    image_id: Option<&str>,
    dims: Option<(u32, u32)>,
    rows: impl Iterator<Item = (u64, &'a str, BBox)>,
) {
    for (line, id, b) in rows {
        if let Some(want) = image_id.filter(|w| *w != id) {
            problems.push(format!("{file} line {line}: image_id {id:?} does not match {want:?}"));
        }
        if let Some((w, h)) = dims.filter(|(w, h)| !b.fits_in(*w, *h)) {
            problems.push(format!("{file} line {line}: box {b} exceeds the {w}x{h} map"));
        }
    }
}

/// Reads and validates a bundle, reporting every problem found rather than
/// the first.
pub fn read_bundle(dir: &Path) -> Result<SceneBundle> {
    let mut problems = Vec::new();
    let mut warnings = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => return Err(FormatError::io(dir, e)),
    };
    let mut map_files: BTreeMap<u32, Vec<PathBuf>> = BTreeMap::new();
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| FormatError::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        let is_map = matches!(path.extension().and_then(|e| e.to_str()), Some("tscf" | "pgm"));
        match (is_map, mapfile::class_id_from_name(&path)) {
            (true, Some(id)) if path.is_file() => map_files.entry(id).or_default().push(path),
            _ if matches!(name.as_str(), META_FILE | GT_FILE | PROPOSALS_FILE) => {}
            _ => warnings.push(format!("ignoring unknown entry {name}")),
        }
        names.insert(name);
    }

    let meta: Option<BundleMeta> = match fs::read(dir.join(META_FILE)) {
        Err(_) if !names.contains(META_FILE) => {
            problems.push(format!("missing {META_FILE}"));
            None
        }
        Err(e) => {
            problems.push(format!("{META_FILE}: {e}"));
            None
        }
        Ok(bytes) => match serde_json::from_slice::<BundleMeta>(&bytes) {
            Ok(m) if m.format_version != FORMAT_VERSION => {
                problems.push(format!("{META_FILE}: format_version {} is not {FORMAT_VERSION}", m.format_version));
                None
            }
            Ok(m) => Some(m),
            Err(e) => {
                problems.push(format!("{META_FILE}: {e}"));
                None
            }
        },
    };

    let mut maps = Vec::new();
    for (id, files) in &map_files {
        if files.len() > 1 {
            problems.push(format!("class {id} has {} map files", files.len()));
            continue;
        }
        let file = &files[0];
        let fname = file.file_name().unwrap_or_default().to_string_lossy();
        match mapfile::read_confmap(file) {
            Ok(m) if m.class_id() != *id => {
                problems.push(format!("{fname}: header class {} does not match the file name", m.class_id()))
            }
            Ok(m) => maps.push((fname.into_owned(), m)),
            Err(e) => problems.push(format!("{fname}: {}", strip_path(&e, file))),
        }
    }

    let dims = meta.as_ref().map(|m| (m.width, m.height)).or_else(|| maps.first().map(|(_, m)| (m.width(), m.height())));
    if let Some((w, h)) = dims {
        for (fname, m) in &maps {
            if (m.width(), m.height()) != (w, h) {
                problems.push(format!("{fname}: map is {}x{}, expected {w}x{h}", m.width(), m.height()));
            }
        }
    }
    let have: BTreeSet<u32> = map_files.keys().copied().collect();
    if let Some(meta) = &meta {
        let listed: BTreeSet<u32> = meta.classes.iter().copied().collect();
        if listed.len() != meta.classes.len() {
            problems.push(format!("{META_FILE}: duplicate class ids"));
        }
        for id in listed.difference(&have) {
            problems.push(format!("missing {} for listed class {id}", map_name(*id)));
        }
        for id in have.difference(&listed) {
            problems.push(format!("map for class {id} is not listed in {META_FILE}"));
        }
    }
    let image_id = meta.as_ref().map(|m| m.image_id.as_str());

    let gt_path = dir.join(GT_FILE);
    let gt_rows = if names.contains(GT_FILE) {
        match csvio::read_gt_located(&gt_path) {
            Ok(rows) => rows,
            Err(e) => {
                problems.push(strip_path(&e, &gt_path));
                Vec::new()
            }
        }
    } else {
        problems.push(format!("missing {GT_FILE}"));
        Vec::new()
    };
    check_rows(&mut problems, GT_FILE, image_id, dims, gt_rows.iter().map(|(l, r)| (*l, r.image_id.as_str(), r.entry.bbox)));
    for (line, r) in &gt_rows {
        if !have.contains(&r.entry.class_id) {
            problems.push(format!("{GT_FILE} line {line}: class {} has no confidence map", r.entry.class_id));
        }
    }

    let prop_path = dir.join(PROPOSALS_FILE);
    let proposals = if names.contains(PROPOSALS_FILE) {
        match csvio::read_boxes_located(&prop_path) {
            Ok(rows) => {
                check_rows(&mut problems, PROPOSALS_FILE, image_id, dims, rows.iter().map(|(l, r)| (*l, r.image_id.as_str(), r.bbox)));
                Some(rows.into_iter().map(|(_, r)| r.bbox).collect())
            }
            Err(e) => {
                problems.push(strip_path(&e, &prop_path));
                None
            }
        }
    } else {
        None
    };

    if !problems.is_empty() {
        return Err(FormatError::InvalidBundle { dir: dir.to_path_buf(), problems });
    }
    let meta = meta.expect("no problems means spec.json parsed");
    let gt_records: Vec<GtRecord> = gt_rows.into_iter().map(|(_, r)| r).collect();
    let entries = gt_records.into_iter().map(|r| r.entry).collect();
    Ok(SceneBundle {
        gt: GroundTruth { image_id: meta.image_id.clone(), entries },
        maps: maps.into_iter().map(|(_, m)| m).collect(),
        meta,
        proposals,
        warnings,
    })
}

/// Error text without the leading path, for messages already scoped to a file.
fn strip_path(e: &FormatError, path: &Path) -> String {
    let s = e.to_string();
    let prefix = format!("{}: ", path.display());
    let file = path.file_name().unwrap_or_default().to_string_lossy();
    match s.strip_prefix(&prefix) {
        Some(rest) => format!("{file}: {rest}"),
        None => s,
    }
}

/// A directory of bundles, in file-name order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub bundles: Vec<SceneBundle>,
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn records(&self) -> Vec<ImageRecord> {
        self.bundles.iter().map(SceneBundle::to_record).collect()
    }
}

pub fn is_bundle(dir: &Path) -> bool {
    dir.join(META_FILE).is_file()
}

/// Reads every bundle under `dir`, collecting problems across all of them.
pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let mut subdirs = Vec::new();
    let mut warnings = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))? {
        let entry = entry.map_err(|e| FormatError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_dir() {
            subdirs.push((name, entry.path()));
        } else if name != CORPUS_MANIFEST {
            warnings.push(format!("ignoring unknown entry {name}"));
        }
    }
    subdirs.sort();
    let mut bundles = Vec::with_capacity(subdirs.len());
    let mut problems = Vec::new();
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    for (name, path) in subdirs {
        match read_bundle(&path) {
            Ok(b) => {
                if let Some(prev) = seen.insert(b.meta.image_id.clone(), name.clone()) {
                    problems.push(format!("{name}: image_id {:?} already used by {prev}", b.meta.image_id));
                }
                warnings.extend(b.warnings.iter().map(|w| format!("{name}: {w}")));
                bundles.push(b);
            }
            Err(FormatError::InvalidBundle { problems: p, .. }) => {
                problems.extend(p.into_iter().map(|p| format!("{name}: {p}")));
            }
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }
    if !problems.is_empty() {
        return Err(FormatError::InvalidBundle { dir: dir.to_path_buf(), problems });
    }
    Ok(Corpus { bundles, warnings })
}

/// A single bundle directory or a corpus of them.
pub fn read_bundles(path: &Path) -> Result<Corpus> {
    if is_bundle(path) {
        let b = read_bundle(path)?;
        Ok(Corpus { warnings: b.warnings.clone(), bundles: vec![b] })
    } else {
        read_corpus(path)
    }
}

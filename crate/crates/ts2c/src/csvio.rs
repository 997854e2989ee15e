//! Box lists, ground truth and scored pools as CSV.
//!
//! Every reader requires a header row, matches columns by name (extra
//! columns are ignored), and is all-or-nothing: either every row parses or
//! the error lists each bad row with its line number.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ts2c_core::eval::{Detection, GroundTruth, GtEntry};
use ts2c_core::{BBox, CandidatePool, ScoredProposal};

use crate::error::{FormatError, Result, RowError};

pub const BOX_COLUMNS: [&str; 6] = ["image_id", "class_id", "x0", "y0", "x1", "y1"];
pub const SCORE_COLUMN: &str = "score";
pub const IGNORE_COLUMN: &str = "ignore_flag";
pub const SCORED_COLUMNS: [&str; 9] =
    ["image_id", "class_id", "x0", "y0", "x1", "y1", "p_inside", "p_surround", "objectness"];

/// Significant digits of every float written to CSV.
pub const SIG_DIGITS: usize = 9;

/// A box row: `image_id,class_id,x0,y0,x1,y1[,score]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRecord {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BBox,
    pub score: Option<f64>,
}

/// A ground-truth row: `image_id,class_id,x0,y0,x1,y1,ignore_flag`.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRecord {
    pub image_id: String,
    pub entry: GtEntry,
}

/// A scored-pool row, kept exactly as read.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRecord {
    pub image_id: String,
    pub class_id: u32,
    pub bbox: BBox,
    pub p_inside: f64,
    pub p_surround: f64,
    pub objectness: f64,
}

/// `%g`-style rendering with `digits` significant digits: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros dropped.
pub fn format_sig(v: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{exp}", trim_zeros(mant));
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_f(v: f64) -> String {
    format_sig(v, SIG_DIGITS)
}

struct Table {
    columns: HashMap<String, usize>,
    width: usize,
    rows: Vec<(u64, csv::StringRecord)>,
    errors: Vec<RowError>,
}

impl Table {
    fn has(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }
}

fn load<R: Read>(path: &Path, src: R, required: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(src);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(FormatError::MissingColumns {
            path: path.to_path_buf(),
            missing: required.iter().map(|s| s.to_string()).collect(),
        });
    }
    let columns: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
    let missing: Vec<String> = required.iter().filter(|c| !columns.contains_key(**c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(FormatError::MissingColumns { path: path.to_path_buf(), missing });
    }
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for rec in rdr.records() {
        match rec {
            Ok(r) => {
                let line = r.position().map_or(0, csv::Position::line);
                if r.len() != headers.len() {
                    errors.push(RowError {
                        line,
                        message: format!("expected {} fields, found {}", headers.len(), r.len()),
                    });
                } else {
                    rows.push((line, r));
                }
            }
            Err(e) => errors.push(RowError {
                line: e.position().map_or(0, csv::Position::line),
                message: e.to_string(),
            }),
        }
    }
    Ok(Table { columns, width: headers.len(), rows, errors })
}

fn csv_error(path: &Path, e: csv::Error) -> FormatError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => FormatError::io(path, io),
            _ => unreachable!(),
        },
        _ => FormatError::Rows {
            path: path.to_path_buf(),
            rows: vec![RowError { line: e.position().map_or(1, csv::Position::line), message: e.to_string() }],
        },
    }
}

struct Row<'a> {
    table: &'a Table,
    rec: &'a csv::StringRecord,
}

impl Row<'_> {
    fn field(&self, name: &str) -> &str {
        &self.rec[self.table.columns[name]]
    }

    fn parse<T: std::str::FromStr>(&self, name: &str) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.field(name);
        s.parse().map_err(|e| format!("{name} {s:?}: {e}"))
    }

    fn float(&self, name: &str) -> std::result::Result<f64, String> {
        let v: f64 = self.parse(name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name} is not finite"))
        }
    }

    fn image_id(&self) -> std::result::Result<String, String> {
        let s = self.field("image_id");
        if s.is_empty() {
            Err("empty image_id".into())
        } else {
            Ok(s.to_string())
        }
    }

    fn bbox(&self) -> std::result::Result<BBox, String> {
        let x0 = self.parse("x0")?;
        let y0 = self.parse("y0")?;
        let x1 = self.parse("x1")?;
        let y1 = self.parse("y1")?;
        BBox::new(x0, y0, x1, y1).map_err(|e| e.to_string())
    }
}

fn parse_rows<T>(
    path: &Path,
    table: Table,
    f: impl Fn(&Row<'_>) -> std::result::Result<T, String>,
) -> Result<Vec<(u64, T)>> {
    let mut errors = table.errors.clone();
    let mut out = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        debug_assert_eq!(rec.len(), table.width);
        match f(&Row { table: &table, rec }) {
            Ok(v) => out.push((*line, v)),
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(FormatError::Rows { path: path.to_path_buf(), rows: errors })
    }
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| FormatError::io(path, e))
}

/// Rows paired with the line they came from.
pub fn parse_boxes_located<R: Read>(path: &Path, src: R) -> Result<Vec<(u64, BoxRecord)>> {
    let table = load(path, src, &BOX_COLUMNS)?;
    let scored = table.has(SCORE_COLUMN);
    parse_rows(path, table, |r| {
        let score = if scored && !r.field(SCORE_COLUMN).is_empty() { Some(r.float(SCORE_COLUMN)?) } else { None };
        Ok(BoxRecord { image_id: r.image_id()?, class_id: r.parse("class_id")?, bbox: r.bbox()?, score })
    })
}

pub fn parse_boxes<R: Read>(path: &Path, src: R) -> Result<Vec<BoxRecord>> {
    Ok(strip(parse_boxes_located(path, src)?))
}

pub fn read_boxes_located(path: &Path) -> Result<Vec<(u64, BoxRecord)>> {
    parse_boxes_located(path, open(path)?)
}

pub fn read_boxes(path: &Path) -> Result<Vec<BoxRecord>> {
    parse_boxes(path, open(path)?)
}

fn strip<T>(rows: Vec<(u64, T)>) -> Vec<T> {
    rows.into_iter().map(|(_, v)| v).collect()
}

fn finish(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| FormatError::io(path, e.into_error()))
}

/// Box rows as CSV bytes; the score column appears when any row has one.
pub fn boxes_csv(rows: &[BoxRecord]) -> Vec<u8> {
    let with_score = rows.iter().any(|r| r.score.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = BOX_COLUMNS.to_vec();
    if with_score {
        header.push(SCORE_COLUMN);
    }
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let b = r.bbox;
        let mut rec = vec![
            r.image_id.clone(),
            r.class_id.to_string(),
            b.x0().to_string(),
            b.y0().to_string(),
            b.x1().to_string(),
            b.y1().to_string(),
        ];
        if with_score {
            rec.push(r.score.map(fmt_f).unwrap_or_default());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    finish(Path::new(""), w).expect("in-memory flush")
}

pub fn write_boxes(path: &Path, rows: &[BoxRecord]) -> Result<()> {
    write_file(path, &boxes_csv(rows))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    f.write_all(bytes).map_err(|e| FormatError::io(path, e))
}

fn parse_flag(s: &str) -> std::result::Result<bool, String> {
    match s {
        "0" | "false" => Ok(false),
        "1" | "true" => Ok(true),
        _ => Err(format!("ignore_flag {s:?} is not 0 or 1")),
    }
}

pub fn parse_gt_located<R: Read>(path: &Path, src: R) -> Result<Vec<(u64, GtRecord)>> {
    let mut cols = BOX_COLUMNS.to_vec();
    cols.push(IGNORE_COLUMN);
    let table = load(path, src, &cols)?;
    parse_rows(path, table, |r| {
        let entry = GtEntry { class_id: r.parse("class_id")?, bbox: r.bbox()?, ignore: parse_flag(r.field(IGNORE_COLUMN))? };
        Ok(GtRecord { image_id: r.image_id()?, entry })
    })
}

pub fn parse_gt<R: Read>(path: &Path, src: R) -> Result<Vec<GtRecord>> {
    Ok(strip(parse_gt_located(path, src)?))
}

pub fn read_gt_located(path: &Path) -> Result<Vec<(u64, GtRecord)>> {
    parse_gt_located(path, open(path)?)
}

pub fn read_gt(path: &Path) -> Result<Vec<GtRecord>> {
    parse_gt(path, open(path)?)
}

pub fn gt_csv(rows: &[GtRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = BOX_COLUMNS.to_vec();
    header.push(IGNORE_COLUMN);
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let b = r.entry.bbox;
        w.write_record([
            r.image_id.clone(),
            r.entry.class_id.to_string(),
            b.x0().to_string(),
            b.y0().to_string(),
            b.x1().to_string(),
            b.y1().to_string(),
            u8::from(r.entry.ignore).to_string(),
        ])
        .expect("in-memory write");
    }
    finish(Path::new(""), w).expect("in-memory flush")
}

pub fn write_gt(path: &Path, rows: &[GtRecord]) -> Result<()> {
    write_file(path, &gt_csv(rows))
}

/// Rows of one image's annotation, in order.
pub fn gt_records(gt: &GroundTruth) -> Vec<GtRecord> {
    gt.entries.iter().map(|e| GtRecord { image_id: gt.image_id.clone(), entry: *e }).collect()
}

/// Groups rows per image, images in order of first appearance.
pub fn group_gt(rows: &[GtRecord]) -> Vec<GroundTruth> {
    let mut order: Vec<GroundTruth> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for r in rows {
        let i = *index.entry(&r.image_id).or_insert_with(|| {
            order.push(GroundTruth { image_id: r.image_id.clone(), entries: Vec::new() });
            order.len() - 1
        });
        order[i].entries.push(r.entry);
    }
    order
}

pub fn parse_scored<R: Read>(path: &Path, src: R) -> Result<Vec<ScoredRecord>> {
    let table = load(path, src, &SCORED_COLUMNS)?;
    let rows = parse_rows(path, table, |r| {
        Ok(ScoredRecord {
            image_id: r.image_id()?,
            class_id: r.parse("class_id")?,
            bbox: r.bbox()?,
            p_inside: r.float("p_inside")?,
            p_surround: r.float("p_surround")?,
            objectness: r.float("objectness")?,
        })
    })?;
    Ok(strip(rows))
}

pub fn read_scored(path: &Path) -> Result<Vec<ScoredRecord>> {
    parse_scored(path, open(path)?)
}

/// Pools written one after another, each best first.
pub fn scored_csv(pools: &[CandidatePool]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCORED_COLUMNS).expect("in-memory write");
    for pool in pools {
        for p in &pool.entries {
            let b = p.bbox();
            w.write_record([
                pool.image_id.clone(),
                pool.class_id.to_string(),
                b.x0().to_string(),
                b.y0().to_string(),
                b.x1().to_string(),
                b.y1().to_string(),
                fmt_f(p.p_inside()),
                fmt_f(p.p_surround()),
                fmt_f(p.objectness()),
            ])
            .expect("in-memory write");
        }
    }
    finish(Path::new(""), w).expect("in-memory flush")
}

pub fn write_scored(path: &Path, pools: &[CandidatePool]) -> Result<()> {
    write_file(path, &scored_csv(pools))
}

/// Rebuilds pools from rows, keeping row order inside each pool and pools
/// in order of first appearance.
pub fn group_pools(rows: &[ScoredRecord]) -> Vec<CandidatePool> {
    let mut pools: Vec<CandidatePool> = Vec::new();
    let mut index: HashMap<(&str, u32), usize> = HashMap::new();
    for r in rows {
        let i = *index.entry((&r.image_id, r.class_id)).or_insert_with(|| {
            pools.push(CandidatePool { image_id: r.image_id.clone(), class_id: r.class_id, entries: Vec::new() });
            pools.len() - 1
        });
        pools[i].entries.push(ScoredProposal::new(r.bbox, r.class_id, r.p_inside, r.p_surround));
    }
    pools
}

/// Scored rows as detections ranked by their objectness column.
pub fn scored_detections(rows: &[ScoredRecord]) -> Vec<Detection> {
    rows.iter()
        .map(|r| Detection { image_id: r.image_id.clone(), class_id: r.class_id, bbox: r.bbox, score: r.objectness })
        .collect()
}

/// Box rows as detections; every row needs a score.
pub fn box_detections(path: &Path, rows: &[BoxRecord]) -> Result<Vec<Detection>> {
    let missing: Vec<RowError> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.score.is_none())
        .map(|(i, _)| RowError { line: i as u64 + 2, message: "detection without a score".into() })
        .collect();
    if !missing.is_empty() {
        return Err(FormatError::Rows { path: path.to_path_buf(), rows: missing });
    }
    Ok(rows
        .iter()
        .map(|r| Detection {
            image_id: r.image_id.clone(),
            class_id: r.class_id,
            bbox: r.bbox,
            score: r.score.expect("checked above"),
        })
        .collect())
}

//! Confidence maps, raw activation maps and label masks on disk.
//!
//! Two map encodings are supported:
//! - `.tscf`: the 16-byte header `TSCF`, then little-endian `u32` width,
//!   height and class id, followed by `width * height` little-endian `f32`
//!   values in row-major order. Round-trips bit for bit.
//! - `.pgm`: binary greymap (`P5`) with maxval up to 65535. Samples are
//!   divided by maxval on load, so a map survives a round trip exactly at
//!   its quantization level. The class id comes from a `class_<id>.pgm`
//!   file name.

use std::fs;
use std::path::Path;

use ts2c_core::pseudomask::PseudoMask;
use ts2c_core::{ConfMap, ConfMapError, RawMap};

use crate::error::{FormatError, Result};

pub const TSCF_MAGIC: [u8; 4] = *b"TSCF";
const TSCF_HEADER: usize = 16;

/// Sample depth of a written greymap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmDepth {
    Eight,
    Sixteen,
}

impl PgmDepth {
    pub fn maxval(self) -> u16 {
        match self {
            Self::Eight => 255,
            Self::Sixteen => 65535,
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| FormatError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

fn pixel_count(path: &Path, width: u64, height: u64) -> Result<usize> {
    let overflow = || FormatError::DimensionOverflow { path: path.to_path_buf(), width, height };
    if width > u64::from(u32::MAX) || height > u64::from(u32::MAX) {
        return Err(overflow());
    }
    let n = width.checked_mul(height).ok_or_else(overflow)?;
    // four bytes per value must still be addressable
    let n = usize::try_from(n).map_err(|_| overflow())?;
    n.checked_mul(4).filter(|&b| b <= isize::MAX as usize).ok_or_else(overflow)?;
    Ok(n)
}

fn map_error(path: &Path, e: ConfMapError) -> FormatError {
    let path = path.to_path_buf();
    match e {
        ConfMapError::OutOfRange { x, y, value } | ConfMapError::InvalidActivation { x, y, value } => {
            FormatError::OutOfRange { path, x, y, value: f64::from(value) }
        }
        ConfMapError::DimensionOverflow { width, height } => {
            FormatError::DimensionOverflow { path, width: width.into(), height: height.into() }
        }
        other => FormatError::MalformedFile { path, reason: other.to_string() },
    }
}

struct Decoded {
    class_id: u32,
    width: u32,
    height: u32,
    values: Vec<f32>,
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn decode_tscf(path: &Path, bytes: &[u8]) -> Result<Decoded> {
    let header = |reason: &str| FormatError::MalformedHeader { path: path.to_path_buf(), reason: reason.into() };
    if bytes.len() < TSCF_HEADER {
        return Err(header("shorter than the 16-byte header"));
    }
    if bytes[..4] != TSCF_MAGIC {
        return Err(header("magic is not TSCF"));
    }
    let (width, height, class_id) = (u32_at(bytes, 4), u32_at(bytes, 8), u32_at(bytes, 12));
    if width == 0 || height == 0 {
        return Err(header("zero width or height"));
    }
    let n = pixel_count(path, width.into(), height.into())?;
    let body = &bytes[TSCF_HEADER..];
    if body.len() != n * 4 {
        let what = if body.len() < n * 4 { "truncated" } else { "trailing bytes" };
        return Err(FormatError::MalformedFile {
            path: path.to_path_buf(),
            reason: format!("{what}: {width}x{height} needs {} data bytes, found {}", n * 4, body.len()),
        });
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("four bytes"))).collect();
    Ok(Decoded { class_id, width, height, values })
}

fn encode_tscf(class_id: u32, width: u32, height: u32, values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(TSCF_HEADER + values.len() * 4);
    out.extend_from_slice(&TSCF_MAGIC);
    for v in [width, height, class_id] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Encodes a confidence map in the `.tscf` layout.
pub fn tscf_bytes(map: &ConfMap) -> Vec<u8> {
    encode_tscf(map.class_id(), map.width(), map.height(), map.values())
}

pub fn read_tscf(path: &Path) -> Result<ConfMap> {
    let d = decode_tscf(path, &read_bytes(path)?)?;
    ConfMap::new(d.class_id, d.width, d.height, d.values).map_err(|e| map_error(path, e))
}

pub fn write_tscf(map: &ConfMap, path: &Path) -> Result<()> {
    write_bytes(path, &tscf_bytes(map))
}

/// Reads a `.tscf` file whose values are unnormalized activations.
pub fn read_tscf_raw(path: &Path) -> Result<RawMap> {
    let d = decode_tscf(path, &read_bytes(path)?)?;
    RawMap::new(d.class_id, d.width, d.height, d.values).map_err(|e| map_error(path, e))
}

pub fn write_tscf_raw(map: &RawMap, path: &Path) -> Result<()> {
    write_bytes(path, &encode_tscf(map.class_id(), map.width(), map.height(), map.values()))
}

/// Parsed greymap with its integer samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Greymap {
    pub width: u32,
    pub height: u32,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.at) {
            if b == b'#' {
                while self.bytes.get(self.at).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.at += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.at += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_space_and_comments();
        let start = self.at;
        while self.bytes.get(self.at).is_some_and(u8::is_ascii_digit) {
            self.at += 1;
        }
        if start == self.at || self.at - start > 19 {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.at]).ok()?.parse().ok()
    }
}

pub fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<Greymap> {
    let header = |reason: &str| FormatError::MalformedHeader { path: path.to_path_buf(), reason: reason.into() };
    if !bytes.starts_with(b"P5") {
        return Err(header("missing P5 magic"));
    }
    let mut cur = HeaderCursor { bytes, at: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(header("missing whitespace after magic"));
    }
    let width = cur.number().ok_or_else(|| header("bad width"))?;
    let height = cur.number().ok_or_else(|| header("bad height"))?;
    let maxval = cur.number().ok_or_else(|| header("bad maxval"))?;
    if width == 0 || height == 0 {
        return Err(header("zero width or height"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(header("maxval must be in 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    if !cur.bytes.get(cur.at).is_some_and(u8::is_ascii_whitespace) {
        return Err(header("missing whitespace before raster"));
    }
    let n = pixel_count(path, width, height)?;
    let raster = &bytes[cur.at + 1..];
    let wide = maxval > 255;
    let need = if wide { n * 2 } else { n };
    if raster.len() != need {
        let what = if raster.len() < need { "truncated" } else { "trailing bytes" };
        return Err(FormatError::MalformedFile {
            path: path.to_path_buf(),
            reason: format!("{what}: raster needs {need} bytes, found {}", raster.len()),
        });
    }
    let samples: Vec<u16> = if wide {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|&b| u16::from(b)).collect()
    };
    let (width, maxval) = (width as u32, maxval as u16);
    if let Some(i) = samples.iter().position(|&s| s > maxval) {
        return Err(FormatError::OutOfRange {
            path: path.to_path_buf(),
            x: (i % width as usize) as u32,
            y: (i / width as usize) as u32,
            value: f64::from(samples[i]),
        });
    }
    Ok(Greymap { width, height: height as u32, maxval, samples })
}

pub fn encode_pgm(g: &Greymap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", g.width, g.height, g.maxval).into_bytes();
    if g.maxval > 255 {
        for s in &g.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(g.samples.iter().map(|&s| s as u8));
    }
    out
}

pub fn read_greymap(path: &Path) -> Result<Greymap> {
    decode_pgm(path, &read_bytes(path)?)
}

pub fn write_greymap(g: &Greymap, path: &Path) -> Result<()> {
    write_bytes(path, &encode_pgm(g))
}

/// Greymap samples scaled to `[0, 1]` by maxval.
pub fn normalized(g: &Greymap) -> Vec<f32> {
    let m = f32::from(g.maxval);
    g.samples.iter().map(|&s| f32::from(s) / m).collect()
}

pub fn read_pgm(path: &Path, class_id: u32) -> Result<ConfMap> {
    let g = read_greymap(path)?;
    ConfMap::new(class_id, g.width, g.height, normalized(&g)).map_err(|e| map_error(path, e))
}

/// Quantizes to the nearest level of `depth`.
pub fn quantize(map: &ConfMap, depth: PgmDepth) -> Greymap {
    let m = f64::from(depth.maxval());
    let samples = map.values().iter().map(|&v| (f64::from(v) * m).round() as u16).collect();
    Greymap { width: map.width(), height: map.height(), maxval: depth.maxval(), samples }
}

pub fn write_pgm(map: &ConfMap, path: &Path, depth: PgmDepth) -> Result<()> {
    write_greymap(&quantize(map, depth), path)
}

/// Class id encoded in a `class_<id>.<ext>` file name.
pub fn class_id_from_name(path: &Path) -> Option<u32> {
    path.file_stem()?.to_str()?.strip_prefix("class_")?.parse().ok()
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

fn unknown_format(path: &Path) -> FormatError {
    FormatError::MalformedFile { path: path.to_path_buf(), reason: "expected a .tscf or .pgm file".into() }
}

/// Reads a confidence map in either encoding. PGM maps take their class id
/// from the file name and default to 0.
pub fn read_confmap(path: &Path) -> Result<ConfMap> {
    match extension(path).as_deref() {
        Some("tscf") => read_tscf(path),
        Some("pgm") => read_pgm(path, class_id_from_name(path).unwrap_or(0)),
        _ => Err(unknown_format(path)),
    }
}

pub fn write_confmap(map: &ConfMap, path: &Path) -> Result<()> {
    match extension(path).as_deref() {
        Some("tscf") => write_tscf(map, path),
        Some("pgm") => write_pgm(map, path, PgmDepth::Sixteen),
        _ => Err(unknown_format(path)),
    }
}

/// Reads an activation map: raw floats from `.tscf`, scaled samples from `.pgm`.
pub fn read_raw_map(path: &Path) -> Result<RawMap> {
    match extension(path).as_deref() {
        Some("tscf") => read_tscf_raw(path),
        Some("pgm") => {
            let g = read_greymap(path)?;
            let id = class_id_from_name(path).unwrap_or(0);
            RawMap::new(id, g.width, g.height, normalized(&g)).map_err(|e| map_error(path, e))
        }
        _ => Err(unknown_format(path)),
    }
}

/// Writes label codes as an 8-bit greymap.
pub fn write_mask(mask: &PseudoMask, path: &Path) -> Result<()> {
    let g = Greymap {
        width: mask.width(),
        height: mask.height(),
        maxval: 255,
        samples: mask.labels().iter().map(|&l| u16::from(l)).collect(),
    };
    write_greymap(&g, path)
}

pub fn read_mask(path: &Path) -> Result<PseudoMask> {
    let g = read_greymap(path)?;
    if g.maxval != 255 {
        return Err(FormatError::MalformedHeader { path: path.to_path_buf(), reason: "mask maxval must be 255".into() });
    }
    let labels = g.samples.iter().map(|&s| s as u8).collect();
    PseudoMask::new(g.width, g.height, labels)
        .map_err(|e| FormatError::MalformedFile { path: path.to_path_buf(), reason: e.to_string() })
}

//! Binary grid and label files, CSV interchange and 16-bit PGM export.
//!
//! Both binary files start with the 16-byte header
//!
//! ```text
//! magic "USUG" | version u16 | dtype u16 | height u32 | width u32
//! ```
//!
//! (all little-endian). dtype 0 is followed by `height * width` f64 values;
//! dtype 1 by `height * width` u32 labels, a u32 part count `P` and `P` f64
//! scores.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, UsuError};
use crate::grid::{AttributionGrid, LabelMap, Mask, NeighbourhoodSystem, SegmentPartition};

pub const MAGIC: &[u8; 4] = b"USUG";
pub const VERSION: u16 = 1;
pub const DTYPE_F64: u16 = 0;
pub const DTYPE_LABELS: u16 = 1;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsuError::Format(msg.into()))
}

fn write_header(w: &mut (impl Write + ?Sized), dtype: u16, height: usize, width: usize) -> Result<()> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| UsuError::Format(format!("dimension {v} exceeds u32")));
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&dtype.to_le_bytes())?;
    w.write_all(&dim(height)?.to_le_bytes())?;
    w.write_all(&dim(width)?.to_le_bytes())?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.at < n {
            return format_err(format!("truncated file: needed {n} bytes at offset {}", self.at));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| UsuError::Format("payload too large".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return format_err(format!("{} trailing bytes", self.bytes.len() - self.at));
        }
        Ok(())
    }
}

fn read_header(c: &mut Cursor<'_>, expected: u16) -> Result<(usize, usize)> {
    if c.take(4)? != MAGIC {
        return format_err("bad magic, not a USUG file");
    }
    let version = c.u16()?;
    if version != VERSION {
        return format_err(format!("unsupported version {version}"));
    }
    let dtype = c.u16()?;
    if dtype != expected {
        return format_err(format!("dtype {dtype}, expected {expected}"));
    }
    let h = c.u32()? as usize;
    let w = c.u32()? as usize;
    if h == 0 || w == 0 {
        return format_err("zero dimension");
    }
    Ok((h, w))
}

pub fn write_grid(w: &mut (impl Write + ?Sized), grid: &AttributionGrid) -> Result<()> {
    write_header(w, DTYPE_F64, grid.height(), grid.width())?;
    let mut buf = Vec::with_capacity(grid.len() * 8);
    for v in grid.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn decode_grid(bytes: &[u8]) -> Result<AttributionGrid> {
    let mut c = Cursor { bytes, at: 0 };
    let (h, w) = read_header(&mut c, DTYPE_F64)?;
    let values = c.f64s(
        h.checked_mul(w)
            .ok_or_else(|| UsuError::Format("grid too large".into()))?,
    )?;
    c.finish()?;
    AttributionGrid::new(h, w, values).map_err(|e| UsuError::Format(e.to_string()))
}

pub fn read_grid(r: &mut (impl Read + ?Sized)) -> Result<AttributionGrid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_grid(&bytes)
}

/// Writes labels followed by one score per part.
pub fn write_labels(w: &mut (impl Write + ?Sized), map: &LabelMap, scores: &[f64]) -> Result<()> {
    if scores.len() != map.count() {
        return format_err(format!("{} scores for {} parts", scores.len(), map.count()));
    }
    write_header(w, DTYPE_LABELS, map.height(), map.width())?;
    let mut buf = Vec::with_capacity(map.labels().len() * 4 + 4 + scores.len() * 8);
    for &l in map.labels() {
        buf.extend_from_slice(&(l as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(scores.len() as u32).to_le_bytes());
    for s in scores {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn decode_labels(bytes: &[u8]) -> Result<(LabelMap, Vec<f64>)> {
    let mut c = Cursor { bytes, at: 0 };
    let (h, w) = read_header(&mut c, DTYPE_LABELS)?;
    let n = h
        .checked_mul(w)
        .ok_or_else(|| UsuError::Format("label map too large".into()))?;
    let raw = c.take(
        n.checked_mul(4)
            .ok_or_else(|| UsuError::Format("label map too large".into()))?,
    )?;
    let labels: Vec<usize> = raw
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
        .collect();
    let parts = c.u32()? as usize;
    if let Some(bad) = labels.iter().find(|&&l| l >= parts) {
        return format_err(format!("label {bad} is not below the declared count {parts}"));
    }
    let scores = c.f64s(parts)?;
    c.finish()?;
    let map = LabelMap::new(h, w, labels).map_err(|e| UsuError::Format(e.to_string()))?;
    if map.count() != parts {
        return format_err(format!("declared {parts} parts, labels use {}", map.count()));
    }
    Ok((map, scores))
}

pub fn read_labels(r: &mut (impl Read + ?Sized)) -> Result<(LabelMap, Vec<f64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_labels(&bytes)
}

pub fn encode_grid(grid: &AttributionGrid) -> Vec<u8> {
    let mut out = Vec::new();
    write_grid(&mut out, grid).expect("writing to memory cannot fail");
    out
}

pub fn encode_partition(s: &SegmentPartition) -> Vec<u8> {
    let mut out = Vec::new();
    write_labels(&mut out, s.map(), s.scores()).expect("scores match the part count");
    out
}

/// Neighbourhood files carry a zero score block, which readers ignore.
pub fn encode_neighbourhoods(n: &NeighbourhoodSystem) -> Vec<u8> {
    let mut out = Vec::new();
    write_labels(&mut out, n.map(), &vec![0.0; n.count()]).expect("scores match the part count");
    out
}

/// Mask as a 0/1 grid file.
pub fn encode_mask(m: &Mask) -> Vec<u8> {
    encode_grid(&m.to_grid())
}

pub fn load_grid(path: &Path) -> Result<AttributionGrid> {
    decode_grid(&fs::read(path)?)
}

pub fn load_partition(path: &Path) -> Result<SegmentPartition> {
    let (map, scores) = decode_labels(&fs::read(path)?)?;
    SegmentPartition::new(map, scores).map_err(|e| UsuError::Format(e.to_string()))
}

pub fn load_neighbourhoods(path: &Path) -> Result<NeighbourhoodSystem> {
    let (map, _) = decode_labels(&fs::read(path)?)?;
    Ok(NeighbourhoodSystem::from_map(map))
}

/// One row per line, comma separated, shortest round-trip formatting.
pub fn grid_to_csv(grid: &AttributionGrid) -> String {
    let mut out = String::new();
    for row in grid.values().chunks(grid.width()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn grid_from_csv(text: &str) -> Result<AttributionGrid> {
    let mut values = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| UsuError::Format(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return format_err(format!("line {} has {} fields, expected {w}", n + 1, row.len()))
            }
            _ => {}
        }
        values.extend(row);
        height += 1;
    }
    let Some(width) = width else {
        return format_err("empty csv");
    };
    AttributionGrid::new(height, width, values).map_err(|e| UsuError::Format(e.to_string()))
}

/// Binary 16-bit PGM, min-max scaled; a constant grid maps to zero.
pub fn write_pgm16(w: &mut (impl Write + ?Sized), grid: &AttributionGrid) -> Result<()> {
    let v = grid.values();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    write!(w, "P5\n{} {}\n65535\n", grid.width(), grid.height())?;
    let mut buf = Vec::with_capacity(v.len() * 2);
    for &x in v {
        let level = if hi > lo {
            ((x - lo) / (hi - lo) * 65535.0).round() as u16
        } else {
            0
        };
        buf.extend_from_slice(&level.to_be_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip_is_bit_exact() {
        let g = AttributionGrid::new(2, 3, vec![0.1, -0.0, 1e-310, f64::MAX, -2.5, 1.0 / 3.0]).unwrap();
        let bytes = encode_grid(&g);
        assert_eq!(bytes.len(), 16 + 6 * 8);
        assert_eq!(&bytes[..4], b"USUG");
        let back = decode_grid(&bytes).unwrap();
        for (a, b) in g.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn label_round_trip() {
        let s = SegmentPartition::from_labels(2, 2, vec![0, 1, 1, 2], vec![0.25, 1.0, 0.0]).unwrap();
        let bytes = encode_partition(&s);
        let (map, scores) = decode_labels(&bytes).unwrap();
        assert_eq!(&map, s.map());
        assert_eq!(scores, s.scores());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let g = AttributionGrid::filled(2, 2, 1.0).unwrap();
        let bytes = encode_grid(&g);
        assert!(matches!(
            decode_grid(&bytes[..bytes.len() - 1]),
            Err(UsuError::Format(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_grid(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_grid(&magic).is_err());
        assert!(decode_labels(&bytes).is_err());
        let s = SegmentPartition::from_labels(1, 2, vec![0, 1], vec![0.5, 0.5]).unwrap();
        let mut lab = encode_partition(&s);
        lab[16] = 7; // first label beyond the declared count
        assert!(decode_labels(&lab).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = AttributionGrid::new(2, 2, vec![0.1, -3.0, 1e-20, 2.0 / 3.0]).unwrap();
        assert_eq!(grid_from_csv(&grid_to_csv(&g)).unwrap(), g);
        assert!(grid_from_csv("1,2\n3\n").is_err());
        assert!(grid_from_csv("").is_err());
    }

    #[test]
    fn pgm_header_and_scaling() {
        let g = AttributionGrid::new(1, 3, vec![-1.0, 0.0, 1.0]).unwrap();
        let mut out = Vec::new();
        write_pgm16(&mut out, &g).unwrap();
        let header = b"P5\n3 1\n65535\n";
        assert_eq!(&out[..header.len()], header);
        assert_eq!(&out[header.len()..], &[0, 0, 0x80, 0x00, 0xff, 0xff]);
    }
}

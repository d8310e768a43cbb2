//! File formats for cubes, label maps, and split masks.
//!
//! Deliberately minimal, bit-exact formats:
//! - cubes: one-line textual header `HSICUBE1 H W B f32le`, then a
//!   band-sequential little-endian f32 payload (band 0's full plane in
//!   row-major order, then band 1, ...);
//! - label maps: `H W` then H lines of W space-separated class ids;
//! - split masks: `H W`, `seed <u64>`, then H lines of W digits with
//!   0 = Excluded, 1 = Train, 2 = Test.
//!
//! Converters for third-party formats (ENVI, MAT) are a user-side step.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::datamodel::{HyperCube, LabelMap, SplitMask, SplitState};
use crate::error::{Error, Result};

pub const CUBE_MAGIC: &str = "HSICUBE1";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn write_cube(cube: &HyperCube, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(
        out,
        "{CUBE_MAGIC} {} {} {} f32le",
        cube.height(),
        cube.width(),
        cube.bands()
    )
    .map_err(|e| io_err(path, e))?;
    for band in 0..cube.bands() {
        for y in 0..cube.height() {
            for x in 0..cube.width() {
                let v = cube.get(y, x, band) as f32;
                out.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
            }
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_cube(path: &Path) -> Result<HyperCube> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| parse_err(path, "header is not valid UTF-8"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&CUBE_MAGIC) {
        return Err(parse_err(
            path,
            format!(
                "magic mismatch: expected {CUBE_MAGIC}, found {:?}",
                fields.first().copied().unwrap_or("")
            ),
        ));
    }
    if fields.len() != 5 || fields[4] != "f32le" {
        return Err(parse_err(
            path,
            format!("malformed header {header:?}, expected '{CUBE_MAGIC} H W B f32le'"),
        ));
    }
    let dim = |s: &str, name: &str| -> Result<usize> {
        s.parse::<u32>()
            .map(|v| v as usize)
            .map_err(|_| parse_err(path, format!("bad {name} field {s:?}")))
    };
    let h = dim(fields[1], "height")?;
    let w = dim(fields[2], "width")?;
    let b = dim(fields[3], "bands")?;
    let payload = &bytes[nl + 1..];
    let expected = h * w * b * 4;
    if payload.len() != expected {
        return Err(parse_err(
            path,
            format!(
                "truncated payload: expected {expected} bytes for {h}x{w}x{b}, found {}",
                payload.len()
            ),
        ));
    }
    let mut values = vec![0.0f64; h * w * b];
    for band in 0..b {
        for y in 0..h {
            for x in 0..w {
                let i = (band * h * w + y * w + x) * 4;
                let v = f32::from_le_bytes([
                    payload[i],
                    payload[i + 1],
                    payload[i + 2],
                    payload[i + 3],
                ]);
                if !v.is_finite() {
                    return Err(parse_err(
                        path,
                        format!("non-finite value {v} at (y={y}, x={x}, band={band})"),
                    ));
                }
                values[(y * w + x) * b + band] = v as f64;
            }
        }
    }
    HyperCube::new(h, w, b, values)
}

pub fn write_labels(labels: &LabelMap, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{} {}", labels.height(), labels.width()).map_err(|e| io_err(path, e))?;
    for y in 0..labels.height() {
        let row: Vec<String> = (0..labels.width())
            .map(|x| labels.get(y, x).to_string())
            .collect();
        writeln!(out, "{}", row.join(" ")).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_labels(path: &Path) -> Result<LabelMap> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?;
    let (h, w) = parse_grid_header(path, header)?;
    let mut labels = Vec::with_capacity(h * w);
    for (row, line) in lines.by_ref().take(h).enumerate() {
        let mut n = 0usize;
        for tok in line.split_whitespace() {
            let v: u16 = tok.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("line {}: invalid class id {tok:?}", row + 2),
                )
            })?;
            labels.push(v);
            n += 1;
        }
        if n != w {
            return Err(parse_err(
                path,
                format!("line {}: ragged row with {n} entries, expected {w}", row + 2),
            ));
        }
    }
    if labels.len() != h * w {
        return Err(parse_err(
            path,
            format!("expected {h} rows, found {}", labels.len() / w),
        ));
    }
    LabelMap::new(h, w, labels)
}

pub fn write_split(split: &SplitMask, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{} {}", split.height(), split.width()).map_err(|e| io_err(path, e))?;
    writeln!(out, "seed {}", split.rng_seed()).map_err(|e| io_err(path, e))?;
    for y in 0..split.height() {
        let row: Vec<&str> = (0..split.width())
            .map(|x| match split.get(y, x) {
                SplitState::Excluded => "0",
                SplitState::Train => "1",
                SplitState::Test => "2",
            })
            .collect();
        writeln!(out, "{}", row.join(" ")).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_split(path: &Path) -> Result<SplitMask> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, "empty file"))?;
    let (h, w) = parse_grid_header(path, header)?;
    let seed_line = lines
        .next()
        .ok_or_else(|| parse_err(path, "missing seed line"))?;
    let seed = seed_line
        .strip_prefix("seed ")
        .and_then(|s| s.trim().parse::<u64>().ok())
        .ok_or_else(|| parse_err(path, format!("malformed seed line {seed_line:?}")))?;
    let mut states = Vec::with_capacity(h * w);
    for (row, line) in lines.take(h).enumerate() {
        let mut n = 0usize;
        for tok in line.split_whitespace() {
            let s = match tok {
                "0" => SplitState::Excluded,
                "1" => SplitState::Train,
                "2" => SplitState::Test,
                other => {
                    return Err(parse_err(
                        path,
                        format!(
                            "line {}: split value {other:?} outside {{0,1,2}}",
                            row + 3
                        ),
                    ))
                }
            };
            states.push(s);
            n += 1;
        }
        if n != w {
            return Err(parse_err(
                path,
                format!("line {}: ragged row with {n} entries, expected {w}", row + 3),
            ));
        }
    }
    if states.len() != h * w {
        return Err(parse_err(path, "fewer rows than header declares"));
    }
    SplitMask::from_states(h, w, states, seed)
}

fn parse_grid_header(path: &Path, header: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(parse_err(
            path,
            format!("malformed header {header:?}, expected 'H W'"),
        ));
    }
    let h: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(path, format!("bad height {:?}", fields[0])))?;
    let w: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(path, format!("bad width {:?}", fields[1])))?;
    if h == 0 || w == 0 {
        return Err(parse_err(path, "dimensions must be >= 1"));
    }
    Ok((h, w))
}

//! On-disk formats: binary netpbm images (P4/P5/P6), a little-endian `f32`
//! raw array format for posterior maps, flow fields and age maps, and plain
//! text trajectories.
//!
//! Raw array layout: 16-byte header `b"RAWF"`, width (u32 LE), height
//! (u32 LE), channel count (u32 LE), followed by `channels * width * height`
//! little-endian `f32` values stored channel-planar, row-major.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{AgeCountMap, BloodMask, FlowField, Frame, GridDims, Pixel, PixelTrajectory, PosteriorMap};

pub const RAW_MAGIC: &[u8; 4] = b"RAWF";

struct PnmHeader {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_offset: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::Format("not a netpbm file".into()));
    }
    let magic = [bytes[0], bytes[1]];
    let needs_maxval = magic[1] != b'4';
    let mut pos = 2;
    let mut fields = [0usize; 3];
    let wanted = if needs_maxval { 3 } else { 2 };
    for field in fields.iter_mut().take(wanted) {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("bad netpbm header number".into()))?;
    }
    // exactly one whitespace byte separates header and raster
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format("missing raster separator".into()));
    }
    pos += 1;
    Ok(PnmHeader {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: if needs_maxval { fields[2] } else { 1 },
        data_offset: pos,
    })
}

/// Encodes a frame as an 8-bit binary graymap.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let d = frame.dims();
    let mut out = format!("P5\n{} {}\n255\n", d.width, d.height).into_bytes();
    out.extend(frame.pixels().iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

/// Decodes an 8- or 16-bit binary graymap, normalising to `[0, 1]`.
pub fn decode_pgm(bytes: &[u8], timestamp: usize) -> Result<Frame> {
    let h = parse_pnm_header(bytes)?;
    if &h.magic != b"P5" {
        return Err(Error::Format("expected P5 graymap".into()));
    }
    if h.maxval == 0 || h.maxval > 65535 {
        return Err(Error::Format(format!("bad maxval {}", h.maxval)));
    }
    let dims = GridDims::new(h.width, h.height).map_err(|e| Error::Format(e.to_string()))?;
    let bpp = if h.maxval < 256 { 1 } else { 2 };
    let data = &bytes[h.data_offset..];
    if data.len() < dims.len() * bpp {
        return Err(Error::Format("truncated graymap raster".into()));
    }
    let scale = h.maxval as f64;
    let pixels = (0..dims.len())
        .map(|i| {
            let raw = if bpp == 1 {
                data[i] as f64
            } else {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as f64
            };
            (raw / scale).min(1.0)
        })
        .collect();
    Frame::new(dims, pixels, timestamp)
}

/// Encodes a mask as a packed binary bitmap (set bit = 1 = black).
pub fn encode_pbm(mask: &BloodMask) -> Vec<u8> {
    let d = mask.dims();
    let mut out = format!("P4\n{} {}\n", d.width, d.height).into_bytes();
    let stride = d.width.div_ceil(8);
    for row in mask.bits().chunks(d.width) {
        let mut packed = vec![0u8; stride];
        for (c, &b) in row.iter().enumerate() {
            if b {
                packed[c / 8] |= 0x80 >> (c % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    out
}

pub fn decode_pbm(bytes: &[u8]) -> Result<BloodMask> {
    let h = parse_pnm_header(bytes)?;
    if &h.magic != b"P4" {
        return Err(Error::Format("expected P4 bitmap".into()));
    }
    let dims = GridDims::new(h.width, h.height).map_err(|e| Error::Format(e.to_string()))?;
    let stride = dims.width.div_ceil(8);
    let data = &bytes[h.data_offset..];
    if data.len() < stride * dims.height {
        return Err(Error::Format("truncated bitmap raster".into()));
    }
    let mut bits = Vec::with_capacity(dims.len());
    for row in data.chunks(stride).take(dims.height) {
        bits.extend((0..dims.width).map(|c| row[c / 8] & (0x80 >> (c % 8)) != 0));
    }
    BloodMask::new(dims, bits)
}

/// Encodes an RGB image as a binary pixmap.
pub fn encode_ppm(dims: GridDims, rgb: &[[u8; 3]]) -> Result<Vec<u8>> {
    if rgb.len() != dims.len() {
        return Err(Error::LengthMismatch { dims, len: rgb.len() });
    }
    let mut out = format!("P6\n{} {}\n255\n", dims.width, dims.height).into_bytes();
    out.extend(rgb.iter().flatten());
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<(GridDims, Vec<[u8; 3]>)> {
    let h = parse_pnm_header(bytes)?;
    if &h.magic != b"P6" || h.maxval != 255 {
        return Err(Error::Format("expected 8-bit P6 pixmap".into()));
    }
    let dims = GridDims::new(h.width, h.height).map_err(|e| Error::Format(e.to_string()))?;
    let data = &bytes[h.data_offset..];
    if data.len() < dims.len() * 3 {
        return Err(Error::Format("truncated pixmap raster".into()));
    }
    Ok((dims, data.chunks(3).take(dims.len()).map(|c| [c[0], c[1], c[2]]).collect()))
}

/// Encodes channel-planar data in the raw float format.
pub fn encode_raw(dims: GridDims, channels: &[&[f64]]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + 4 * dims.len() * channels.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(dims.width as u32).to_le_bytes());
    out.extend_from_slice(&(dims.height as u32).to_le_bytes());
    out.extend_from_slice(&(channels.len() as u32).to_le_bytes());
    for ch in channels {
        if ch.len() != dims.len() {
            return Err(Error::LengthMismatch { dims, len: ch.len() });
        }
        for &v in *ch {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_raw(bytes: &[u8]) -> Result<(GridDims, Vec<Vec<f64>>)> {
    if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
        return Err(Error::Format("missing RAWF header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let dims = GridDims::new(word(4), word(8)).map_err(|e| Error::Format(e.to_string()))?;
    let nch = word(12);
    let body = &bytes[16..];
    if body.len() != 4 * nch * dims.len() {
        return Err(Error::Format(format!(
            "raw body has {} bytes, expected {}",
            body.len(),
            4 * nch * dims.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((dims, values.chunks(dims.len()).map(|c| c.to_vec()).collect()))
}

fn expect_channels(got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Format(format!("expected {want} channel(s), found {got}")));
    }
    Ok(())
}

pub fn encode_posterior(map: &PosteriorMap) -> Vec<u8> {
    encode_raw(map.dims(), &[map.prob()]).expect("dims consistent")
}

pub fn decode_posterior(bytes: &[u8]) -> Result<PosteriorMap> {
    let (dims, mut ch) = decode_raw(bytes)?;
    expect_channels(ch.len(), 1)?;
    PosteriorMap::new(dims, ch.remove(0)).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_flow(flow: &FlowField) -> Vec<u8> {
    encode_raw(flow.dims(), &[flow.u(), flow.v()]).expect("dims consistent")
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    let (dims, mut ch) = decode_raw(bytes)?;
    expect_channels(ch.len(), 2)?;
    let v = ch.pop().unwrap();
    let u = ch.pop().unwrap();
    FlowField::new(dims, u, v).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_ages(ages: &AgeCountMap) -> Vec<u8> {
    let values: Vec<f64> = ages.counts().iter().map(|&c| c as f64).collect();
    encode_raw(ages.dims(), &[&values]).expect("dims consistent")
}

pub fn decode_ages(bytes: &[u8]) -> Result<AgeCountMap> {
    let (dims, ch) = decode_raw(bytes)?;
    expect_channels(ch.len(), 1)?;
    let counts = ch[0]
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::Format(format!("age count {v} is not a non-negative integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    AgeCountMap::new(dims, counts)
}

/// One `"col row"` line per waypoint.
pub fn encode_trajectory(traj: &PixelTrajectory) -> String {
    traj.waypoints
        .iter()
        .map(|p| format!("{} {}\n", p.col, p.row))
        .collect()
}

pub fn decode_trajectory(text: &str) -> Result<PixelTrajectory> {
    let mut waypoints = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(col)), Some(Ok(row)), None) => waypoints.push(Pixel::new(col, row)),
            _ => return Err(Error::Format(format!("trajectory line {}: {line:?}", i + 1))),
        }
    }
    Ok(PixelTrajectory::new(waypoints))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path)?)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    Ok(std::fs::write(path, bytes)?)
}

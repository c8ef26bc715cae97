//! RGBDF raster files and PPM/PGM previews.
//!
//! RGBDF layout: `RGBDF1\n`, then ASCII `W H C\n`, then `W*H*C` little-endian
//! `f32` values, row-major and channel-interleaved.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{Raster, RasterState, STATE_CHANNELS};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"RGBDF1\n";

pub fn write_raster<W: Write>(raster: &Raster, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    writeln!(
        w,
        "{} {} {}",
        raster.width(),
        raster.height(),
        raster.channels()
    )?;
    let mut buf = Vec::with_capacity(raster.data().len() * 4);
    for v in raster.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_raster<R: Read>(r: R) -> Result<Raster> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated RGBDF header".into()))?;
    if magic != MAGIC {
        return Err(Error::Format("bad RGBDF magic".into()));
    }
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::Format(format!("unreadable RGBDF header: {e}")))?;
    if !line.ends_with('\n') {
        return Err(Error::Format("unterminated RGBDF header".into()));
    }
    let dims: Vec<usize> = line
        .split_ascii_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("bad RGBDF dimensions '{}'", line.trim_end())))?;
    let [w, h, c] = dims[..] else {
        return Err(Error::Format(format!(
            "expected 'W H C', got '{}'",
            line.trim_end()
        )));
    };
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(c))
        .filter(|&n| n > 0 && n <= 1 << 28)
        .ok_or_else(|| Error::Format(format!("implausible RGBDF size {w}x{h}x{c}")))?;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated RGBDF payload".into()))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).unwrap_or(0) != 0 {
        return Err(Error::Format("trailing bytes after RGBDF payload".into()));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Raster::from_vec(w, h, c, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_raster(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_raster(raster, &mut buf).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_raster(&bytes[..])
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write the RGB channels as binary P6 to `path` and the depth channel as a
/// binary P5 next to it (`<stem>.depth.pgm`). Returns the PGM path.
pub fn export_ppm(state: &RasterState, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let (w, h) = (state.width(), state.height());
    let mut ppm = format!("P6\n{w} {h}\n255\n").into_bytes();
    let mut pgm = format!("P5\n{w} {h}\n255\n").into_bytes();
    for px in state.data().chunks_exact(STATE_CHANNELS) {
        ppm.extend(px[..3].iter().map(|&v| quantize(v)));
        pgm.push(quantize(px[3]));
    }
    fs::write(path, ppm).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "raster".into());
    let depth_path = path.with_file_name(format!("{stem}.depth.pgm"));
    fs::write(&depth_path, pgm).map_err(|e| Error::io(&depth_path, e))?;
    Ok(depth_path)
}

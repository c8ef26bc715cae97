//! Parameter checkpoints: `AFNET1\n`, `key=value` lines, a `---` line, then
//! every parameter as a little-endian `f32` in layout order.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::net::{NetConfig, Network};
use crate::error::{Error, Result};

fn stream(e: std::io::Error) -> Error {
    Error::io("<checkpoint stream>", e)
}

const MAGIC: &str = "AFNET1";
const SEPARATOR: &str = "---";

/// Serialize parameters plus free-form metadata.
pub fn write_checkpoint<W: Write>(
    mut w: W,
    net: &Network<f32>,
    meta: &BTreeMap<String, String>,
) -> Result<()> {
    writeln!(w, "{MAGIC}").map_err(stream)?;
    for (k, v) in net.config.to_pairs() {
        writeln!(w, "{k}={v}").map_err(stream)?;
    }
    writeln!(w, "params={}", net.params.len()).map_err(stream)?;
    for (k, v) in meta {
        if k.contains('=') || k.contains('\n') || v.contains('\n') {
            return Err(Error::RejectedInput(format!("bad metadata entry {k:?}")));
        }
        writeln!(w, "{k}={v}").map_err(stream)?;
    }
    writeln!(w, "{SEPARATOR}").map_err(stream)?;
    let mut bytes = Vec::with_capacity(net.params.len() * 4);
    for p in &net.params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    w.write_all(&bytes).map_err(stream)?;
    Ok(())
}

fn key(map: &BTreeMap<String, String>, k: &str) -> Result<usize> {
    map.get(k)
        .ok_or_else(|| Error::Format(format!("checkpoint missing {k}")))?
        .parse()
        .map_err(|_| Error::Format(format!("checkpoint key {k} is not an integer")))
}

/// Parse a checkpoint; returns the network and every header entry.
pub fn read_checkpoint<R: Read>(r: R) -> Result<(Network<f32>, BTreeMap<String, String>)> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    r.read_line(&mut line).map_err(stream)?;
    if line.trim_end_matches('\n') != MAGIC {
        return Err(Error::Format("not a network checkpoint".into()));
    }
    let mut header = BTreeMap::new();
    loop {
        line.clear();
        if r.read_line(&mut line).map_err(stream)? == 0 {
            return Err(Error::Format("checkpoint header not terminated".into()));
        }
        let l = line.trim_end_matches('\n');
        if l == SEPARATOR {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line {l:?}")))?;
        header.insert(k.to_string(), v.to_string());
    }
    let config = NetConfig {
        resolution: key(&header, "resolution")?,
        channels: key(&header, "channels")?,
        latent: key(&header, "latent")?,
        memory: key(&header, "memory")?,
        hidden: key(&header, "hidden")?,
        dense: [key(&header, "dense0")?, key(&header, "dense1")?],
    };
    let count = key(&header, "params")?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(stream)?;
    if bytes.len() != count * 4 {
        return Err(Error::Format(format!(
            "checkpoint holds {} bytes of parameters, expected {}",
            bytes.len(),
            count * 4
        )));
    }
    let params: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Format(
            "checkpoint holds non-finite parameters".into(),
        ));
    }
    Ok((Network::from_params(config, params)?, header))
}

pub fn save_checkpoint(
    path: &Path,
    net: &Network<f32>,
    meta: &BTreeMap<String, String>,
) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_checkpoint(&mut w, net, meta)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Network<f32>, BTreeMap<String, String>)> {
    read_checkpoint(std::fs::File::open(path).map_err(|e| Error::io(path, e))?)
}

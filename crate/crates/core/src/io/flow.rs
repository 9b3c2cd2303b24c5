use std::path::{Path, PathBuf};

use super::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::frame::{FlowField, Grid};

pub const FLOW_MAGIC: f32 = 202021.25;

/// Sidecar validity mask path for a `.flo` file.
pub fn mask_path(flo: &Path) -> PathBuf {
    flo.with_extension("mask")
}

/// Encodes `(flo, mask)` byte buffers. Flow is narrowed to f32; invalid
/// pixels keep whatever values the field holds.
pub fn encode_flow(flow: &FlowField) -> (Vec<u8>, Vec<u8>) {
    let (h, w) = flow.shape();
    let mut flo = Vec::with_capacity(12 + 8 * w * h);
    flo.extend_from_slice(&FLOW_MAGIC.to_le_bytes());
    flo.extend_from_slice(&(w as i32).to_le_bytes());
    flo.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in flow.u.as_slice().iter().zip(flow.v.as_slice()) {
        flo.extend_from_slice(&(*u as f32).to_le_bytes());
        flo.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mask = flow.valid.as_slice().iter().map(|&b| b as u8).collect();
    (flo, mask)
}

/// Decodes a `.flo` buffer and an optional mask buffer. Without a mask
/// every pixel is valid.
pub fn decode_flow(flo: &[u8], mask: Option<&[u8]>, path: &Path) -> Result<FlowField> {
    let mut r = Reader::new(flo, path);
    let magic = r.f32()?;
    if magic != FLOW_MAGIC {
        return Err(r.format_err(format!("bad magic {magic}")));
    }
    let w = r.i32()?;
    let h = r.i32()?;
    if w < 0 || h < 0 {
        return Err(r.format_err(format!("negative size {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    if r.remaining() != 8 * w * h {
        return Err(r.corrupt(format!("{w}x{h} flow needs {} bytes, found {}", 8 * w * h, r.remaining())));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        u.push(r.f32()? as f64);
        v.push(r.f32()? as f64);
    }
    let valid = match mask {
        None => vec![true; w * h],
        Some(m) => {
            let mp = mask_path(path);
            if m.len() != w * h {
                return Err(Error::Corrupt {
                    path: mp,
                    reason: format!("mask has {} bytes for {w}x{h} flow", m.len()),
                });
            }
            m.iter()
                .map(|&b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    _ => Err(Error::Corrupt {
                        path: mp.clone(),
                        reason: format!("mask byte {b}"),
                    }),
                })
                .collect::<Result<_>>()?
        }
    };
    FlowField::new(
        Grid::from_vec(w, h, u)?,
        Grid::from_vec(w, h, v)?,
        Grid::from_vec(w, h, valid)?,
    )
}

/// Writes `path` and its `.mask` sidecar.
pub fn write_flow(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let path = path.as_ref();
    let (flo, mask) = encode_flow(flow);
    write_file(path, &flo)?;
    write_file(&mask_path(path), &mask)
}

/// Reads `path`; the `.mask` sidecar is optional.
pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let flo = read_file(path)?;
    let mp = mask_path(path);
    let mask = if mp.exists() { Some(read_file(&mp)?) } else { None };
    decode_flow(&flo, mask.as_deref(), path)
}

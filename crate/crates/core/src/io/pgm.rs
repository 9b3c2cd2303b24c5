use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::frame::{Frame, Grid};

/// 8-bit binary PGM with intensities quantised to `round(I * 255)`.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(
        frame
            .intensities
            .as_slice()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Parses a binary PGM with `maxval <= 255`. The timestamp is not stored in
/// the file and must be supplied.
pub fn decode_pgm(bytes: &[u8], t: i64, path: &Path) -> Result<Frame> {
    let err = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(err(format!("unsupported magic {:?}", fields[0])));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad header field {s:?}")));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(err(format!("unsupported maxval {maxval}")));
    }
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() != w * h {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!("{w}x{h} image needs {} bytes, found {}", w * h, raster.len()),
        });
    }
    let scale = maxval as f64;
    let data = raster.iter().map(|&b| (b as f64 / scale).min(1.0)).collect();
    Ok(Frame::new(Grid::from_vec(w, h, data)?, t))
}

pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    write_file(path.as_ref(), &encode_pgm(frame))
}

pub fn read_frame(path: impl AsRef<Path>, t: i64) -> Result<Frame> {
    let path = path.as_ref();
    decode_pgm(&read_file(path)?, t, path)
}

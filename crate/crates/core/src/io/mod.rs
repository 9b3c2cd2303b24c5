//! On-disk formats. All multi-byte fields are little-endian.
//!
//! | file      | layout |
//! |-----------|--------|
//! | `.evs`    | `"EVS1"`, u32 version = 1, u32 width, u32 height, i64 t_start, i64 t_end, u64 count, then `count` 16-byte records `{i64 t, u16 x, u16 y, i8 p, 3 zero bytes}` |
//! | `.flo`    | Middlebury: f32 202021.25, i32 width, i32 height, interleaved f32 `(u, v)` rows |
//! | `.mask`   | one byte (0/1) per pixel, row-major, next to the `.flo` with the same stem |
//! | `.pgm`    | binary 8-bit P5 |
//! | `.vox`    | `"VOX1"`, u32 bins, u32 height, u32 width, f32 values in `[b][y][x]` order |

mod dataset;
mod events;
mod flow;
mod pgm;
mod voxel;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use dataset::{
    append_manifest, package_sample, read_manifest, threshold_tag, validate_dataset, write_manifest, write_timestamps,
    EventFiles, FrameEntry, ManifestEntry, SampleParts, ThresholdEvents, MANIFEST_FILE,
    TIMESTAMPS_FILE,
};
pub use events::{decode_events, encode_events, read_events, write_events, EVENTS_HEADER_LEN, EVENTS_MAGIC, EVENT_RECORD_LEN};
pub use flow::{decode_flow, encode_flow, mask_path, read_flow, write_flow, FLOW_MAGIC};
pub use pgm::{decode_pgm, encode_pgm, read_frame, write_frame};
pub use voxel::{decode_voxels, encode_voxels, read_voxels, write_voxels, VOXEL_MAGIC};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Little-endian cursor over a byte slice that reports truncation as a
/// format error against `path`.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &Path) -> Self {
        Self {
            bytes,
            pos: 0,
            path: path.to_path_buf(),
        }
    }

    pub(crate) fn format_err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    pub(crate) fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    pub(crate) fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.format_err(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }

    pub(crate) fn i32(&mut self) -> Result<i32> {
        self.take().map(i32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }

    pub(crate) fn i64(&mut self) -> Result<i64> {
        self.take().map(i64::from_le_bytes)
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        self.take().map(f32::from_le_bytes)
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

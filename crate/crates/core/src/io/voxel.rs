use std::path::Path;

use super::{read_file, write_file, Reader};
use crate::error::Result;
use crate::voxel::VoxelGrid;

pub const VOXEL_MAGIC: &[u8; 4] = b"VOX1";

/// Values are narrowed to f32. The time window is not stored.
pub fn encode_voxels(grid: &VoxelGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * grid.values().len());
    out.extend_from_slice(VOXEL_MAGIC);
    for d in [grid.bins, grid.height, grid.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in grid.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// The decoded grid has `t0 = t_n = 0` since the file carries no window.
pub fn decode_voxels(bytes: &[u8], path: &Path) -> Result<VoxelGrid> {
    let mut r = Reader::new(bytes, path);
    if &r.take::<4>()? != VOXEL_MAGIC {
        return Err(r.format_err("bad magic"));
    }
    let bins = r.u32()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    if bins < 2 {
        return Err(r.format_err(format!("{bins} bins")));
    }
    let n = bins * h * w;
    if r.remaining() != 4 * n {
        return Err(r.corrupt(format!("expected {} value bytes, found {}", 4 * n, r.remaining())));
    }
    let values = (0..n).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
    VoxelGrid::from_values(bins, w, h, 0, 0, values)
}

pub fn write_voxels(path: impl AsRef<Path>, grid: &VoxelGrid) -> Result<()> {
    write_file(path.as_ref(), &encode_voxels(grid))
}

pub fn read_voxels(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    decode_voxels(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn round_trip() {
        let values: Vec<f64> = (0..3 * 2 * 4).map(|i| (i as f64 - 7.0) * 0.375).collect();
        let g = VoxelGrid::from_values(3, 4, 2, 0, 0, values).unwrap();
        let bytes = encode_voxels(&g);
        assert_eq!(&bytes[..4], b"VOX1");
        assert_eq!(bytes.len(), 16 + 4 * 24);
        assert_eq!(decode_voxels(&bytes, Path::new("v.vox")).unwrap(), g);
    }

    #[test]
    fn rejects_truncation() {
        let g = VoxelGrid::zeros(2, 2, 2, 0, 0).unwrap();
        let bytes = encode_voxels(&g);
        assert!(matches!(
            decode_voxels(&bytes[..bytes.len() - 1], Path::new("v.vox")),
            Err(Error::Corrupt { .. })
        ));
    }
}

//! Flat binary interchange format for feature grids: a 16-byte header of
//! four u32 little-endian words (h, w, c, reserved 0) followed by h*w*c f32
//! little-endian values, row-major with channels innermost.

use std::path::Path;

use shiftlab::swca::FeatureGrid;

use crate::error::{io_err, CliError, CliResult};
use crate::util::write_atomic;

pub fn write_grid(grid: &FeatureGrid, path: &Path) -> CliResult<()> {
    let (h, w, c) = grid.shape();
    let mut bytes = Vec::with_capacity(16 + grid.values().len() * 4);
    for dim in [h as u32, w as u32, c as u32, 0u32] {
        bytes.extend_from_slice(&dim.to_le_bytes());
    }
    for v in grid.values() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    write_atomic(path, &bytes)
}

pub fn read_grid(path: &Path) -> CliResult<FeatureGrid> {
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let bad = |message: String| CliError::Other(format!("{}: {message}", path.display()));
    if bytes.len() < 16 {
        return Err(bad("truncated header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (h, w, c, reserved) = (word(0), word(1), word(2), word(3));
    if reserved != 0 {
        return Err(bad(format!(
            "reserved header word is {reserved}, expected 0"
        )));
    }
    let expected = 16 + h * w * c * 4;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for {h}x{w}x{c}, got {}",
            bytes.len()
        )));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    FeatureGrid::new(h, w, c, values).map_err(CliError::Core)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_round_trip() {
        let dir = std::env::temp_dir().join(format!("shiftlab-gridio-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.bin");
        let grid = FeatureGrid::from_fn(3, 5, 2, |y, x, c| (y * 100 + x * 10 + c) as f64 / 7.0);
        write_grid(&grid, &path).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back.shape(), (3, 5, 2));
        for (a, b) in grid.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "{a} vs {b}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

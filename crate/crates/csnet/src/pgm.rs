//! Binary PGM (P5) output for filter visualization.

use std::path::{Path, PathBuf};

use csnet_core::FilterBank;

use crate::error::{CsnetError, Result};

/// `P5` header followed by raw 8-bit rows.
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match {width}x{height}");
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Min-max maps values onto 0..=255; a constant input becomes uniform 128.
pub fn to_gray(values: &[f64]) -> Vec<u8> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return vec![128; values.len()];
    }
    values.iter().map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8).collect()
}

/// Writes `stage{s}_filter{i}_spatial.pgm` and `stage{s}_filter{i}_dct.pgm`
/// (DCT magnitudes) for every filter; returns the written paths.
pub fn write_filter_images(bank: &FilterBank, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CsnetError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (s, stage) in bank.stages.iter().enumerate() {
        for (i, f) in stage.filters.iter().enumerate() {
            let (h, w) = (f.spatial.rows(), f.spatial.cols());
            let magnitudes: Vec<f64> = f.dct.iter().map(|v| v.abs()).collect();
            for (kind, values) in [("spatial", f.spatial.data()), ("dct", magnitudes.as_slice())] {
                let path = out_dir.join(format!("stage{}_filter{}_{}.pgm", s + 1, i + 1, kind));
                std::fs::write(&path, encode_pgm(w, h, &to_gray(values))).map_err(|e| CsnetError::io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

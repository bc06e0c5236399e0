//! Binary PGM (P5) rasters: class index `k` maps to gray level
//! `k * floor(255 / (K - 1))`.

use std::path::Path;

use bcdm_core::analysis::GridRaster;

use crate::error::{CliError, Result};

pub fn write_pgm(path: &Path, raster: &GridRaster, num_classes: usize) -> Result<()> {
    if num_classes < 2 {
        return Err(CliError::Data("raster needs at least 2 classes".into()));
    }
    let (rx, ry) = raster.spec.resolution;
    let step = 255 / (num_classes - 1);
    let mut bytes = format!("P5\n{rx} {ry}\n255\n").into_bytes();
    for &label in &raster.labels {
        bytes.push((label * step).min(255) as u8);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

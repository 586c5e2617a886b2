use std::path::Path;

use super::{PolarSample, Result};

/// Reads a polar CSV with header `va_mps,phi_rad,vz_mps`.
pub fn read_polar_csv(path: impl AsRef<Path>) -> Result<Vec<PolarSample>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_polar_csv(path: impl AsRef<Path>, samples: &[PolarSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

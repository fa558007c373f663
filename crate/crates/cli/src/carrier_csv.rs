//! Simple admissible measures as CSV: one row per carrier node.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mclab_core::carriers::SimpleAdmissibleMeasure;

use crate::output::{write_csv, Cell};

pub const HEADER: [&str; 5] = ["s", "theta", "t", "slope", "phi"];

pub fn read_measure(path: &Path) -> Result<SimpleAdmissibleMeasure> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read carrier {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    if header != HEADER {
        bail!(
            "{}: expected columns {}, found {}",
            path.display(),
            HEADER.join(","),
            header.join(",")
        );
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = [0.0; 5];
        for (k, cell) in rec.iter().enumerate().take(5) {
            row[k] = cell
                .trim()
                .parse()
                .with_context(|| format!("{}: row {}, column {}", path.display(), line + 1, HEADER[k]))?;
        }
        rows.push(row);
    }
    SimpleAdmissibleMeasure::from_rows(&rows).with_context(|| format!("{}: not a valid carrier", path.display()))
}

pub fn write_measure(path: &Path, m: &SimpleAdmissibleMeasure) -> Result<()> {
    write_csv(path, &HEADER, m.rows().map(|r| r.iter().map(|&v| Cell::F(v)).collect()))
}

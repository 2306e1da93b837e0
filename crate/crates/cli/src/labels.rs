//! Cluster labels as `point,label` CSV rows, points 0-based, labels 1-based.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct Row {
    point: usize,
    label: usize,
}

pub fn write(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (point, &label) in labels.iter().enumerate() {
        w.serialize(Row { point, label })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads labels for exactly `expected` points, in any row order.
pub fn read(path: &Path, expected: usize) -> Result<Vec<usize>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut labels = vec![0; expected];
    let mut seen = 0;
    for row in r.deserialize() {
        let Row { point, label } = row?;
        if point >= expected {
            bail!("point {point} out of range for {expected} points");
        }
        if label == 0 {
            bail!("labels are 1-based, point {point} has 0");
        }
        if labels[point] != 0 {
            bail!("point {point} listed twice");
        }
        labels[point] = label;
        seen += 1;
    }
    if seen != expected {
        bail!("{seen} labels for {expected} points");
    }
    Ok(labels)
}

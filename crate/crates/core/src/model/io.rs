//! On-disk dataset directory: `values.csv`, `mask.csv`, `meta.json`, and an
//! optional `truth.csv` holding the complete ground-truth matrix.

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CaseTag, ObservationPattern, ObservedDataset};
use crate::error::{Result, UosError};

pub const VALUES_FILE: &str = "values.csv";
pub const MASK_FILE: &str = "mask.csv";
pub const META_FILE: &str = "meta.json";
pub const TRUTH_FILE: &str = "truth.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    #[serde(rename = "N")]
    pub num_points: usize,
    #[serde(rename = "L")]
    pub num_subspaces: usize,
    pub d: usize,
    pub counts: Vec<usize>,
    pub case_tag: CaseTag,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(UosError::Format(msg.into()))
}

fn write_matrix_csv(
    path: &Path,
    rows: usize,
    cols: usize,
    cell: impl Fn(usize, usize) -> Option<String>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for r in 0..rows {
        let record: Vec<String> = (0..cols).map(|c| cell(r, c).unwrap_or_default()).collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless CSV into rows of optional numbers (empty field = `None`).
fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<Option<f64>>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut row = Vec::with_capacity(rec.len());
        for field in rec.iter() {
            let field = field.trim();
            if field.is_empty() {
                row.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| {
                    UosError::Format(format!("{}: bad number {field:?}", path.display()))
                })?;
                row.push(Some(v));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn shape_of(rows: &[Vec<Option<f64>>], path: &Path) -> Result<(usize, usize)> {
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != cols) {
        return format_err(format!("{}: ragged rows", path.display()));
    }
    Ok((rows.len(), cols))
}

/// Writes `dataset` to `dir` (created if missing).
pub fn write_dataset(dir: &Path, dataset: &ObservedDataset, meta: &DatasetMeta) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (n, big_n) = dataset.zero_filled.shape();
    if meta.n != n || meta.num_points != big_n {
        return format_err(format!(
            "meta says {}x{} but data is {n}x{big_n}",
            meta.n, meta.num_points
        ));
    }
    let ind = dataset.pattern.indicator();
    write_matrix_csv(&dir.join(VALUES_FILE), n, big_n, |r, c| {
        (ind[(r, c)] != 0.0).then(|| dataset.zero_filled[(r, c)].to_string())
    })?;
    write_matrix_csv(&dir.join(MASK_FILE), n, big_n, |r, c| {
        Some(if ind[(r, c)] != 0.0 { "1" } else { "0" }.to_string())
    })?;
    if let Some(full) = &dataset.full_matrix {
        write_matrix_csv(&dir.join(TRUTH_FILE), n, big_n, |r, c| {
            Some(full[(r, c)].to_string())
        })?;
    }
    serde_json::to_writer_pretty(File::create(dir.join(META_FILE))?, meta)?;
    Ok(())
}

/// Reads the complete matrix from `truth.csv` if present.
pub fn read_truth(dir: &Path) -> Result<Option<DMatrix<f64>>> {
    let path = dir.join(TRUTH_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let rows = read_matrix_csv(&path)?;
    let (n, big_n) = shape_of(&rows, &path)?;
    let mut m = DMatrix::zeros(n, big_n);
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            m[(r, c)] = v.ok_or_else(|| {
                UosError::Format(format!("{}: missing entry ({r},{c})", path.display()))
            })?;
        }
    }
    Ok(Some(m))
}

/// Reads a dataset directory, rejecting any shape disagreement between files.
pub fn read_dataset(dir: &Path) -> Result<(ObservedDataset, DatasetMeta)> {
    let meta: DatasetMeta = serde_json::from_reader(File::open(dir.join(META_FILE))?)?;
    let values_path = dir.join(VALUES_FILE);
    let mask_path = dir.join(MASK_FILE);
    let values = read_matrix_csv(&values_path)?;
    let mask = read_matrix_csv(&mask_path)?;
    let vshape = shape_of(&values, &values_path)?;
    let mshape = shape_of(&mask, &mask_path)?;
    if vshape != mshape {
        return format_err(format!("values are {vshape:?} but mask is {mshape:?}"));
    }
    if vshape != (meta.n, meta.num_points) {
        return format_err(format!(
            "files are {vshape:?} but meta says ({}, {})",
            meta.n, meta.num_points
        ));
    }
    if let Some(labels) = &meta.labels {
        if labels.len() != meta.num_points {
            return format_err(format!(
                "{} labels for {} points",
                labels.len(),
                meta.num_points
            ));
        }
        if labels.iter().any(|&l| l == 0 || l > meta.num_subspaces) {
            return format_err("labels must lie in 1..=L");
        }
    }

    let (n, big_n) = vshape;
    let mut z = DMatrix::zeros(n, big_n);
    let mut masks = vec![Vec::new(); big_n];
    for r in 0..n {
        for c in 0..big_n {
            let observed = match mask[r][c] {
                Some(v) if v == 1.0 => true,
                Some(v) if v == 0.0 => false,
                other => {
                    return format_err(format!(
                        "mask entry ({r},{c}) is {other:?}, expected 0 or 1"
                    ))
                }
            };
            match (observed, values[r][c]) {
                (true, Some(v)) => {
                    z[(r, c)] = v;
                    masks[c].push(r);
                }
                (false, None) => {}
                (true, None) => {
                    return format_err(format!("entry ({r},{c}) is masked as observed but empty"))
                }
                (false, Some(_)) => {
                    return format_err(format!("entry ({r},{c}) has a value but is masked out"))
                }
            }
        }
    }
    let pattern = ObservationPattern::new(n, masks, meta.case_tag)?;

    let full = read_truth(dir)?;
    if let Some(f) = &full {
        if f.shape() != vshape {
            return format_err(format!(
                "truth is {:?} but values are {vshape:?}",
                f.shape()
            ));
        }
    }
    Ok((
        ObservedDataset {
            full_matrix: full,
            zero_filled: z,
            pattern,
            true_labels: meta.labels.clone(),
        },
        meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        generate_ensemble, sample_case3, zero_fill, EnsembleParams, GenerationMode,
    };

    fn sample() -> (ObservedDataset, DatasetMeta) {
        let p = EnsembleParams::uniform(6, 2, 2, 4, GenerationMode::GaussianProduct);
        let (ens, x) = generate_ensemble(&p, 1).unwrap();
        let pat = sample_case3(6, 8, 0.5, 2).unwrap();
        let mut ds = zero_fill(&x, &pat).unwrap();
        ds.true_labels = Some(ens.labels());
        let meta = DatasetMeta {
            n: 6,
            num_points: 8,
            num_subspaces: 2,
            d: 2,
            counts: vec![4, 4],
            case_tag: CaseTag::RandomPerColumn,
            seed: Some(1),
            labels: Some(ens.labels()),
        };
        (ds, meta)
    }

    #[test]
    fn roundtrip_preserves_values_and_masks() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, meta) = sample();
        write_dataset(dir.path(), &ds, &meta).unwrap();
        let (back, meta2) = read_dataset(dir.path()).unwrap();
        assert_eq!(meta, meta2);
        assert_eq!(back.zero_filled, ds.zero_filled);
        assert_eq!(back.pattern, ds.pattern);
        assert_eq!(back.full_matrix, ds.full_matrix);
        assert_eq!(back.true_labels, ds.true_labels);
        let text = std::fs::read_to_string(dir.path().join(VALUES_FILE)).unwrap();
        let empty = text
            .lines()
            .flat_map(|l| l.split(','))
            .filter(|f| f.is_empty())
            .count();
        assert_eq!(empty, 6 * 8 - ds.pattern.observed_count());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ds, mut meta) = sample();
        write_dataset(dir.path(), &ds, &meta).unwrap();
        meta.num_points = 9;
        serde_json::to_writer(File::create(dir.path().join(META_FILE)).unwrap(), &meta).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(UosError::Format(_))));

        let dir = tempfile::tempdir().unwrap();
        let (ds, meta) = sample();
        write_dataset(dir.path(), &ds, &meta).unwrap();
        std::fs::write(dir.path().join(MASK_FILE), "1,0\n0,1\n").unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(UosError::Format(_))));
    }
}

//! LIBSVM text-format dataset reading and writing.
//!
//! Each line is `label idx:val idx:val ...` with 1-based feature indices.
//! Labels are normalized to ±1; files with {0, 1} labels are mapped to
//! {−1, +1}. A line with only a label is an all-zero sample.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SparseMat;
use crate::models::Dataset;

pub fn parse_libsvm(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    parse_libsvm_reader(reader)
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm_reader(BufReader::new(text.as_bytes()))
}

fn parse_libsvm_reader<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_col = 0usize;
    let mut sample = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let label_tok = parts.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("non-numeric label `{label_tok}`"),
        })?;
        raw_labels.push(label);

        for tok in parts {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("malformed feature `{tok}` (expected idx:val)"),
            })?;
            let one_based: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric feature index `{idx_str}`"),
            })?;
            if one_based == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "feature indices are 1-based; got 0".into(),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric feature value `{val_str}`"),
            })?;
            let col = one_based - 1;
            max_col = max_col.max(one_based);
            triplets.push((sample, col, value));
        }
        sample += 1;
    }

    if sample == 0 {
        return Err(Error::Parse {
            line: 0,
            message: "no samples in file".into(),
        });
    }

    let labels = normalize_labels(raw_labels)?;
    let features = SparseMat::from_triplets(sample, max_col, &triplets)?;
    Dataset::new(features, labels)
}

fn normalize_labels(raw: Vec<f64>) -> Result<Vec<f64>> {
    let pm_one = raw.iter().all(|l| *l == 1.0 || *l == -1.0);
    if pm_one {
        return Ok(raw);
    }
    let zero_one = raw.iter().all(|l| *l == 0.0 || *l == 1.0);
    if zero_one {
        return Ok(raw
            .into_iter()
            .map(|l| if l == 0.0 { -1.0 } else { 1.0 })
            .collect());
    }
    let bad = raw
        .iter()
        .find(|l| *l != &1.0 && *l != &-1.0 && *l != &0.0)
        .copied()
        .unwrap_or(f64::NAN);
    Err(Error::Parse {
        line: 0,
        message: format!("labels must be ±1 or 0/1 throughout the file; found {bad}"),
    })
}

/// Writes a dataset back in LIBSVM format (inverse of the parser up to
/// explicit zeros and trailing empty columns).
pub fn write_libsvm(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for j in 0..ds.n_samples() {
        let label = ds.labels()[j];
        if label > 0.0 {
            write!(w, "+1")?;
        } else {
            write!(w, "-1")?;
        }
        for (col, val) in ds.features().row(j) {
            write!(w, " {}:{}", col + 1, val)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

//! Feature-matrix file ingestion for the logistic-regression path.
//!
//! Two self-describing on-disk formats are supported:
//!
//! * **CSV**: a header line `m,p,num_classes`, then `m` rows of
//!   `label,f_1,...,f_p`. Floats are written with Rust's shortest
//!   round-trip formatting, so a save/load cycle is lossless.
//! * **Binary**: magic `DPFF1`, then `m`, `p`, `num_classes` as u32
//!   little-endian, `m*p` f64 little-endian features row-major, and `m`
//!   u32 little-endian labels.
//!
//! Loaders validate shape, label range, and finiteness, and report the
//! byte offset at which parsing failed.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Which on-disk encoding to read or write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Binary,
}

const MAGIC: &[u8; 5] = b"DPFF1";

/// A labelled feature matrix: `features` is row-major `m x num_features`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub num_features: usize,
    pub num_classes: usize,
}

impl FeatureSet {
    pub fn sample_count(&self) -> usize {
        self.labels.len()
    }
}

fn file_error(offset: u64, message: impl Into<String>) -> Error {
    Error::FeatureFile {
        offset,
        message: message.into(),
    }
}

/// Load a feature matrix from `path` in the given format.
pub fn load_feature_matrix(path: &Path, format: FeatureFormat) -> Result<FeatureSet> {
    let bytes = fs::read(path)?;
    match format {
        FeatureFormat::Csv => load_csv(&bytes),
        FeatureFormat::Binary => load_binary(&bytes),
    }
}

/// Write a feature matrix to `path` in the given format.
pub fn save_feature_matrix(path: &Path, format: FeatureFormat, set: &FeatureSet) -> Result<()> {
    let m = set.sample_count();
    if set.features.len() != m * set.num_features {
        return Err(Error::DimensionMismatch {
            expected: m * set.num_features,
            got: set.features.len(),
        });
    }
    let mut out: Vec<u8> = Vec::new();
    match format {
        FeatureFormat::Csv => {
            writeln!(out, "{},{},{}", m, set.num_features, set.num_classes)?;
            for i in 0..m {
                write!(out, "{}", set.labels[i])?;
                for j in 0..set.num_features {
                    write!(out, ",{}", set.features[i * set.num_features + j])?;
                }
                writeln!(out)?;
            }
        }
        FeatureFormat::Binary => {
            out.extend_from_slice(MAGIC);
            out.extend_from_slice(&(m as u32).to_le_bytes());
            out.extend_from_slice(&(set.num_features as u32).to_le_bytes());
            out.extend_from_slice(&(set.num_classes as u32).to_le_bytes());
            for &x in &set.features {
                out.extend_from_slice(&x.to_le_bytes());
            }
            for &y in &set.labels {
                out.extend_from_slice(&(y as u32).to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn load_csv(bytes: &[u8]) -> Result<FeatureSet> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| file_error(e.valid_up_to() as u64, "file is not valid UTF-8"))?;
    let mut offset = 0u64;
    let mut lines = text.lines();

    let header = lines
        .next()
        .ok_or_else(|| file_error(0, "missing header line"))?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 3 {
        return Err(file_error(0, "header must be `m,p,num_classes`"));
    }
    let parse_dim = |s: &str, name: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| file_error(0, format!("header field {name} is not a count: `{s}`")))
    };
    let m = parse_dim(dims[0], "m")?;
    let p = parse_dim(dims[1], "p")?;
    let num_classes = parse_dim(dims[2], "num_classes")?;
    if m == 0 || p == 0 || num_classes < 2 {
        return Err(file_error(0, "need m >= 1, p >= 1, num_classes >= 2"));
    }
    offset += header.len() as u64 + 1;

    let mut features = Vec::with_capacity(m * p);
    let mut labels = Vec::with_capacity(m);
    for (row, line) in lines.enumerate() {
        if row >= m {
            if line.trim().is_empty() {
                continue;
            }
            return Err(file_error(offset, format!("more than {m} data rows")));
        }
        let mut fields = line.split(',');
        let label_field = fields
            .next()
            .ok_or_else(|| file_error(offset, "empty data row"))?;
        let label: usize = label_field.trim().parse().map_err(|_| {
            file_error(offset, format!("row {row}: label `{label_field}` is not an integer"))
        })?;
        if label >= num_classes {
            return Err(file_error(
                offset,
                format!("row {row}: label {label} out of range for {num_classes} classes"),
            ));
        }
        labels.push(label);
        let mut count = 0;
        for field in fields {
            let x: f64 = field.trim().parse().map_err(|_| {
                file_error(offset, format!("row {row}: `{field}` is not a number"))
            })?;
            if !x.is_finite() {
                return Err(file_error(offset, format!("row {row}: non-finite feature")));
            }
            features.push(x);
            count += 1;
        }
        if count != p {
            return Err(file_error(
                offset,
                format!("row {row}: expected {p} features, got {count}"),
            ));
        }
        offset += line.len() as u64 + 1;
    }
    if labels.len() != m {
        return Err(file_error(
            offset,
            format!("expected {m} data rows, got {}", labels.len()),
        ));
    }
    Ok(FeatureSet {
        features,
        labels,
        num_features: p,
        num_classes,
    })
}

fn load_binary(bytes: &[u8]) -> Result<FeatureSet> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(file_error(0, "bad magic, expected DPFF1"));
    }
    let mut pos = MAGIC.len();
    let read_u32 = |bytes: &[u8], pos: &mut usize, name: &str| -> Result<usize> {
        if bytes.len() < *pos + 4 {
            return Err(file_error(*pos as u64, format!("truncated while reading {name}")));
        }
        let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
        *pos += 4;
        Ok(v as usize)
    };
    let m = read_u32(bytes, &mut pos, "m")?;
    let p = read_u32(bytes, &mut pos, "p")?;
    let num_classes = read_u32(bytes, &mut pos, "num_classes")?;
    if m == 0 || p == 0 || num_classes < 2 {
        return Err(file_error(pos as u64, "need m >= 1, p >= 1, num_classes >= 2"));
    }
    let feature_bytes = m
        .checked_mul(p)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| file_error(pos as u64, "feature block size overflows"))?;
    let expected = pos + feature_bytes + m * 4;
    if bytes.len() != expected {
        return Err(file_error(
            bytes.len() as u64,
            format!("expected {expected} bytes total, got {}", bytes.len()),
        ));
    }
    let mut features = Vec::with_capacity(m * p);
    for _ in 0..m * p {
        let x = f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
        if !x.is_finite() {
            return Err(file_error(pos as u64, "non-finite feature"));
        }
        features.push(x);
        pos += 8;
    }
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let y = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        if y >= num_classes {
            return Err(file_error(
                pos as u64,
                format!("label {y} out of range for {num_classes} classes"),
            ));
        }
        labels.push(y);
        pos += 4;
    }
    Ok(FeatureSet {
        features,
        labels,
        num_features: p,
        num_classes,
    })
}

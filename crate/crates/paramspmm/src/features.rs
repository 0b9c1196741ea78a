//! Structural features of a sparse matrix, grouped as size, degree
//! distribution, and data locality. They are independent of the dense
//! operand width, so one extraction serves every model.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::CsrMatrix;
use crate::pcsr::{padding_ratio, split_ratio};

/// Bump when the field set or column order changes; trained models refuse
/// mismatched vectors.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// Canonical column order for CSV files and model input arrays.
pub const FEATURE_COLUMNS: [&str; 16] = [
    "n", "n_hat", "nnz", "delta", "d", "d_hat", "d_max", "cv", "cv_hat", "sr1", "sr2", "rho", "b",
    "b_max", "pr1", "pr2",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Row count.
    pub n: usize,
    /// Rows with at least one nonzero.
    pub n_hat: usize,
    pub nnz: usize,
    /// `n_hat / n`.
    pub delta: f64,
    /// Mean degree over all rows.
    pub d: f64,
    /// Mean degree over non-empty rows.
    pub d_hat: f64,
    pub d_max: usize,
    /// Coefficient of variation of degrees, all rows.
    pub cv: f64,
    /// Same over non-empty rows only.
    pub cv_hat: f64,
    /// Split ratio at V=1 and V=2 (balancing cost proxies).
    pub sr1: f64,
    pub sr2: f64,
    /// Density `nnz / n^2`.
    pub rho: f64,
    /// Mean row bandwidth; empty rows contribute 0.
    pub b: f64,
    pub b_max: usize,
    /// Padding ratios at V=1 (always 0) and V=2.
    pub pr1: f64,
    pub pr2: f64,
}

impl FeatureVector {
    /// Fields in `FEATURE_COLUMNS` order, as model inputs.
    pub fn as_array(&self) -> [f64; 16] {
        [
            self.n as f64,
            self.n_hat as f64,
            self.nnz as f64,
            self.delta,
            self.d,
            self.d_hat,
            self.d_max as f64,
            self.cv,
            self.cv_hat,
            self.sr1,
            self.sr2,
            self.rho,
            self.b,
            self.b_max as f64,
            self.pr1,
            self.pr2,
        ]
    }
}

pub fn extract_features(a: &CsrMatrix, omega: usize) -> Result<FeatureVector> {
    if a.nnz() == 0 {
        return Err(Error::UndefinedMetric("features of an empty matrix".into()));
    }
    let n = a.n();
    let nnz = a.nnz();
    let degrees = a.degrees();
    let n_hat = degrees.iter().filter(|&&d| d > 0).count();
    let d_max = degrees.iter().copied().max().unwrap_or(0);

    let (mut b_sum, mut b_max) = (0usize, 0usize);
    for i in 0..n {
        let cols = a.row(i).0;
        if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
            let bw = last - first;
            b_sum += bw;
            b_max = b_max.max(bw);
        }
    }

    Ok(FeatureVector {
        n,
        n_hat,
        nnz,
        delta: n_hat as f64 / n as f64,
        d: nnz as f64 / n as f64,
        d_hat: nnz as f64 / n_hat as f64,
        d_max,
        cv: coefficient_of_variation(degrees.iter().map(|&d| d as f64)),
        cv_hat: coefficient_of_variation(degrees.iter().filter(|&&d| d > 0).map(|&d| d as f64)),
        sr1: split_ratio(a, 1, omega)?,
        sr2: split_ratio(a, 2, omega)?,
        rho: nnz as f64 / (n * n) as f64,
        b: b_sum as f64 / n as f64,
        b_max,
        pr1: padding_ratio(a, 1)?,
        pr2: padding_ratio(a, 2)?,
    })
}

/// Population standard deviation over mean.
fn coefficient_of_variation(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let count = values.clone().count();
    let mean = values.clone().sum::<f64>() / count as f64;
    let var = values.map(|x| (x - mean).powi(2)).sum::<f64>() / count as f64;
    var.sqrt() / mean
}

/// Writes `(id, features)` rows under the canonical header.
pub fn write_feature_csv(path: &Path, rows: &[(String, FeatureVector)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    write_feature_records(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

pub fn write_feature_records<W: std::io::Write>(
    w: &mut csv::Writer<W>,
    rows: &[(String, FeatureVector)],
) -> Result<()> {
    let mut header = vec!["id"];
    header.extend(FEATURE_COLUMNS);
    w.write_record(&header).map_err(csv_err)?;
    for (id, f) in rows {
        let mut record = vec![id.clone()];
        record.extend(f.as_array().iter().map(|x| format_field(*x)));
        w.write_record(&record).map_err(csv_err)?;
    }
    Ok(())
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<(String, FeatureVector)>> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    let header = r.headers().map_err(csv_err)?.clone();
    let mut expected = vec!["id"];
    expected.extend(FEATURE_COLUMNS);
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::SchemaMismatch(format!(
            "feature CSV header {:?} does not match schema v{FEATURE_SCHEMA_VERSION}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let id = record.get(0).unwrap_or_default().to_string();
        let mut values = [0f64; 16];
        for (i, v) in values.iter_mut().enumerate() {
            *v = record
                .get(i + 1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad feature value in row for {id}")))?;
        }
        rows.push((id, feature_vector_from_array(&values)));
    }
    Ok(rows)
}

/// Inverse of [`FeatureVector::as_array`].
pub fn feature_vector_from_array(x: &[f64; 16]) -> FeatureVector {
    FeatureVector {
        n: x[0] as usize,
        n_hat: x[1] as usize,
        nnz: x[2] as usize,
        delta: x[3],
        d: x[4],
        d_hat: x[5],
        d_max: x[6] as usize,
        cv: x[7],
        cv_hat: x[8],
        sr1: x[9],
        sr2: x[10],
        rho: x[11],
        b: x[12],
        b_max: x[13] as usize,
        pr1: x[14],
        pr2: x[15],
    }
}

fn format_field(x: f64) -> String {
    // Integral fields stay integral in the file; reals keep full precision.
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

//! Operand loading shared by the subcommands.
//!
//! Dense matrices travel as a little-endian binary file: `u64` rows,
//! `u64` cols, then `rows * cols` `f32` values row-major. The same layout
//! serves dense operands (`--b-file`) and result output (`--out`).

use std::env;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use paramspmm::DenseMatrix;

pub const MODEL_DIR_ENV: &str = "PARAMSPMM_MODEL_DIR";

pub fn write_dense(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    for &x in m.data() {
        w.write_f32::<LittleEndian>(x)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dense(path: &Path) -> Result<DenseMatrix> {
    let mut r = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    let count = rows
        .checked_mul(cols)
        .with_context(|| format!("{}: dense header overflows", path.display()))?;
    let mut data = vec![0f32; count];
    r.read_f32_into::<LittleEndian>(&mut data)
        .with_context(|| format!("{}: dense payload truncated", path.display()))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        bail!("{}: trailing bytes after dense payload", path.display());
    }
    Ok(DenseMatrix::from_vec(rows, cols, data)?)
}

/// The dense operand: read from `b_file` when given (shape-checked),
/// otherwise generated uniformly in [-1, 1] from the seed.
pub fn dense_operand(
    n: usize,
    dim: usize,
    b_file: Option<&Path>,
    seed: u64,
) -> Result<DenseMatrix> {
    match b_file {
        Some(path) => {
            let b = read_dense(path)?;
            if b.rows() != n || b.cols() != dim {
                bail!(
                    "{} is {}x{}, need {n}x{dim}",
                    path.display(),
                    b.rows(),
                    b.cols()
                );
            }
            Ok(b)
        }
        None => Ok(DenseMatrix::random(n, dim, seed)),
    }
}

/// Model lookup: an explicit `--model` path wins; otherwise the file
/// `model-dim<dim>.json` under PARAMSPMM_MODEL_DIR.
pub fn resolve_model_path(flag: Option<&Path>, dim: usize) -> Result<PathBuf> {
    if let Some(path) = flag {
        return Ok(path.to_path_buf());
    }
    match env::var_os(MODEL_DIR_ENV) {
        Some(dir) => {
            let path = PathBuf::from(dir).join(format!("model-dim{dim}.json"));
            if !path.is_file() {
                bail!("no model for dim {dim}: {} not found", path.display());
            }
            Ok(path)
        }
        None => bail!("no model for dim {dim}: pass --model or set {MODEL_DIR_ENV}"),
    }
}

/// Matrix name used in CSV rows: the file stem.
pub fn matrix_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into())
}

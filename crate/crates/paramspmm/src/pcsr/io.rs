//! Binary serialization of the parametric format.
//!
//! Layout, all little-endian:
//!
//! | field     | type              | notes                                  |
//! |-----------|-------------------|----------------------------------------|
//! | magic     | 4 bytes `PCSR`    |                                        |
//! | version   | u32               | currently 1                            |
//! | n         | u64               | source matrix order                    |
//! | numPanels | u64               | `CEIL(n / V)`                          |
//! | nnzV      | u64               | nonzero vector count                   |
//! | warpRows  | u64               | `len(rowPtr) - 1`; equals numPanels when S = 0 |
//! | V         | u8                |                                        |
//! | S         | u8                | 0 or 1                                 |
//! | omega     | u16               |                                        |
//! | rowPtr    | u64 × warpRows+1  |                                        |
//! | colIdx    | u32 × nnzV        |                                        |
//! | val       | f32 × nnzV·V      | zero-padded slots included             |
//! | TRow      | u32 × warpRows    | present iff S = 1                      |
//!
//! The grid knobs W, F, and dim are not part of the layout (the arrays do
//! not depend on them); readers supply them to bind the loaded arrays to a
//! full config.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::pcsr::{Pcsr, SpmmConfig};

const MAGIC: &[u8; 4] = b"PCSR";
const FORMAT_VERSION: u32 = 1;

pub fn write_pcsr(p: &Pcsr, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u64::<LittleEndian>(p.n as u64)?;
    w.write_u64::<LittleEndian>(p.num_panels as u64)?;
    w.write_u64::<LittleEndian>(p.col_idx.len() as u64)?;
    w.write_u64::<LittleEndian>((p.row_ptr.len() - 1) as u64)?;
    w.write_u8(p.config.v as u8)?;
    w.write_u8(p.config.s as u8)?;
    w.write_u16::<LittleEndian>(p.config.omega as u16)?;
    for &x in &p.row_ptr {
        w.write_u64::<LittleEndian>(x as u64)?;
    }
    for &c in &p.col_idx {
        w.write_u32::<LittleEndian>(c)?;
    }
    for &v in &p.val {
        w.write_f32::<LittleEndian>(v)?;
    }
    if p.config.s {
        for &t in &p.t_row {
            w.write_u32::<LittleEndian>(t)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a layout back and binds it to the grid knobs `w`, `f`, `dim`,
/// which the file intentionally does not store.
pub fn read_pcsr(path: &Path, w: usize, f: usize, dim: usize) -> Result<Pcsr> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a PCSR file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let n = r.read_u64::<LittleEndian>()? as usize;
    let num_panels = r.read_u64::<LittleEndian>()? as usize;
    let nnz_v = r.read_u64::<LittleEndian>()? as usize;
    let warp_rows = r.read_u64::<LittleEndian>()? as usize;
    let v = r.read_u8()? as usize;
    let s = match r.read_u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Format(format!("S flag must be 0 or 1, got {other}"))),
    };
    let omega = r.read_u16::<LittleEndian>()? as usize;

    if v < 1 || num_panels != n.div_ceil(v.max(1)) {
        return Err(Error::Format("panel count inconsistent with n and V".into()));
    }
    if !s && warp_rows != num_panels {
        return Err(Error::Format("unbalanced file must have warpRows = numPanels".into()));
    }
    if s && warp_rows < num_panels {
        return Err(Error::Format("balanced file has fewer chunks than panels".into()));
    }

    let mut row_ptr = Vec::with_capacity(warp_rows + 1);
    for _ in 0..=warp_rows {
        row_ptr.push(r.read_u64::<LittleEndian>()? as usize);
    }
    if row_ptr[0] != 0 || row_ptr[warp_rows] != nnz_v || row_ptr.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::Format("rowPtr is not a monotone cover of nnzV".into()));
    }
    let mut col_idx = Vec::with_capacity(nnz_v);
    for _ in 0..nnz_v {
        let c = r.read_u32::<LittleEndian>()?;
        if c as usize >= n {
            return Err(Error::Format(format!("column index {c} out of range for n = {n}")));
        }
        col_idx.push(c);
    }
    let mut val = Vec::with_capacity(nnz_v * v);
    for _ in 0..nnz_v * v {
        val.push(r.read_f32::<LittleEndian>()?);
    }
    let t_row = if s {
        let mut t_row = Vec::with_capacity(warp_rows);
        for _ in 0..warp_rows {
            let t = r.read_u32::<LittleEndian>()?;
            if t as usize >= num_panels {
                return Err(Error::Format(format!("TRow target {t} out of range")));
            }
            t_row.push(t);
        }
        t_row
    } else {
        Vec::new()
    };
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after TRow section".into()));
    }

    let config = SpmmConfig::new(w, f, v, s, omega, dim)?;
    Ok(Pcsr { n, num_panels, row_ptr, col_idx, val, t_row, config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate_synthetic, SynthKind};
    use crate::pcsr::build_pcsr;

    #[test]
    fn round_trips_both_balance_modes() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 1.9 }, 120, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for s in [false, true] {
            let config = SpmmConfig::new(4, 2, 2, s, 4, 64).unwrap();
            let p = build_pcsr(&a, config).unwrap();
            let path = dir.path().join(format!("m_{s}.pcsr"));
            write_pcsr(&p, &path).unwrap();
            let q = read_pcsr(&path, 4, 2, 64).unwrap();
            assert_eq!(p, q);
        }
    }

    #[test]
    fn rejects_foreign_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pcsr");
        std::fs::write(&path, b"notapcsrfile").unwrap();
        assert!(read_pcsr(&path, 2, 1, 32).is_err());

        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 3.0 }, 40, 1).unwrap();
        let p = build_pcsr(&a, SpmmConfig::new(2, 1, 1, false, 32, 32).unwrap()).unwrap();
        let good = dir.path().join("good.pcsr");
        write_pcsr(&p, &good).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_pcsr(&path, 2, 1, 32).is_err());
        // Appending garbage must be detected too.
        let mut padded = bytes.clone();
        padded.push(0);
        std::fs::write(&path, &padded).unwrap();
        assert!(read_pcsr(&path, 2, 1, 32).is_err());
    }

    #[test]
    fn reader_validates_grid_knobs() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 3.0 }, 40, 1).unwrap();
        let p = build_pcsr(&a, SpmmConfig::new(2, 1, 2, false, 32, 32).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pcsr");
        write_pcsr(&p, &path).unwrap();
        // F = 4 exceeds CEIL(32/32).
        assert!(read_pcsr(&path, 2, 4, 32).is_err());
    }
}

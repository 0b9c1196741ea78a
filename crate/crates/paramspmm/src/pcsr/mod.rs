//! Parameterized CSR: vectorized row-panel blocking with optional
//! nonzero-split balancing, plus the four metrics that describe what a
//! configuration costs on a given matrix (MAC gap, padding ratio, split
//! granularity, split ratio).
//!
//! The matrix is cut into horizontal panels of `V` consecutive rows. Every
//! distinct column index inside a panel becomes one `V x 1` vector holding
//! that column's values from the panel's rows, zero-padded where a row has
//! no entry. With balancing off, `rowPtr` delimits each panel's vector run.
//! With balancing on, runs are split into chunks of at most `SG` vectors,
//! `rowPtr` delimits chunks, and `TRow` routes each chunk back to its
//! source panel for accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CooEntry, CsrMatrix};

mod io;

pub use io::{read_pcsr, write_pcsr};

/// Kernel configuration: the tunable tuple (W, F, V, S) plus the warp
/// width and the dense operand width it will run against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpmmConfig {
    /// Warps per block.
    pub w: usize,
    /// Coarsening factor: column segments a warp covers per vector fetch.
    pub f: usize,
    /// Vector size: rows per panel.
    pub v: usize,
    /// Nonzero-split balancing.
    pub s: bool,
    /// Warp width (lanes).
    pub omega: usize,
    /// Dense operand column count.
    pub dim: usize,
}

impl SpmmConfig {
    pub fn new(w: usize, f: usize, v: usize, s: bool, omega: usize, dim: usize) -> Result<Self> {
        let cfg = SpmmConfig { w, f, v, s, omega, dim };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Largest admissible coarsening factor for a given operand width.
    pub fn max_f(dim: usize, omega: usize) -> usize {
        dim.div_ceil(omega)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::InvalidConfig("W must be >= 1".into()));
        }
        if self.omega < 1 || self.dim < 1 {
            return Err(Error::InvalidConfig("omega and dim must be >= 1".into()));
        }
        if !(self.v == 1 || self.v == 2) {
            return Err(Error::InvalidConfig(format!("V must be 1 or 2, got {}", self.v)));
        }
        let max_f = Self::max_f(self.dim, self.omega);
        if self.f < 1 || self.f > max_f {
            return Err(Error::InvalidConfig(format!(
                "F must be in [1, {max_f}] for dim {} and omega {}, got {}",
                self.dim, self.omega, self.f
            )));
        }
        Ok(())
    }
}

/// The four-array parametric format, bound to the config it was built for.
///
/// `val` stores `V` scalars per nonzero vector, so its length is always
/// `colIdx.len() * V`. When `S` is off, `rowPtr` has `numPanels + 1`
/// entries and `TRow` is empty; when `S` is on, `rowPtr` has one entry per
/// balanced chunk plus a sentinel and `TRow[w]` names chunk `w`'s source
/// panel. Empty panels still occupy one (empty) chunk so that the chunk
/// count never drops below the panel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcsr {
    n: usize,
    num_panels: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    val: Vec<f32>,
    t_row: Vec<u32>,
    config: SpmmConfig,
}

impl Pcsr {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_panels(&self) -> usize {
        self.num_panels
    }

    /// Rows of the task grid: panels when unbalanced, chunks when balanced.
    pub fn num_warp_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// Count of nonzero vectors (distinct (panel, column) pairs).
    pub fn nnz_v(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn val(&self) -> &[f32] {
        &self.val
    }

    pub fn t_row(&self) -> &[u32] {
        &self.t_row
    }

    pub fn config(&self) -> &SpmmConfig {
        &self.config
    }

    /// Source panel of warp row `w`.
    pub fn output_panel(&self, w: usize) -> usize {
        if self.config.s {
            self.t_row[w] as usize
        } else {
            w
        }
    }

    /// Largest vector count any single warp row owns.
    pub fn max_workload(&self) -> usize {
        self.row_ptr.windows(2).map(|p| p[1] - p[0]).max().unwrap_or(0)
    }

    /// Rebinds the layout to a config that differs only in W, F, or dim.
    ///
    /// The arrays depend solely on (V, S, omega), so sweeping the other
    /// knobs can reuse one build.
    pub fn with_config(&self, config: SpmmConfig) -> Result<Pcsr> {
        config.validate()?;
        if (config.v, config.s, config.omega) != (self.config.v, self.config.s, self.config.omega)
        {
            return Err(Error::InvalidConfig(
                "with_config may change only W, F, and dim".into(),
            ));
        }
        let mut p = self.clone();
        p.config = config;
        Ok(p)
    }

    /// Scatters vectors back to coordinate triples, dropping padded zeros,
    /// and rebuilds the canonical matrix.
    pub fn scatter_back(&self) -> Result<CsrMatrix> {
        let v = self.config.v;
        let mut entries = Vec::new();
        for w in 0..self.num_warp_rows() {
            let panel = self.output_panel(w);
            for j in self.row_ptr[w]..self.row_ptr[w + 1] {
                let col = self.col_idx[j] as usize;
                for slot in 0..v {
                    let value = self.val[j * v + slot];
                    if value != 0.0 {
                        entries.push(CooEntry { row: panel * v + slot, col, value });
                    }
                }
            }
        }
        CsrMatrix::from_coo(self.n, &entries)
    }
}

/// Builds the parametric layout of `a` under `config`.
pub fn build_pcsr(a: &CsrMatrix, config: SpmmConfig) -> Result<Pcsr> {
    config.validate()?;
    let n = a.n();
    if n > u32::MAX as usize {
        return Err(Error::InvalidParameter("matrix too large for 32-bit column indices".into()));
    }
    let v = config.v;
    let num_panels = n.div_ceil(v);

    let mut col_idx = Vec::new();
    let mut val = Vec::new();
    let mut counts = Vec::with_capacity(num_panels);
    let mut scratch: Vec<(u32, usize, f32)> = Vec::new();
    for p in 0..num_panels {
        scratch.clear();
        let lo = p * v;
        let hi = ((p + 1) * v).min(n);
        for (slot, row) in (lo..hi).enumerate() {
            let (cols, vals) = a.row(row);
            for (&c, &x) in cols.iter().zip(vals) {
                scratch.push((c as u32, slot, x));
            }
        }
        // Row col_idx lists are sorted, so this groups equal columns; a
        // column appears at most once per slot.
        scratch.sort_unstable_by_key(|e| e.0);
        let before = col_idx.len();
        let mut i = 0;
        while i < scratch.len() {
            let c = scratch[i].0;
            col_idx.push(c);
            let base = val.len();
            val.resize(base + v, 0.0);
            while i < scratch.len() && scratch[i].0 == c {
                val[base + scratch[i].1] = scratch[i].2;
                i += 1;
            }
        }
        counts.push(col_idx.len() - before);
    }

    let (row_ptr, t_row) = if config.s {
        // An all-empty matrix has no defined SG; any cap yields the same
        // one-empty-chunk-per-panel layout.
        let sg = split_granularity_from_counts(&counts, config.omega).unwrap_or(config.omega);
        split_panels(&counts, sg)
    } else {
        let mut row_ptr = Vec::with_capacity(num_panels + 1);
        row_ptr.push(0);
        let mut acc = 0;
        for &c in &counts {
            acc += c;
            row_ptr.push(acc);
        }
        (row_ptr, Vec::new())
    };

    Ok(Pcsr { n, num_panels, row_ptr, col_idx, val, t_row, config })
}

/// Splits per-panel vector counts into chunks of at most `sg` vectors.
///
/// Returns the balanced `rowPtr` and `TRow`. Chunks of one panel stay
/// consecutive and in order; an empty panel yields one empty chunk, which
/// keeps the split ratio at exactly 1 when no panel exceeds `sg`.
pub fn split_panels(counts: &[usize], sg: usize) -> (Vec<usize>, Vec<u32>) {
    assert!(sg >= 1, "split granularity must be positive");
    let mut row_ptr = vec![0];
    let mut t_row = Vec::new();
    let mut offset = 0;
    for (p, &c) in counts.iter().enumerate() {
        let chunks = if c == 0 { 1 } else { c.div_ceil(sg) };
        for k in 0..chunks {
            offset += (c - k * sg).min(sg);
            row_ptr.push(offset);
            t_row.push(p as u32);
        }
    }
    (row_ptr, t_row)
}

/// Number of nonzero vectors each panel of height `v` holds.
pub fn panel_vector_counts(a: &CsrMatrix, v: usize) -> Vec<usize> {
    assert!(v >= 1, "vector size must be positive");
    let n = a.n();
    let num_panels = n.div_ceil(v);
    let mut counts = Vec::with_capacity(num_panels);
    let mut cols = Vec::new();
    for p in 0..num_panels {
        cols.clear();
        for row in p * v..((p + 1) * v).min(n) {
            cols.extend_from_slice(a.row(row).0);
        }
        cols.sort_unstable();
        cols.dedup();
        counts.push(cols.len());
    }
    counts
}

/// Lane work wasted by the residual warp when `dim` is not a multiple of
/// `F * omega`; zero when it divides evenly (no residual warp exists).
pub fn compute_mac_gap(dim: usize, f: usize, omega: usize) -> usize {
    let tn = dim.min(f * omega);
    let tr = dim % (f * omega);
    if tr == 0 {
        0
    } else {
        tn - tr
    }
}

/// Fraction of vector slots occupied by padded zeros: `1 - nnz/(nnzV * V)`.
pub fn padding_ratio(a: &CsrMatrix, v: usize) -> Result<f64> {
    check_v(v)?;
    if a.nnz() == 0 {
        return Err(Error::UndefinedMetric("padding ratio of an empty matrix".into()));
    }
    let nnz_v: usize = panel_vector_counts(a, v).iter().sum();
    Ok(1.0 - a.nnz() as f64 / (nnz_v * v) as f64)
}

/// Per-warp workload cap in vectors: mean vectors per non-empty panel,
/// rounded up to a multiple of `omega`.
pub fn split_granularity(a: &CsrMatrix, v: usize, omega: usize) -> Result<usize> {
    check_v(v)?;
    check_omega(omega)?;
    split_granularity_from_counts(&panel_vector_counts(a, v), omega)
}

/// Growth of the `rowPtr` array under balancing: balanced length over
/// unbalanced length. Equals 1 exactly when no panel exceeds SG.
pub fn split_ratio(a: &CsrMatrix, v: usize, omega: usize) -> Result<f64> {
    check_v(v)?;
    check_omega(omega)?;
    let counts = panel_vector_counts(a, v);
    let sg = split_granularity_from_counts(&counts, omega)?;
    let (balanced, _) = split_panels(&counts, sg);
    Ok(balanced.len() as f64 / (counts.len() + 1) as f64)
}

/// All metrics of one (matrix, V, omega) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcsrMetrics {
    pub nnz: usize,
    pub nnz_v: usize,
    /// Padding ratio, in `[0, 1 - 1/V]`.
    pub pr: f64,
    /// Split granularity, a positive multiple of omega.
    pub sg: usize,
    /// Split ratio, `>= 1`.
    pub sr: f64,
    /// Mean nonzero vectors per non-empty panel.
    pub d_hat_v: f64,
}

pub fn compute_metrics(a: &CsrMatrix, v: usize, omega: usize) -> Result<PcsrMetrics> {
    check_v(v)?;
    check_omega(omega)?;
    if a.nnz() == 0 {
        return Err(Error::UndefinedMetric("metrics of an empty matrix".into()));
    }
    let counts = panel_vector_counts(a, v);
    let nnz_v: usize = counts.iter().sum();
    let non_empty = counts.iter().filter(|&&c| c > 0).count();
    let sg = split_granularity_from_counts(&counts, omega)?;
    let (balanced, _) = split_panels(&counts, sg);
    Ok(PcsrMetrics {
        nnz: a.nnz(),
        nnz_v,
        pr: 1.0 - a.nnz() as f64 / (nnz_v * v) as f64,
        sg,
        sr: balanced.len() as f64 / (counts.len() + 1) as f64,
        d_hat_v: nnz_v as f64 / non_empty as f64,
    })
}

fn split_granularity_from_counts(counts: &[usize], omega: usize) -> Result<usize> {
    let nnz_v: usize = counts.iter().sum();
    let non_empty = counts.iter().filter(|&&c| c > 0).count();
    if non_empty == 0 {
        return Err(Error::UndefinedMetric("split granularity of an empty matrix".into()));
    }
    // ceil(mean/omega)*omega computed without the intermediate real:
    // ceil(nnzV / (nonEmpty * omega)) * omega is the same integer.
    Ok(nnz_v.div_ceil(non_empty * omega) * omega)
}

fn check_v(v: usize) -> Result<()> {
    if v < 1 {
        return Err(Error::InvalidParameter("vector size must be >= 1".into()));
    }
    Ok(())
}

fn check_omega(omega: usize) -> Result<()> {
    if omega < 1 {
        return Err(Error::InvalidParameter("omega must be >= 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate_synthetic, SynthKind};

    fn cfg(w: usize, f: usize, v: usize, s: bool, omega: usize, dim: usize) -> SpmmConfig {
        SpmmConfig::new(w, f, v, s, omega, dim).unwrap()
    }

    fn coo(n: usize, entries: &[(usize, usize, f32)]) -> CsrMatrix {
        let coo: Vec<CooEntry> =
            entries.iter().map(|&(row, col, value)| CooEntry { row, col, value }).collect();
        CsrMatrix::from_coo(n, &coo).unwrap()
    }

    #[test]
    fn config_rejects_out_of_domain_values() {
        assert!(SpmmConfig::new(2, 1, 3, false, 32, 32).is_err());
        assert!(SpmmConfig::new(2, 1, 0, false, 32, 32).is_err());
        assert!(SpmmConfig::new(0, 1, 1, false, 32, 32).is_err());
        assert!(SpmmConfig::new(2, 0, 1, false, 32, 32).is_err());
        // dim=48, omega=32 admits F in [1, 2].
        assert!(SpmmConfig::new(2, 2, 1, false, 32, 48).is_ok());
        assert!(SpmmConfig::new(2, 3, 1, false, 32, 48).is_err());
    }

    #[test]
    fn vectorized_blocking_hand_trace() {
        // Panel 0 holds rows 0..2 with columns {0, 2}; column 0 packs the
        // two row values, column 2 pads the absent second row.
        let a = coo(4, &[(0, 0, 1.0), (1, 0, 2.0), (0, 2, 3.0), (2, 1, 4.0), (3, 1, 5.0)]);
        let p = build_pcsr(&a, cfg(2, 1, 2, false, 32, 32)).unwrap();
        assert_eq!(p.row_ptr(), &[0, 2, 3]);
        assert_eq!(p.col_idx(), &[0, 2, 1]);
        assert_eq!(p.val(), &[1.0, 2.0, 3.0, 0.0, 4.0, 5.0]);
        assert!(p.t_row().is_empty());
        assert_eq!(p.num_panels(), 2);
        assert_eq!(p.nnz_v(), 3);
    }

    #[test]
    fn v1_unbalanced_is_plain_csr() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 6.0 }, 64, 11).unwrap();
        let p = build_pcsr(&a, cfg(4, 1, 1, false, 32, 32)).unwrap();
        assert_eq!(p.row_ptr(), a.row_ptr());
        let cols: Vec<usize> = p.col_idx().iter().map(|&c| c as usize).collect();
        assert_eq!(cols, a.col_idx());
        assert_eq!(p.val(), a.values());
    }

    #[test]
    fn split_panels_chunks_and_routes() {
        let (row_ptr, t_row) = split_panels(&[9, 2], 4);
        assert_eq!(row_ptr, vec![0, 4, 8, 9, 11]);
        assert_eq!(t_row, vec![0, 0, 0, 1]);
        // Split ratio per the rowPtr-length definition: 5 entries over 3.
        assert_eq!(row_ptr.len() as f64 / 3.0, 5.0 / 3.0);
    }

    #[test]
    fn split_panels_keeps_empty_panels() {
        let (row_ptr, t_row) = split_panels(&[3, 0, 2], 4);
        assert_eq!(row_ptr, vec![0, 3, 3, 5]);
        assert_eq!(t_row, vec![0, 1, 2]);
    }

    #[test]
    fn natural_granularity_chunking() {
        // Rows carry 9 and 2 nonzeros, the rest are empty: nnzV = 11 over
        // 2 non-empty panels, omega = 4 gives SG = ceil(5.5/4)*4 = 8. The
        // 9-vector row splits into chunks of 8 and 1; the 7 empty rows
        // keep one empty chunk each.
        let a = coo(
            9,
            &(0..9)
                .map(|c| (0usize, c, 1.0f32))
                .chain([(1, 0, 1.0), (1, 1, 1.0)])
                .collect::<Vec<_>>(),
        );
        assert_eq!(split_granularity(&a, 1, 4).unwrap(), 8);
        let p = build_pcsr(&a, cfg(2, 1, 1, true, 4, 4)).unwrap();
        assert_eq!(p.row_ptr(), &[0, 8, 9, 11, 11, 11, 11, 11, 11, 11, 11]);
        assert_eq!(p.t_row(), &[0, 0, 1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(split_ratio(&a, 1, 4).unwrap(), 11.0 / 10.0);
        assert_eq!(p.max_workload(), 8);
    }

    #[test]
    fn mac_gap_reproduces_known_values() {
        assert_eq!(compute_mac_gap(96, 2, 32), 32);
        assert_eq!(compute_mac_gap(128, 3, 32), 64);
        assert_eq!(compute_mac_gap(64, 2, 32), 0);
        assert_eq!(compute_mac_gap(160, 2, 32), 32);
        assert_eq!(compute_mac_gap(160, 3, 32), 32);
        assert_eq!(compute_mac_gap(160, 4, 32), 96);
    }

    #[test]
    fn padding_ratio_examples() {
        let identity = CsrMatrix::identity(4);
        assert_eq!(padding_ratio(&identity, 1).unwrap(), 0.0);
        assert_eq!(padding_ratio(&identity, 2).unwrap(), 0.5);
        let dense = coo(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 4.0)]);
        assert_eq!(padding_ratio(&dense, 2).unwrap(), 0.0);
        assert!(padding_ratio(&CsrMatrix::empty(4), 2).is_err());
    }

    #[test]
    fn granularity_rounds_up_to_omega() {
        // Single non-empty row with k nonzeros: dHatV = k.
        let row = |k: usize| coo(k, &(0..k).map(|c| (0usize, c, 1.0f32)).collect::<Vec<_>>());
        assert_eq!(split_granularity(&row(5), 1, 32).unwrap(), 32);
        assert_eq!(split_granularity(&row(33), 1, 32).unwrap(), 64);
        assert_eq!(split_granularity(&row(64), 1, 32).unwrap(), 64);
    }

    #[test]
    fn split_ratio_is_one_without_oversized_panels() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 4.0 }, 128, 2).unwrap();
        // Uniform degrees stay well under one omega of vectors per row.
        assert_eq!(split_ratio(&a, 1, 32).unwrap(), 1.0);
    }

    #[test]
    fn scatter_back_round_trips() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 2.0 }, 101, 9).unwrap();
        for v in [1, 2] {
            for s in [false, true] {
                let p = build_pcsr(&a, cfg(4, 1, v, s, 4, 32)).unwrap();
                assert_eq!(p.scatter_back().unwrap(), a, "v={v} s={s}");
            }
        }
    }

    #[test]
    fn balanced_workloads_respect_granularity() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 1.8 }, 300, 4).unwrap();
        for v in [1, 2] {
            let sg = split_granularity(&a, v, 4).unwrap();
            let p = build_pcsr(&a, cfg(4, 1, v, true, 4, 32)).unwrap();
            assert!(p.max_workload() <= sg);
            assert_eq!(sg % 4, 0);
        }
    }

    #[test]
    fn chunk_concatenation_preserves_vector_order() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 1.8 }, 200, 5).unwrap();
        let unbalanced = build_pcsr(&a, cfg(4, 1, 2, false, 4, 32)).unwrap();
        let balanced = build_pcsr(&a, cfg(4, 1, 2, true, 4, 32)).unwrap();
        // Chunks only re-delimit the arrays; contents are untouched.
        assert_eq!(balanced.col_idx(), unbalanced.col_idx());
        assert_eq!(balanced.val(), unbalanced.val());
        // Per-panel chunk totals match the unbalanced panel workloads.
        let mut per_panel = vec![0usize; balanced.num_panels()];
        for w in 0..balanced.num_warp_rows() {
            per_panel[balanced.t_row()[w] as usize] += balanced.row_ptr()[w + 1] - balanced.row_ptr()[w];
        }
        let expected: Vec<usize> =
            unbalanced.row_ptr().windows(2).map(|p| p[1] - p[0]).collect();
        assert_eq!(per_panel, expected);
    }

    #[test]
    fn duplicated_panel_rows_drive_padding_to_zero() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 5.0 }, 64, 3).unwrap();
        let before = padding_ratio(&a, 2).unwrap();
        // Give every odd row its even partner's pattern: columns align
        // perfectly, so no slot needs padding.
        let mut entries = Vec::new();
        for p in 0..32 {
            let (cols, vals) = a.row(2 * p);
            for (&c, &x) in cols.iter().zip(vals) {
                entries.push(CooEntry { row: 2 * p, col: c, value: x });
                entries.push(CooEntry { row: 2 * p + 1, col: c, value: x });
            }
        }
        if entries.is_empty() {
            entries.push(CooEntry { row: 0, col: 0, value: 1.0 });
            entries.push(CooEntry { row: 1, col: 0, value: 1.0 });
        }
        let aligned = CsrMatrix::from_coo(64, &entries).unwrap();
        let after = padding_ratio(&aligned, 2).unwrap();
        assert_eq!(after, 0.0);
        assert!(after <= before);
    }

    #[test]
    fn with_config_rebinds_only_grid_knobs() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 4.0 }, 50, 1).unwrap();
        let p = build_pcsr(&a, cfg(2, 1, 2, true, 32, 32)).unwrap();
        let q = p.with_config(cfg(8, 2, 2, true, 32, 64)).unwrap();
        assert_eq!(q.row_ptr(), p.row_ptr());
        assert_eq!(q.config().w, 8);
        assert!(p.with_config(cfg(2, 1, 1, true, 32, 32)).is_err());
        assert!(p.with_config(cfg(2, 1, 2, false, 32, 32)).is_err());
    }

    #[test]
    fn metrics_agree_with_individual_ops() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 2.0 }, 150, 8).unwrap();
        let m = compute_metrics(&a, 2, 4).unwrap();
        assert_eq!(m.nnz, a.nnz());
        assert_eq!(m.pr, padding_ratio(&a, 2).unwrap());
        assert_eq!(m.sg, split_granularity(&a, 2, 4).unwrap());
        assert_eq!(m.sr, split_ratio(&a, 2, 4).unwrap());
        assert!(m.pr >= 0.0 && m.pr <= 0.5);
        assert!(m.sr >= 1.0);
    }
}

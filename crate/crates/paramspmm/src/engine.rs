//! SpMM execution over a 2D grid of warp tasks.
//!
//! The grid mirrors the device model the format is designed for: blocks of
//! `W` warps along x cover warp rows (row panels, or balanced chunks), and
//! blocks along y cover `omega * F`-wide column segments of the dense
//! operand. One CPU task emulates one warp; its lanes become an inner loop
//! of width `omega`. This keeps the work partitioning of the original
//! kernels intact while staying hardware-agnostic.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::pcsr::{build_pcsr, Pcsr, SpmmConfig};

/// One warp's assignment: a warp row and a starting column segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpTask {
    pub blk_x: usize,
    pub blk_y: usize,
    pub warp_id: usize,
    /// Warp row: `blk_x * W + warp_id`.
    pub crow: usize,
    /// First output column: `blk_y * omega * F`.
    pub seg: usize,
}

/// Execution accounting for one SpMM run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineReport {
    /// Wall time of the compute phase, seconds.
    pub elapsed: f64,
    /// Multiply-accumulates performed, padded slots included.
    pub mac_ops: u64,
    /// Accumulation writes performed by the balanced path (atomic adds,
    /// or their per-chunk equivalents under deterministic reduction).
    /// Zero when S is off.
    pub atomic_writes: u64,
}

impl EngineReport {
    /// Useful throughput: `2 * nnz * dim / elapsed`, in GFLOPS.
    pub fn gflops(&self, nnz: usize, dim: usize) -> f64 {
        2.0 * nnz as f64 * dim as f64 / self.elapsed / 1e9
    }
}

/// How balanced chunks combine into the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionMode {
    /// Atomic adds on C; fastest, float rounding depends on scheduling.
    #[default]
    Atomic,
    /// Chunks of a panel are summed in order by a single task; bit-stable
    /// across thread counts.
    Deterministic,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions {
    pub reduction: ReductionMode,
}

/// Lists the live tasks of the grid: every (crow, seg) pair exactly once,
/// with tasks whose warp row falls off the grid skipped.
pub fn enumerate_warp_tasks(num_warp_rows: usize, config: &SpmmConfig) -> Vec<WarpTask> {
    let seg_width = config.omega * config.f;
    let blocks_x = num_warp_rows.div_ceil(config.w);
    let blocks_y = config.dim.div_ceil(seg_width);
    let mut tasks = Vec::with_capacity(blocks_x * blocks_y * config.w);
    for blk_x in 0..blocks_x {
        for blk_y in 0..blocks_y {
            for warp_id in 0..config.w {
                let crow = blk_x * config.w + warp_id;
                if crow >= num_warp_rows {
                    continue;
                }
                tasks.push(WarpTask { blk_x, blk_y, warp_id, crow, seg: blk_y * seg_width });
            }
        }
    }
    tasks
}

/// Row-per-warp CSR SpMM, the reference path.
///
/// Each warp walks one row of A and writes one `omega`-wide segment per
/// y-block, narrowed at the right boundary.
pub fn spmm_csr_reference(
    a: &CsrMatrix,
    b: &DenseMatrix,
    w: usize,
    omega: usize,
) -> Result<DenseMatrix> {
    if b.rows() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "A is {0}x{0} but B has {1} rows",
            a.n(),
            b.rows()
        )));
    }
    let dim = b.cols();
    let config = SpmmConfig::new(w, 1, 1, false, omega, dim)?;
    let n = a.n();
    let tasks = enumerate_warp_tasks(n.max(1), &config);
    let mut c = vec![0f32; n * dim];
    let out = SendPtr(c.as_mut_ptr());
    tasks.par_iter().for_each_init(
        || vec![0f32; omega],
        |res, task| {
            let row = task.crow;
            if row >= n {
                return;
            }
            let covered = (dim - task.seg).min(omega);
            let res = &mut res[..covered];
            res.fill(0.0);
            let (cols, vals) = a.row(row);
            for (&col, &x) in cols.iter().zip(vals) {
                let brow = &b.data()[col * dim + task.seg..col * dim + task.seg + covered];
                for (r, &bv) in res.iter_mut().zip(brow) {
                    *r += x * bv;
                }
            }
            // Tasks own disjoint (row, segment) regions of C.
            unsafe {
                let dst = out.add(row * dim + task.seg);
                for (i, &r) in res.iter().enumerate() {
                    *dst.add(i) = r;
                }
            }
        },
    );
    DenseMatrix::from_vec(n, dim, c)
}

/// Parametric SpMM with default options (atomic reduction when balanced).
pub fn spmm_pcsr(p: &Pcsr, b: &DenseMatrix) -> Result<(DenseMatrix, EngineReport)> {
    spmm_pcsr_with(p, b, EngineOptions::default())
}

/// Parametric SpMM. Returns `A * B` together with the run's accounting.
pub fn spmm_pcsr_with(
    p: &Pcsr,
    b: &DenseMatrix,
    opts: EngineOptions,
) -> Result<(DenseMatrix, EngineReport)> {
    let cfg = *p.config();
    if b.rows() != p.n() {
        return Err(Error::DimensionMismatch(format!(
            "format holds a {0}x{0} matrix but B has {1} rows",
            p.n(),
            b.rows()
        )));
    }
    if b.cols() != cfg.dim {
        return Err(Error::DimensionMismatch(format!(
            "config expects dim {} but B has {} columns",
            cfg.dim,
            b.cols()
        )));
    }

    let start = Instant::now();
    let (data, mac_ops, atomic_writes) = if !cfg.s {
        run_unbalanced(p, b)
    } else {
        match opts.reduction {
            ReductionMode::Atomic => run_balanced_atomic(p, b),
            ReductionMode::Deterministic => run_balanced_deterministic(p, b),
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let c = DenseMatrix::from_vec(p.n(), cfg.dim, data)?;
    Ok((c, EngineReport { elapsed, mac_ops, atomic_writes }))
}

/// Accumulates one warp row's vectors into `res` (slot-major, `covered`
/// columns per slot) without clearing it. Returns the vector count.
fn sweep(p: &Pcsr, b: &DenseMatrix, crow: usize, seg: usize, covered: usize, res: &mut [f32]) -> usize {
    let v = p.config().v;
    let dim = p.config().dim;
    let start = p.row_ptr()[crow];
    let end = p.row_ptr()[crow + 1];
    for j in start..end {
        let col = p.col_idx()[j] as usize;
        // One fetch of the column index and the V packed values serves
        // every segment column; padded zero slots still cost a MAC.
        let vals = &p.val()[j * v..(j + 1) * v];
        let brow = &b.data()[col * dim + seg..col * dim + seg + covered];
        for (slot, &x) in vals.iter().enumerate() {
            let dst = &mut res[slot * covered..(slot + 1) * covered];
            for (d, &bv) in dst.iter_mut().zip(brow) {
                *d += x * bv;
            }
        }
    }
    end - start
}

fn run_unbalanced(p: &Pcsr, b: &DenseMatrix) -> (Vec<f32>, u64, u64) {
    let cfg = *p.config();
    let (n, v, dim) = (p.n(), cfg.v, cfg.dim);
    let seg_width = cfg.omega * cfg.f;
    let tasks = enumerate_warp_tasks(p.num_warp_rows(), &cfg);
    let mut c = vec![0f32; n * dim];
    let out = SendPtr(c.as_mut_ptr());
    let mac: u64 = tasks
        .par_iter()
        .map_init(
            || vec![0f32; v * seg_width],
            |res, task| {
                let covered = (dim - task.seg).min(seg_width);
                let res = &mut res[..v * covered];
                res.fill(0.0);
                let l = sweep(p, b, task.crow, task.seg, covered, res);
                // Warp rows are panels here; tasks own disjoint (panel row,
                // segment) regions of C.
                for slot in 0..v {
                    let row = task.crow * v + slot;
                    if row >= n {
                        break;
                    }
                    unsafe {
                        let dst = out.add(row * dim + task.seg);
                        for i in 0..covered {
                            *dst.add(i) = res[slot * covered + i];
                        }
                    }
                }
                (l * v * covered) as u64
            },
        )
        .sum();
    (c, mac, 0)
}

fn run_balanced_atomic(p: &Pcsr, b: &DenseMatrix) -> (Vec<f32>, u64, u64) {
    let cfg = *p.config();
    let (n, v, dim) = (p.n(), cfg.v, cfg.dim);
    let seg_width = cfg.omega * cfg.f;
    let tasks = enumerate_warp_tasks(p.num_warp_rows(), &cfg);
    let c: Vec<AtomicU32> = (0..n * dim).map(|_| AtomicU32::new(0)).collect();
    let (mac, writes) = tasks
        .par_iter()
        .map_init(
            || vec![0f32; v * seg_width],
            |res, task| {
                let covered = (dim - task.seg).min(seg_width);
                let res = &mut res[..v * covered];
                res.fill(0.0);
                let l = sweep(p, b, task.crow, task.seg, covered, res);
                let panel = p.t_row()[task.crow] as usize;
                let mut writes = 0u64;
                for slot in 0..v {
                    let row = panel * v + slot;
                    if row >= n {
                        break;
                    }
                    for i in 0..covered {
                        atomic_add_f32(&c[row * dim + task.seg + i], res[slot * covered + i]);
                    }
                    writes += covered as u64;
                }
                ((l * v * covered) as u64, writes)
            },
        )
        .reduce(|| (0, 0), |a, t| (a.0 + t.0, a.1 + t.1));
    let data = c.into_iter().map(|a| f32::from_bits(a.into_inner())).collect();
    (data, mac, writes)
}

/// Balanced path without atomics: one task per (panel, y-block) folds that
/// panel's chunks in order, so results do not depend on scheduling.
fn run_balanced_deterministic(p: &Pcsr, b: &DenseMatrix) -> (Vec<f32>, u64, u64) {
    let cfg = *p.config();
    let (n, v, dim) = (p.n(), cfg.v, cfg.dim);
    let seg_width = cfg.omega * cfg.f;
    let blocks_y = dim.div_ceil(seg_width);
    let mut chunks_of_panel: Vec<Vec<usize>> = vec![Vec::new(); p.num_panels()];
    for w in 0..p.num_warp_rows() {
        chunks_of_panel[p.t_row()[w] as usize].push(w);
    }
    let mut c = vec![0f32; n * dim];
    let out = SendPtr(c.as_mut_ptr());
    let (mac, writes) = chunks_of_panel
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0f32; v * seg_width],
            |res, (panel, chunks)| {
                let slots = v.min(n - panel * v);
                let (mut mac, mut writes) = (0u64, 0u64);
                for blk_y in 0..blocks_y {
                    let seg = blk_y * seg_width;
                    let covered = (dim - seg).min(seg_width);
                    let res = &mut res[..v * covered];
                    res.fill(0.0);
                    for &crow in chunks {
                        let l = sweep(p, b, crow, seg, covered, res);
                        mac += (l * v * covered) as u64;
                        writes += (slots * covered) as u64;
                    }
                    // Sole writer of this panel's rows in this segment.
                    for slot in 0..slots {
                        let row = panel * v + slot;
                        unsafe {
                            let dst = out.add(row * dim + seg);
                            for i in 0..covered {
                                *dst.add(i) = res[slot * covered + i];
                            }
                        }
                    }
                }
                (mac, writes)
            },
        )
        .reduce(|| (0, 0), |a, t| (a.0 + t.0, a.1 + t.1));
    (c, mac, writes)
}

/// Builds the format for `config` and times `repeats` runs after one
/// warm-up, keeping the minimum.
pub fn benchmark_config(
    a: &CsrMatrix,
    config: SpmmConfig,
    b: &DenseMatrix,
    repeats: usize,
) -> Result<EngineReport> {
    let p = build_pcsr(a, config)?;
    benchmark_pcsr(&p, b, repeats)
}

/// Benchmark over an already-built format (lets callers sweep W and F
/// without rebuilding the arrays).
pub fn benchmark_pcsr(p: &Pcsr, b: &DenseMatrix, repeats: usize) -> Result<EngineReport> {
    if repeats < 3 {
        return Err(Error::InvalidParameter(format!("repeats must be >= 3, got {repeats}")));
    }
    let (_, mut report) = spmm_pcsr(p, b)?;
    let mut best = f64::INFINITY;
    for _ in 0..repeats {
        let (_, r) = spmm_pcsr(p, b)?;
        best = best.min(r.elapsed);
    }
    report.elapsed = best.max(f64::MIN_POSITIVE);
    Ok(report)
}

fn atomic_add_f32(slot: &AtomicU32, add: f32) {
    let mut cur = slot.load(Ordering::Relaxed);
    loop {
        let new = (f32::from_bits(cur) + add).to_bits();
        match slot.compare_exchange_weak(cur, new, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return,
            Err(actual) => cur = actual,
        }
    }
}

struct SendPtr(*mut f32);

impl SendPtr {
    /// # Safety
    /// Callers must keep writes through the returned pointer disjoint
    /// across tasks.
    unsafe fn add(&self, offset: usize) -> *mut f32 {
        self.0.add(offset)
    }
}

// Tasks write pairwise-disjoint index ranges; see call sites.
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

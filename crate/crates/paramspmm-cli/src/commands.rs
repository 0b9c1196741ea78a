//! Subcommand implementations. Output lines are `key=value` pairs so
//! scripts can consume them; schemas are stable within a version.

use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use paramspmm::decider::argmax_throughput;
use paramspmm::{
    apply_permutation, benchmark_lattice, build_pcsr, compute_metrics, dense_oracle_spmm,
    extract_features, load_matrix_market, load_model, read_corpus_csv, read_pcsr,
    reorder_locality, save_model, score_normalized, spmm_pcsr_with, train, write_corpus_csv,
    write_matrix_market, write_pcsr, write_permutation, ConfigLabel, CsrMatrix, DenseMatrix,
    EngineOptions, ForestParams, LabeledRow, LatticeSpec, Pcsr, ReductionMode, ReorderStrategy,
    SpmmConfig, FEATURE_COLUMNS,
};

use crate::inputs;
use crate::manifest::load_manifest;

/// Matching tolerances for `--verify`: oracle accumulates in f64, the
/// engine in f32.
const VERIFY_REL: f64 = 1e-4;
const VERIFY_ABS: f64 = 1e-6;

fn v_range() -> clap::builder::RangedU64ValueParser {
    clap::value_parser!(u64).range(1..=2)
}

/// Loads a user-named matrix, keeping the path in any failure.
fn load_input(path: &Path) -> Result<CsrMatrix> {
    load_matrix_market(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Sparse input, Matrix Market format.
    input: PathBuf,
    /// Destination PCSR file.
    #[arg(long)]
    out: PathBuf,
    /// Dense operand width the config is validated against.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 32)]
    omega: usize,
    /// Warps per block.
    #[arg(long, default_value_t = 4)]
    w: usize,
    /// Thread coarsening factor.
    #[arg(long, default_value_t = 1)]
    f: usize,
    /// Vector height, 1 or 2.
    #[arg(long, default_value_t = 1, value_parser = v_range())]
    v: u64,
    /// Split panels into workload-balanced chunks.
    #[arg(long)]
    balance: bool,
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<()> {
    let a = load_input(&args.input)?;
    let config =
        SpmmConfig::new(args.w, args.f, args.v as usize, args.balance, args.omega, args.dim)?;
    let p = build_pcsr(&a, config)?;
    write_pcsr(&p, &args.out)?;
    println!(
        "wrote={} n={} panels={} nnz_v={} v={} balance={}",
        args.out.display(),
        p.n(),
        p.num_panels(),
        p.nnz_v(),
        config.v,
        u8::from(config.s)
    );
    Ok(())
}

#[derive(Args)]
pub struct InspectArgs {
    /// Sparse input, Matrix Market format.
    input: PathBuf,
    #[arg(long, default_value_t = 32)]
    omega: usize,
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let a = load_input(&args.input)?;
    let features = extract_features(&a, args.omega)?;
    println!("matrix={}", args.input.display());
    let values = features.as_array();
    for (name, value) in FEATURE_COLUMNS.iter().zip(values) {
        println!("{name}={value}");
    }
    for v in [1, 2] {
        let m = compute_metrics(&a, v, args.omega)?;
        println!(
            "v={v} nnz_v={} pr={} sg={} sr={} d_hat_v={}",
            m.nnz_v, m.pr, m.sg, m.sr, m.d_hat_v
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct BenchArgs {
    /// Run manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; overrides the manifest's out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check every timed result against the f64 reference product.
    #[arg(long)]
    verify: bool,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| manifest.out_dir.clone())
        .context("no output directory: set out_dir in the manifest or pass --out")?;
    std::fs::create_dir_all(&out_dir)?;

    let matrices: Vec<(String, CsrMatrix)> = manifest
        .inputs
        .iter()
        .map(|p| Ok((inputs::matrix_id(p), load_input(p)?)))
        .collect::<Result<_>>()?;
    let dims = manifest.dims();

    let bench_path = out_dir.join("bench.csv");
    let mut bench = csv::Writer::from_writer(File::create(&bench_path)?);
    bench.write_record([
        "matrix", "dim", "config", "w", "f", "v", "s", "gflops", "elapsed_s", "mac_ops",
    ])?;

    let mut total_rows = 0usize;
    for &dim in &dims {
        let lattice = LatticeSpec::new(manifest.w_domain.clone(), manifest.omega, dim)?;
        let configs = lattice.configs();
        let mut corpus: Vec<LabeledRow> = Vec::with_capacity(matrices.len());
        for (mi, (id, a)) in matrices.iter().enumerate() {
            let seed = manifest.seed ^ ((mi as u64) << 32) ^ dim as u64;
            let b = DenseMatrix::random(a.n(), dim, seed);
            if args.verify {
                let reference = dense_oracle_spmm(a, &b)?;
                // Panel arrays depend only on (V, S); rebind W and F per config.
                let mut cache: HashMap<(usize, bool), Pcsr> = HashMap::new();
                for (ci, config) in configs.iter().enumerate() {
                    if !cache.contains_key(&(config.v, config.s)) {
                        cache.insert((config.v, config.s), build_pcsr(a, *config)?);
                    }
                    let p = cache[&(config.v, config.s)].with_config(*config)?;
                    let (c, _) = paramspmm::spmm_pcsr(&p, &b)?;
                    if !c.approx_eq(&reference, VERIFY_REL, VERIFY_ABS) {
                        bail!(
                            "verification failed: matrix={id} dim={dim} config={ci} \
                             w={} f={} v={} s={}",
                            config.w,
                            config.f,
                            config.v,
                            u8::from(config.s)
                        );
                    }
                }
            }
            let reports = benchmark_lattice(a, &lattice, &b, manifest.repeats)?;
            let mut throughput = Vec::with_capacity(configs.len());
            for ((ci, config), report) in configs.iter().enumerate().zip(&reports) {
                let gflops = report.gflops(a.nnz(), dim);
                throughput.push(gflops);
                bench.write_record([
                    id.clone(),
                    dim.to_string(),
                    ci.to_string(),
                    config.w.to_string(),
                    config.f.to_string(),
                    config.v.to_string(),
                    u8::from(config.s).to_string(),
                    gflops.to_string(),
                    report.elapsed.to_string(),
                    report.mac_ops.to_string(),
                ])?;
                total_rows += 1;
            }
            corpus.push(LabeledRow {
                id: id.clone(),
                features: extract_features(a, manifest.omega)?,
                label: ConfigLabel { config_id: argmax_throughput(&throughput), throughput },
            });
            log::info!("benchmarked {id} at dim {dim}");
        }
        let corpus_path = out_dir.join(format!("corpus_dim{dim}.csv"));
        write_corpus_csv(&corpus_path, &corpus, &lattice)?;
    }
    bench.flush()?;
    println!(
        "bench_csv={} rows={total_rows} corpus_files={} verified={}",
        bench_path.display(),
        dims.len(),
        u8::from(args.verify)
    );
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    /// Labeled corpus CSV produced by bench.
    #[arg(long)]
    corpus: PathBuf,
    /// Dense operand width the corpus was benchmarked at.
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 32)]
    omega: usize,
    /// Lattice W domain.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8])]
    w_domain: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    /// Grow each tree on the full training set instead of a bootstrap
    /// resample. A deep single tree then memorizes its corpus.
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let lattice = LatticeSpec::new(args.w_domain.clone(), args.omega, args.dim)?;
    let rows = read_corpus_csv(&args.corpus, &lattice)
        .with_context(|| format!("reading {}", args.corpus.display()))?;
    let params = ForestParams {
        num_trees: args.trees,
        max_depth: args.depth,
        min_leaf: args.min_leaf,
        bootstrap: !args.no_bootstrap,
        seed: args.seed,
        ..ForestParams::default()
    };
    let model = train(&rows, &lattice, &params)?;
    save_model(&model, &args.out)?;
    let score = score_normalized(&model, &rows, args.seed)?;
    println!(
        "model={} rows={} trees={} classes={} train_normalized={:.4}",
        args.out.display(),
        rows.len(),
        model.num_trees(),
        lattice.len(),
        score.predicted
    );
    Ok(())
}

#[derive(Args)]
pub struct PredictArgs {
    /// Sparse input, Matrix Market format.
    input: PathBuf,
    /// Dense operand width to pick a config for.
    #[arg(long)]
    dim: usize,
    /// Model file; defaults to model-dim<dim>.json under PARAMSPMM_MODEL_DIR.
    #[arg(long)]
    model: Option<PathBuf>,
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let a = load_input(&args.input)?;
    let config = predict_config(&a, args.dim, args.model.as_deref())?;
    print_config(&config);
    Ok(())
}

fn predict_config(a: &CsrMatrix, dim: usize, model_flag: Option<&Path>) -> Result<SpmmConfig> {
    let path = inputs::resolve_model_path(model_flag, dim)?;
    let model = load_model(&path).with_context(|| format!("reading {}", path.display()))?;
    if model.lattice.dim != dim {
        bail!(
            "model {} was trained for dim {}, requested dim {dim}",
            path.display(),
            model.lattice.dim
        );
    }
    let features = extract_features(a, model.lattice.omega)?;
    let id = paramspmm::predict_id(&model, &features)?;
    let config = model.lattice.config(id)?;
    println!("config_id={id}");
    Ok(config)
}

fn print_config(config: &SpmmConfig) {
    println!(
        "w={} f={} v={} s={} omega={} dim={}",
        config.w,
        config.f,
        config.v,
        u8::from(config.s),
        config.omega,
        config.dim
    );
}

#[derive(Args)]
pub struct SpmmArgs {
    /// Sparse input: Matrix Market (.mtx) or converted PCSR (.pcsr).
    input: PathBuf,
    /// Dense operand width.
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 32)]
    omega: usize,
    /// Pick the config with the trained decider instead of flags.
    #[arg(long)]
    auto: bool,
    /// Model file for --auto.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    w: usize,
    #[arg(long, default_value_t = 1)]
    f: usize,
    #[arg(long, default_value_t = 1, value_parser = v_range())]
    v: u64,
    #[arg(long)]
    balance: bool,
    /// Dense operand file; generated from --seed when absent.
    #[arg(long)]
    b_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the product here (dense binary).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the product against the f64 reference.
    #[arg(long)]
    verify: bool,
}

pub fn cmd_spmm(args: &SpmmArgs) -> Result<()> {
    if args.input.extension().is_some_and(|e| e == "pcsr") {
        return spmm_from_pcsr(args);
    }
    let a = load_input(&args.input)?;
    let config = if args.auto {
        let c = predict_config(&a, args.dim, args.model.as_deref())?;
        if c.omega != args.omega {
            bail!("model lattice uses omega {}, requested {}", c.omega, args.omega);
        }
        c
    } else {
        SpmmConfig::new(args.w, args.f, args.v as usize, args.balance, args.omega, args.dim)?
    };
    let p = build_pcsr(&a, config)?;
    let b = inputs::dense_operand(a.n(), args.dim, args.b_file.as_deref(), args.seed)?;
    run_spmm(&p, &b, Some(&a), a.nnz(), args)
}

/// A .pcsr input skips conversion; the stored knobs are rebound to the
/// requested grid. Verification needs the original matrix, so it is
/// refused here.
fn spmm_from_pcsr(args: &SpmmArgs) -> Result<()> {
    if args.auto {
        bail!("--auto needs matrix features; pass the Matrix Market input instead");
    }
    if args.verify {
        bail!("--verify needs the original matrix; pass the Matrix Market input instead");
    }
    let p = read_pcsr(&args.input, args.w, args.f, args.dim)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let config = p.config();
    if config.omega != args.omega {
        bail!("file uses omega {}, requested {}", config.omega, args.omega);
    }
    if config.v != args.v as usize || config.s != args.balance {
        bail!(
            "file stores v={} balance={}; --v/--balance cannot rebind a converted file",
            config.v,
            u8::from(config.s)
        );
    }
    let b = inputs::dense_operand(p.n(), args.dim, args.b_file.as_deref(), args.seed)?;
    // Padding slots hold zeros; everything else is a source nonzero.
    let nnz = p.val().iter().filter(|&&x| x != 0.0).count();
    run_spmm(&p, &b, None, nnz, args)
}

fn run_spmm(
    p: &Pcsr,
    b: &DenseMatrix,
    a: Option<&CsrMatrix>,
    nnz: usize,
    args: &SpmmArgs,
) -> Result<()> {
    print_config(p.config());
    // Deterministic reduction keeps the output byte-stable across runs
    // and thread counts.
    let options = EngineOptions { reduction: ReductionMode::Deterministic };
    let (c, report) = spmm_pcsr_with(p, b, options)?;
    if let (true, Some(a)) = (args.verify, a) {
        let reference = dense_oracle_spmm(a, b)?;
        if !c.approx_eq(&reference, VERIFY_REL, VERIFY_ABS) {
            bail!("verification failed against the f64 reference");
        }
        println!("verify=ok");
    }
    if let Some(out) = &args.out {
        inputs::write_dense(&c, out)?;
        println!("out={}", out.display());
    }
    println!("elapsed_s={} gflops={}", report.elapsed, report.gflops(nnz, b.cols()));
    Ok(())
}

#[derive(Args)]
pub struct ReorderArgs {
    /// Sparse input, Matrix Market format.
    input: PathBuf,
    /// identity, bfs, or degree-bfs.
    #[arg(long, default_value = "bfs")]
    strategy: ReorderStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination permutation file, one new index per line.
    #[arg(long)]
    out: PathBuf,
    /// Also write the relabeled matrix here (Matrix Market).
    #[arg(long)]
    apply: Option<PathBuf>,
}

pub fn cmd_reorder(args: &ReorderArgs) -> Result<()> {
    let a = load_input(&args.input)?;
    let perm = reorder_locality(&a, args.strategy, args.seed);
    write_permutation(&perm, &args.out)?;
    println!("perm={}", args.out.display());
    let before = extract_features(&a, 32)?;
    let relabeled = apply_permutation(&a, &perm)?;
    let after = extract_features(&relabeled, 32)?;
    println!("mean_bandwidth_before={} mean_bandwidth_after={}", before.b, after.b);
    if let Some(path) = &args.apply {
        write_matrix_market(&relabeled, path)?;
        println!("applied={}", path.display());
    }
    Ok(())
}

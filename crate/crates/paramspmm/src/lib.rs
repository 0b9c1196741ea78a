//! Parametric SpMM: a sparse format, an execution engine, and a learned
//! decider that together pick a kernel configuration per input matrix.
//!
//! The crate multiplies a sparse `n x n` matrix by a dense `n x dim`
//! operand. The sparse side is stored in a parametric layout ([`Pcsr`])
//! whose shape is controlled by four knobs ([`SpmmConfig`]): warps per
//! block `W`, column segment factor `F`, vector height `V`, and nonzero
//! split balancing `S`. The engine emulates the warp-task grid those knobs
//! induce; the decider trains a random forest over structural features to
//! predict the fastest knob setting for an unseen matrix.

pub mod decider;
pub mod engine;
pub mod error;
pub mod features;
pub mod matrix;
pub mod pcsr;
pub mod reorder;

pub use decider::{
    benchmark_lattice, label_corpus, load_model, predict, predict_id, read_corpus_csv, save_model,
    score_normalized, train, write_corpus_csv, ConfigLabel, DeciderModel, ForestParams, LabeledRow,
    LatticeSpec, NormalizedScore, RandomForest, MODEL_FORMAT_VERSION,
};
pub use engine::{
    benchmark_config, benchmark_pcsr, enumerate_warp_tasks, spmm_csr_reference, spmm_pcsr,
    spmm_pcsr_with, EngineOptions, EngineReport, ReductionMode, WarpTask,
};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector, FEATURE_COLUMNS, FEATURE_SCHEMA_VERSION};
pub use matrix::{
    dense_oracle_spmm, generate_synthetic, load_matrix_market, write_matrix_market, CooEntry,
    CsrMatrix, DenseMatrix, SynthKind,
};
pub use pcsr::{
    build_pcsr, compute_mac_gap, compute_metrics, padding_ratio, panel_vector_counts, read_pcsr,
    split_granularity, split_panels, split_ratio, write_pcsr, Pcsr, PcsrMetrics, SpmmConfig,
};
pub use reorder::{
    apply_permutation, read_permutation, reorder_locality, write_permutation, Permutation,
    ReorderStrategy,
};

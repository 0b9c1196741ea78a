//! The configuration decider: label matrices by exhaustive benchmarking,
//! train a random forest from their features, and predict the best
//! (W, F, V, S) for unseen inputs. One model serves one dense width.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{spmm_pcsr, EngineReport};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector, FEATURE_COLUMNS, FEATURE_SCHEMA_VERSION};
use crate::matrix::{CsrMatrix, DenseMatrix};
use crate::pcsr::{build_pcsr, Pcsr, SpmmConfig};

mod forest;
mod tree;

pub use forest::{train_forest, ForestParams, RandomForest};
pub use tree::{Node, Tree, NUM_FEATURES};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The enumerated space of valid configs for one (dim, omega).
///
/// Enumeration order is fixed: W outermost in domain order, then F from 1
/// to CEIL(dim/omega), then V in {1, 2}, then S in {off, on} innermost.
/// A config's id is its position in that order; files and models store ids
/// against this spec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub w_domain: Vec<usize>,
    pub omega: usize,
    pub dim: usize,
}

impl LatticeSpec {
    pub fn new(w_domain: Vec<usize>, omega: usize, dim: usize) -> Result<Self> {
        if w_domain.is_empty() || w_domain.iter().any(|&w| w < 1) {
            return Err(Error::InvalidParameter("W domain must be non-empty, all >= 1".into()));
        }
        if omega < 1 || dim < 1 {
            return Err(Error::InvalidParameter("omega and dim must be >= 1".into()));
        }
        Ok(LatticeSpec { w_domain, omega, dim })
    }

    /// The calibrated default: W in {2, 4, 8}, warp width 32.
    pub fn default_for_dim(dim: usize) -> Self {
        LatticeSpec { w_domain: vec![2, 4, 8], omega: 32, dim }
    }

    pub fn len(&self) -> usize {
        self.w_domain.len() * SpmmConfig::max_f(self.dim, self.omega) * 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn configs(&self) -> Vec<SpmmConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &w in &self.w_domain {
            for f in 1..=SpmmConfig::max_f(self.dim, self.omega) {
                for v in [1, 2] {
                    for s in [false, true] {
                        out.push(
                            SpmmConfig::new(w, f, v, s, self.omega, self.dim)
                                .expect("lattice members are valid by construction"),
                        );
                    }
                }
            }
        }
        out
    }

    pub fn config(&self, id: usize) -> Result<SpmmConfig> {
        self.configs()
            .into_iter()
            .nth(id)
            .ok_or_else(|| Error::InvalidParameter(format!("config id {id} outside the lattice")))
    }
}

/// Benchmark outcome for one matrix: the winning config and the full
/// throughput table (needed later to normalize any prediction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigLabel {
    pub config_id: usize,
    /// GFLOPS per lattice config, indexed by config id.
    pub throughput: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub id: String,
    pub features: FeatureVector,
    pub label: ConfigLabel,
}

/// Benchmarks every (matrix, config) pair and records per-matrix winners.
///
/// Matrices and configs run strictly one at a time so timings do not
/// interfere; a failing matrix is skipped with a logged warning. `seed`
/// fixes the dense operands.
pub fn label_corpus(
    matrices: &[(String, CsrMatrix)],
    lattice: &LatticeSpec,
    repeats: usize,
    seed: u64,
) -> Result<Vec<LabeledRow>> {
    let mut rows = Vec::with_capacity(matrices.len());
    for (i, (id, a)) in matrices.iter().enumerate() {
        match label_one(id, a, lattice, repeats, seed.wrapping_add(i as u64)) {
            Ok(row) => rows.push(row),
            Err(e) => log::warn!("skipping {id}: {e}"),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(rows)
}

fn label_one(
    id: &str,
    a: &CsrMatrix,
    lattice: &LatticeSpec,
    repeats: usize,
    seed: u64,
) -> Result<LabeledRow> {
    let features = extract_features(a, lattice.omega)?;
    let b = DenseMatrix::random(a.n(), lattice.dim, seed);
    let reports = benchmark_lattice(a, lattice, &b, repeats)?;
    let throughput: Vec<f64> =
        reports.iter().map(|r| r.gflops(a.nnz(), lattice.dim)).collect();
    Ok(LabeledRow {
        id: id.to_string(),
        features,
        label: ConfigLabel { config_id: argmax_throughput(&throughput), throughput },
    })
}

/// Times every lattice config on one operand: a warmup round, then
/// `repeats` timed rounds, reporting each config's minimum.
///
/// Rounds interleave across configs so a scheduler stall lands on one
/// round of many configs instead of every repeat of one; the per-config
/// minimum then survives it. Relative rankings between configs are what
/// labels and normalized scores are built from, so this schedule is the
/// difference between a usable corpus and one poisoned by timing spikes.
pub fn benchmark_lattice(
    a: &CsrMatrix,
    lattice: &LatticeSpec,
    b: &DenseMatrix,
    repeats: usize,
) -> Result<Vec<EngineReport>> {
    if repeats < 3 {
        return Err(Error::InvalidParameter(format!("repeats must be >= 3, got {repeats}")));
    }
    // The arrays depend only on (V, S); share one build across W and F.
    let mut cache: HashMap<(usize, bool), Pcsr> = HashMap::new();
    let mut bound = Vec::with_capacity(lattice.len());
    for config in lattice.configs() {
        if !cache.contains_key(&(config.v, config.s)) {
            cache.insert((config.v, config.s), build_pcsr(a, config)?);
        }
        bound.push(cache[&(config.v, config.s)].with_config(config)?);
    }
    let mut reports = Vec::with_capacity(bound.len());
    for p in &bound {
        let (_, r) = spmm_pcsr(p, b)?;
        reports.push(EngineReport { elapsed: f64::INFINITY, ..r });
    }
    for _ in 0..repeats {
        for (p, report) in bound.iter().zip(&mut reports) {
            let (_, r) = spmm_pcsr(p, b)?;
            report.elapsed = report.elapsed.min(r.elapsed);
        }
    }
    for report in &mut reports {
        report.elapsed = report.elapsed.max(f64::MIN_POSITIVE);
    }
    Ok(reports)
}

/// First maximum wins: ties resolve to the lowest config id.
pub fn argmax_throughput(throughput: &[f64]) -> usize {
    let mut best = 0;
    for (i, &t) in throughput.iter().enumerate() {
        if t > throughput[best] {
            best = i;
        }
    }
    best
}

/// Trained decider: a forest voting over the lattice of one dense width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeciderModel {
    pub format_version: u32,
    pub feature_schema: u32,
    pub lattice: LatticeSpec,
    forest: RandomForest,
}

impl DeciderModel {
    pub fn num_trees(&self) -> usize {
        self.forest.num_trees()
    }
}

pub fn train(rows: &[LabeledRow], lattice: &LatticeSpec, params: &ForestParams) -> Result<DeciderModel> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let num_classes = lattice.len();
    for row in rows {
        if row.label.config_id >= num_classes || row.label.throughput.len() != num_classes {
            return Err(Error::SchemaMismatch(format!(
                "row {} labeled against a different lattice",
                row.id
            )));
        }
    }
    let data: Vec<[f64; NUM_FEATURES]> = rows.iter().map(|r| r.features.as_array()).collect();
    let labels: Vec<usize> = rows.iter().map(|r| r.label.config_id).collect();
    let forest = train_forest(&data, &labels, num_classes, params);
    Ok(DeciderModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_schema: FEATURE_SCHEMA_VERSION,
        lattice: lattice.clone(),
        forest,
    })
}

pub fn predict_id(model: &DeciderModel, f: &FeatureVector) -> Result<usize> {
    if model.feature_schema != FEATURE_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "model was trained on feature schema v{}, this build extracts v{}",
            model.feature_schema, FEATURE_SCHEMA_VERSION
        )));
    }
    Ok(model.forest.predict(&f.as_array()))
}

/// Predicted best config for a feature vector; always valid for the
/// model's dense width.
pub fn predict(model: &DeciderModel, f: &FeatureVector) -> Result<SpmmConfig> {
    model.lattice.config(predict_id(model, f)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedScore {
    /// Mean of throughput(predicted) / throughput(best) over the rows.
    pub predicted: f64,
    /// Same for a uniformly random config choice at a fixed seed.
    pub random: f64,
}

/// Scores the model on labeled rows that carry full throughput tables.
pub fn score_normalized(
    model: &DeciderModel,
    rows: &[LabeledRow],
    baseline_seed: u64,
) -> Result<NormalizedScore> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(baseline_seed);
    let mut predicted_sum = 0.0;
    let mut random_sum = 0.0;
    for row in rows {
        let tp = &row.label.throughput;
        let best = tp[argmax_throughput(tp)];
        let chosen = predict_id(model, &row.features)?;
        if chosen >= tp.len() {
            return Err(Error::SchemaMismatch(format!(
                "prediction {chosen} outside row {}'s throughput table",
                row.id
            )));
        }
        predicted_sum += tp[chosen] / best;
        random_sum += tp[rng.gen_range(0..tp.len())] / best;
    }
    let n = rows.len() as f64;
    Ok(NormalizedScore { predicted: predicted_sum / n, random: random_sum / n })
}

pub fn save_model(model: &DeciderModel, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    serde_json::to_writer_pretty(file, model)
        .map_err(|e| Error::Format(format!("model serialization failed: {e}")))
}

pub fn load_model(path: &Path) -> Result<DeciderModel> {
    let file = File::open(path)?;
    let model: DeciderModel = serde_json::from_reader(file)
        .map_err(|e| Error::Format(format!("model deserialization failed: {e}")))?;
    if model.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "model format v{} unsupported, expected v{MODEL_FORMAT_VERSION}",
            model.format_version
        )));
    }
    if model.feature_schema != FEATURE_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "model feature schema v{} unsupported, expected v{FEATURE_SCHEMA_VERSION}",
            model.feature_schema
        )));
    }
    Ok(model)
}

/// Writes the labeled corpus: feature columns joined with the winning id
/// and one throughput column per lattice config.
pub fn write_corpus_csv(path: &Path, rows: &[LabeledRow], lattice: &LatticeSpec) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let mut header: Vec<String> = vec!["id".into()];
    header.extend(FEATURE_COLUMNS.iter().map(|s| s.to_string()));
    header.push("dim".into());
    header.push("omega".into());
    header.push("best".into());
    for i in 0..lattice.len() {
        header.push(format!("tp_{i}"));
    }
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for row in rows {
        let mut record: Vec<String> = vec![row.id.clone()];
        record.extend(row.features.as_array().iter().map(|x| x.to_string()));
        record.push(lattice.dim.to_string());
        record.push(lattice.omega.to_string());
        record.push(row.label.config_id.to_string());
        record.extend(row.label.throughput.iter().map(|t| t.to_string()));
        w.write_record(&record).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a labeled corpus back, validating it against the lattice the
/// caller intends to train for.
pub fn read_corpus_csv(path: &Path, lattice: &LatticeSpec) -> Result<Vec<LabeledRow>> {
    let mut r = csv::Reader::from_reader(File::open(path)?);
    let header = r.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let mut expected: Vec<String> = vec!["id".into()];
    expected.extend(FEATURE_COLUMNS.iter().map(|s| s.to_string()));
    expected.push("dim".into());
    expected.push("omega".into());
    expected.push("best".into());
    for i in 0..lattice.len() {
        expected.push(format!("tp_{i}"));
    }
    if header.iter().collect::<Vec<_>>() != expected.iter().map(|s| s.as_str()).collect::<Vec<_>>()
    {
        return Err(Error::SchemaMismatch(
            "corpus header does not match the requested lattice and feature schema".into(),
        ));
    }
    let feat_end = 1 + FEATURE_COLUMNS.len();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let get = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Format("short corpus row".into()))
        };
        let id = get(0)?.to_string();
        let mut values = [0f64; NUM_FEATURES];
        for (i, v) in values.iter_mut().enumerate() {
            *v = get(1 + i)?
                .parse()
                .map_err(|_| Error::Format(format!("bad feature value in row {id}")))?;
        }
        let dim: usize = get(feat_end)?.parse().map_err(|_| Error::Format("bad dim".into()))?;
        let omega: usize =
            get(feat_end + 1)?.parse().map_err(|_| Error::Format("bad omega".into()))?;
        if dim != lattice.dim || omega != lattice.omega {
            return Err(Error::SchemaMismatch(format!(
                "corpus row {id} was benchmarked at dim={dim} omega={omega}, lattice wants dim={} omega={}",
                lattice.dim, lattice.omega
            )));
        }
        let config_id: usize =
            get(feat_end + 2)?.parse().map_err(|_| Error::Format("bad best id".into()))?;
        let mut throughput = Vec::with_capacity(lattice.len());
        for i in 0..lattice.len() {
            throughput.push(
                get(feat_end + 3 + i)?
                    .parse()
                    .map_err(|_| Error::Format(format!("bad throughput in row {id}")))?,
            );
        }
        rows.push(LabeledRow {
            id,
            features: crate::features::feature_vector_from_array(&values),
            label: ConfigLabel { config_id, throughput },
        });
    }
    Ok(rows)
}

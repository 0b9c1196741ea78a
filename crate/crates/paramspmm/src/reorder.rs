//! Locality-enhancing node reordering and permutation plumbing.
//!
//! The orderings are BFS-based: they number each connected component of
//! the symmetrized pattern breadth-first from a pseudo-peripheral vertex,
//! which pulls a row's neighbors close together and shrinks bandwidth.
//! Externally computed permutations can be read from file, so a stronger
//! ordering can be swapped in without touching the pipeline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{CooEntry, CsrMatrix, DenseMatrix};

/// A bijection on `[0, n)` with both directions materialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    /// old index -> new index
    perm: Vec<usize>,
    /// new index -> old index
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let perm: Vec<usize> = (0..n).collect();
        Permutation { inverse: perm.clone(), perm }
    }

    /// Builds from an old-to-new map, validating bijectivity.
    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in perm.iter().enumerate() {
            if new >= n || inverse[new] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "not a bijection on [0, {n}): repeated or out-of-range target {new}"
                )));
            }
            inverse[new] = old;
        }
        Ok(Permutation { perm, inverse })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }

    pub fn inverted(&self) -> Permutation {
        Permutation { perm: self.inverse.clone(), inverse: self.perm.clone() }
    }

    /// Moves row `i` of `b` to row `perm[i]` of the result, the dense-side
    /// companion of relabeling the sparse matrix.
    pub fn permute_rows(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "permutation is on {} indices but B has {} rows",
                self.n(),
                b.rows()
            )));
        }
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for i in 0..b.rows() {
            let src = b.row(i);
            let dst = self.perm[i];
            for (j, &x) in src.iter().enumerate() {
                out.set(dst, j, x);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReorderStrategy {
    Identity,
    /// Breadth-first numbering, neighbors in index order.
    Bfs,
    /// Breadth-first numbering, neighbors in ascending-degree order.
    DegreeBfs,
}

impl FromStr for ReorderStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ReorderStrategy::Identity),
            "bfs" => Ok(ReorderStrategy::Bfs),
            "degree-bfs" => Ok(ReorderStrategy::DegreeBfs),
            other => Err(Error::InvalidParameter(format!(
                "unknown reorder strategy {other:?} (expected identity, bfs, or degree-bfs)"
            ))),
        }
    }
}

/// Computes a locality ordering of `a`'s symmetrized pattern.
///
/// Components are numbered largest first (ties to the smallest vertex);
/// inside a component the numbering is breadth-first from a
/// pseudo-peripheral start. The seed only picks among equal-degree start
/// candidates, so results are reproducible.
pub fn reorder_locality(a: &CsrMatrix, strategy: ReorderStrategy, seed: u64) -> Permutation {
    let n = a.n();
    if strategy == ReorderStrategy::Identity {
        return Permutation::identity(n);
    }
    let mut adj = symmetrized_adjacency(a);
    if strategy == ReorderStrategy::DegreeBfs {
        let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
        for list in &mut adj {
            list.sort_by_key(|&u| (degree[u], u));
        }
    }

    let mut components = connected_components(&adj);
    components.sort_by_key(|c| (std::cmp::Reverse(c.len()), c[0]));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = vec![usize::MAX; n];
    let mut next = 0;
    let mut visited = vec![false; n];
    for comp in &components {
        let start = pseudo_peripheral(&adj, comp, &mut rng);
        for v in bfs_order(&adj, start, &mut visited) {
            perm[v] = next;
            next += 1;
        }
    }
    debug_assert_eq!(next, n);
    Permutation::from_perm(perm).expect("BFS numbering is a bijection")
}

/// Relabels both sides: `A'[p(i)][p(j)] = A[i][j]`.
pub fn apply_permutation(a: &CsrMatrix, p: &Permutation) -> Result<CsrMatrix> {
    if p.n() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "permutation is on {} indices but the matrix has {} rows",
            p.n(),
            a.n()
        )));
    }
    let entries: Vec<CooEntry> = a
        .to_coo()
        .into_iter()
        .map(|e| CooEntry { row: p.perm[e.row], col: p.perm[e.col], value: e.value })
        .collect();
    CsrMatrix::from_coo(a.n(), &entries)
}

/// One new index per line, 0-based, line `i` holding `perm[i]`.
pub fn write_permutation(p: &Permutation, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &new in &p.perm {
        writeln!(w, "{new}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_permutation(path: &Path) -> Result<Permutation> {
    let r = BufReader::new(File::open(path)?);
    let mut perm = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let new: usize = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("expected a 0-based index, got {line:?}"),
        })?;
        perm.push(new);
    }
    Permutation::from_perm(perm)
}

/// Pattern of `A + A^T` as sorted adjacency lists, self-loops dropped.
fn symmetrized_adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.n();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    comp.push(u);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// Walks to a vertex of near-maximal eccentricity: start at a random
/// minimum-degree vertex and repeatedly jump to the lowest-degree vertex
/// of the farthest BFS level while the eccentricity keeps growing.
fn pseudo_peripheral(adj: &[Vec<usize>], comp: &[usize], rng: &mut ChaCha8Rng) -> usize {
    let min_degree = comp.iter().map(|&v| adj[v].len()).min().unwrap();
    let candidates: Vec<usize> =
        comp.iter().copied().filter(|&v| adj[v].len() == min_degree).collect();
    let mut v = candidates[rng.gen_range(0..candidates.len())];
    let mut ecc = 0;
    for _ in 0..16 {
        let levels = bfs_level_map(adj, v);
        let far = comp.iter().filter_map(|&u| levels[u]).max().unwrap();
        if far <= ecc && ecc > 0 {
            break;
        }
        ecc = far;
        v = comp
            .iter()
            .copied()
            .filter(|&u| levels[u] == Some(far))
            .min_by_key(|&u| (adj[u].len(), u))
            .unwrap();
    }
    v
}

fn bfs_level_map(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = vec![start];
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &u in &adj[v] {
            if level[u].is_none() {
                level[u] = Some(level[v].unwrap() + 1);
                queue.push(u);
            }
        }
    }
    level
}

/// Visit order of one component; `visited` is shared across components.
fn bfs_order(adj: &[Vec<usize>], start: usize, visited: &mut [bool]) -> Vec<usize> {
    let mut order = vec![start];
    visited[start] = true;
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &u in &adj[v] {
            if !visited[u] {
                visited[u] = true;
                order.push(u);
            }
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::matrix::{dense_oracle_spmm, generate_synthetic, SynthKind};

    /// Undirected path over a scrambled labeling.
    fn scrambled_path(n: usize, mult: usize) -> CsrMatrix {
        assert_eq!(num_integer_gcd(mult, n), 1);
        let relabel: Vec<usize> = (0..n).map(|i| (i * mult) % n).collect();
        let mut entries = Vec::new();
        for i in 0..n - 1 {
            let (a, b) = (relabel[i], relabel[i + 1]);
            entries.push(CooEntry { row: a, col: b, value: 1.0 });
            entries.push(CooEntry { row: b, col: a, value: 1.0 });
        }
        CsrMatrix::from_coo(n, &entries).unwrap()
    }

    fn num_integer_gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            num_integer_gcd(b, a % b)
        }
    }

    #[test]
    fn identity_strategy_is_a_noop() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 3.0 }, 40, 0).unwrap();
        let p = reorder_locality(&a, ReorderStrategy::Identity, 0);
        assert_eq!(p.perm(), (0..40).collect::<Vec<_>>());
        assert_eq!(apply_permutation(&a, &p).unwrap(), a);
    }

    #[test]
    fn bfs_recovers_a_scrambled_path() {
        let a = scrambled_path(64, 37);
        assert!(extract_features(&a, 32).unwrap().b_max > 2);
        for strategy in [ReorderStrategy::Bfs, ReorderStrategy::DegreeBfs] {
            let p = reorder_locality(&a, strategy, 0);
            let b = apply_permutation(&a, &p).unwrap();
            let f = extract_features(&b, 32).unwrap();
            assert!(f.b_max <= 2, "{strategy:?} left b_max = {}", f.b_max);
        }
    }

    #[test]
    fn permutation_round_trips() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 2.0 }, 80, 5).unwrap();
        let p = reorder_locality(&a, ReorderStrategy::DegreeBfs, 3);
        let forward = apply_permutation(&a, &p).unwrap();
        let back = apply_permutation(&forward, &p.inverted()).unwrap();
        assert_eq!(back, a);
        for (old, &new) in p.perm().iter().enumerate() {
            assert_eq!(p.inverse()[new], old);
        }
    }

    #[test]
    fn reordering_preserves_degree_features() {
        let a = generate_synthetic(SynthKind::Powerlaw { exponent: 2.0 }, 300, 7).unwrap();
        let p = reorder_locality(&a, ReorderStrategy::Bfs, 1);
        let b = apply_permutation(&a, &p).unwrap();
        let (fa, fb) = (extract_features(&a, 32).unwrap(), extract_features(&b, 32).unwrap());
        assert_eq!(fa.nnz, fb.nnz);
        assert_eq!(fa.d, fb.d);
        assert_eq!(fa.d_max, fb.d_max);
        // Summation order differs, so CV may move in its last bits.
        assert!((fa.cv - fb.cv).abs() < 1e-12);
        assert_eq!(fa.rho, fb.rho);
        let mut da = a.degrees();
        let mut db = b.degrees();
        da.sort_unstable();
        db.sort_unstable();
        assert_eq!(da, db);
    }

    #[test]
    fn spmm_commutes_with_relabeling() {
        let a = generate_synthetic(SynthKind::Community {
            communities: 5,
            intra_degree: 4.0,
            inter_degree: 1.0,
        }, 90, 11)
        .unwrap();
        let b = DenseMatrix::random(90, 24, 9);
        let p = reorder_locality(&a, ReorderStrategy::DegreeBfs, 2);
        let a2 = apply_permutation(&a, &p).unwrap();
        let b2 = p.permute_rows(&b).unwrap();
        let direct = p.permute_rows(&dense_oracle_spmm(&a, &b).unwrap()).unwrap();
        let relabeled = dense_oracle_spmm(&a2, &b2).unwrap();
        assert!(relabeled.approx_eq(&direct, 1e-5, 1e-7));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 4.0 }, 120, 13).unwrap();
        let p1 = reorder_locality(&a, ReorderStrategy::Bfs, 42);
        let p2 = reorder_locality(&a, ReorderStrategy::Bfs, 42);
        assert_eq!(p1, p2);
    }

    #[test]
    fn file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perm.txt");
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 4.0 }, 30, 2).unwrap();
        let p = reorder_locality(&a, ReorderStrategy::DegreeBfs, 0);
        write_permutation(&p, &path).unwrap();
        assert_eq!(read_permutation(&path).unwrap(), p);

        std::fs::write(&path, "0\n2\n2\n").unwrap();
        assert!(read_permutation(&path).is_err());
        std::fs::write(&path, "0\nx\n1\n").unwrap();
        assert!(read_permutation(&path).is_err());
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let a = generate_synthetic(SynthKind::Uniform { avg_degree: 3.0 }, 20, 1).unwrap();
        let p = Permutation::identity(21);
        assert!(apply_permutation(&a, &p).is_err());
        assert!(p.permute_rows(&DenseMatrix::zeros(20, 4)).is_err());
        assert!(Permutation::from_perm(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_perm(vec![0, 3, 1]).is_err());
    }
}

//! Comparison metrics: conicity, average vector length and a shortest-path
//! graph kernel.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::kge_models::EmbeddingModel;
use crate::sampling::ScoredGraph;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Mean cosine between each entity vector and the mean entity vector.
/// Zero-norm entity vectors are skipped.
pub fn conicity(m: &EmbeddingModel) -> Result<f64> {
    if m.n_entities == 0 {
        return Err(KpError::Empty("no entity vectors".into()));
    }
    let mut mean = vec![0.0; m.dim];
    for row in m.entity_rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m.n_entities as f64);
    let mean_norm = norm(&mean);
    if mean_norm == 0.0 {
        return Err(KpError::Undefined("conicity of a zero mean vector".into()));
    }
    let (mut sum, mut counted) = (0.0, 0usize);
    for row in m.entity_rows() {
        let n = norm(row);
        if n == 0.0 {
            continue;
        }
        let dot: f64 = row.iter().zip(&mean).map(|(a, b)| a * b).sum();
        sum += dot / (n * mean_norm);
        counted += 1;
    }
    if counted == 0 {
        return Err(KpError::Undefined("all entity vectors are zero".into()));
    }
    Ok(sum / counted as f64)
}

/// Mean Euclidean norm of the entity vectors.
pub fn avl(m: &EmbeddingModel) -> Result<f64> {
    if m.n_entities == 0 {
        return Err(KpError::Empty("no entity vectors".into()));
    }
    Ok(m.entity_rows().map(norm).sum::<f64>() / m.n_entities as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub n_sampled_nodes: usize,
    /// Histogram bin width; `None` means `span / 32` of the shifted weights.
    pub bandwidth: Option<f64>,
    pub n_repeats: usize,
    pub seed: u64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            n_sampled_nodes: 100,
            bandwidth: None,
            n_repeats: 5,
            seed: 0,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sampled_nodes < 2 {
            return Err(KpError::InvalidArgument("n_sampled_nodes must be >= 2".into()));
        }
        if self.n_repeats < 1 {
            return Err(KpError::InvalidArgument("n_repeats must be >= 1".into()));
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(KpError::InvalidArgument(format!("bandwidth must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// All-pairs shortest path lengths on the subgraph induced by `nodes`, with
/// edges treated as undirected and weights shifted by `-shift`.
/// Unreachable pairs are omitted.
fn induced_path_lengths(g: &ScoredGraph, nodes: &[u32], shift: f64) -> Vec<f64> {
    let k = nodes.len();
    let mut local = vec![u32::MAX; g.n_nodes];
    for (i, &v) in nodes.iter().enumerate() {
        local[v as usize] = i as u32;
    }
    let mut dist = vec![f64::INFINITY; k * k];
    for i in 0..k {
        dist[i * k + i] = 0.0;
    }
    for e in &g.edges {
        let (a, b) = (local[e.head as usize], local[e.tail as usize]);
        if a == u32::MAX || b == u32::MAX || a == b {
            continue;
        }
        let w = e.weight - shift;
        let (a, b) = (a as usize, b as usize);
        if w < dist[a * k + b] {
            dist[a * k + b] = w;
            dist[b * k + a] = w;
        }
    }
    for via in 0..k {
        for i in 0..k {
            let d_iv = dist[i * k + via];
            if d_iv == f64::INFINITY {
                continue;
            }
            for j in 0..k {
                let cand = d_iv + dist[via * k + j];
                if cand < dist[i * k + j] {
                    dist[i * k + j] = cand;
                }
            }
        }
    }
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let d = dist[i * k + j];
            if d.is_finite() {
                out.push(d);
            }
        }
    }
    out
}

fn histogram(lengths: &[f64], bandwidth: f64) -> Vec<f64> {
    let mut bins: Vec<f64> = Vec::new();
    for &l in lengths {
        let b = (l / bandwidth).floor() as usize;
        if b >= bins.len() {
            bins.resize(b + 1, 0.0);
        }
        bins[b] += 1.0;
    }
    bins
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

/// Histogram inner-product kernel over sampled shortest-path lengths,
/// averaged over repeats. Weights are shifted by the minimum weight of both
/// graphs so that all path lengths are non-negative.
pub fn shortest_path_kernel(g1: &ScoredGraph, g2: &ScoredGraph, cfg: &KernelConfig) -> Result<f64> {
    cfg.validate()?;
    if g1.n_nodes == 0 || g2.n_nodes == 0 {
        return Err(KpError::Empty("kernel needs non-empty graphs".into()));
    }
    let range = [g1, g2]
        .iter()
        .filter_map(|g| g.weight_range())
        .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)));
    let Some((lo, hi)) = range else {
        return Err(KpError::Undefined("kernel of two edgeless graphs".into()));
    };
    let bandwidth = cfg.bandwidth.unwrap_or_else(|| {
        let span = hi - lo;
        if span > 0.0 {
            span / 32.0
        } else {
            1.0
        }
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sample = |g: &ScoredGraph| -> Vec<u32> {
        let k = cfg.n_sampled_nodes.min(g.n_nodes);
        let mut v: Vec<u32> = index::sample(&mut rng, g.n_nodes, k)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        v.sort_unstable();
        v
    };

    let mut sims = Vec::with_capacity(cfg.n_repeats);
    let mut failures = 0;
    while sims.len() < cfg.n_repeats {
        let (s1, s2) = (sample(g1), sample(g2));
        let l1 = induced_path_lengths(g1, &s1, lo);
        let l2 = induced_path_lengths(g2, &s2, lo);
        if l1.is_empty() || l2.is_empty() {
            failures += 1;
            if failures >= cfg.n_repeats {
                return Err(KpError::Undefined(format!(
                    "no reachable node pairs in {failures} samples"
                )));
            }
            continue;
        }
        sims.push(cosine(&histogram(&l1, bandwidth), &histogram(&l2, bandwidth)));
    }
    Ok(sims.iter().sum::<f64>() / sims.len() as f64)
}

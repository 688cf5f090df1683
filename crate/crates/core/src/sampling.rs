//! Positive and negative score graphs with O(|E|) edges.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::kg_store::{KnowledgeGraph, Split, Triple};
use crate::kge_models::EmbeddingModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredEdge {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingStats {
    /// Candidate draws, including rejected ones.
    pub attempts: usize,
    /// Draws rejected because the triple is known.
    pub rejections: usize,
    /// Draws dropped because the triple was already sampled.
    pub duplicates: usize,
    /// Number of scoring-function evaluations.
    pub scored: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredGraph {
    pub n_nodes: usize,
    pub edges: Vec<ScoredEdge>,
    pub source_split: Option<Split>,
    pub polarity: Polarity,
    pub stats: SamplingStats,
}

impl ScoredGraph {
    /// Graph over `n_nodes` vertices from `(head, tail, weight)` edges.
    pub fn from_weighted_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (u32, u32, f64)>,
        polarity: Polarity,
    ) -> Self {
        Self {
            n_nodes,
            edges: edges
                .into_iter()
                .map(|(head, tail, weight)| ScoredEdge {
                    head,
                    relation: 0,
                    tail,
                    weight,
                })
                .collect(),
            source_split: None,
            polarity,
            stats: SamplingStats::default(),
        }
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.iter().map(|e| e.weight)
    }

    /// `(min, max)` edge weight, `None` for an edgeless graph.
    pub fn weight_range(&self) -> Option<(f64, f64)> {
        self.weights().fold(None, |acc, w| match acc {
            None => Some((w, w)),
            Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
        })
    }

    /// TSV dump: head, relation (or `NEG`), tail, weight.
    pub fn to_tsv(&self, kg: &KnowledgeGraph) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let rel = match self.polarity {
                Polarity::Positive => kg.relation_names[e.relation as usize].as_str(),
                Polarity::Negative => "NEG",
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                kg.entity_names[e.head as usize], rel, kg.entity_names[e.tail as usize], e.weight
            );
        }
        out
    }

    pub fn write_tsv(&self, kg: &KnowledgeGraph, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv(kg)).map_err(|e| KpError::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// Uniform over the full `|E| x |R| x |E|` grid.
    #[default]
    FullGrid,
    /// Replace the head or the tail of a uniformly drawn train triple.
    HeadTail,
}

/// Edges per entity used when no explicit count is given.
pub const DEFAULT_EDGES_PER_ENTITY: f64 = 1.0;

/// `ceil(c * |E|)`, at least one.
pub fn default_count(kg: &KnowledgeGraph, edges_per_entity: f64) -> usize {
    ((edges_per_entity * kg.n_entities() as f64).ceil() as usize).max(1)
}

fn check_model(kg: &KnowledgeGraph, model: &EmbeddingModel) -> Result<()> {
    if model.n_entities != kg.n_entities() || model.n_relations != kg.n_relations() {
        return Err(KpError::InvalidArgument(
            "model vocabulary does not match the knowledge graph".into(),
        ));
    }
    Ok(())
}

/// Uniform sample without replacement of `min(count, |split|)` triples.
pub fn build_positive_graph(
    kg: &KnowledgeGraph,
    split: Split,
    model: &EmbeddingModel,
    count: usize,
    seed: u64,
) -> Result<ScoredGraph> {
    check_model(kg, model)?;
    let triples = kg.split(split);
    if triples.is_empty() {
        return Err(KpError::Empty(format!("{split} split")));
    }
    if count == 0 {
        return Err(KpError::InvalidArgument("sample count must be >= 1".into()));
    }
    let take = count.min(triples.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, triples.len(), take).into_vec();
    picked.sort_unstable();
    let edges: Vec<ScoredEdge> = picked
        .into_iter()
        .map(|i| {
            let t = triples[i];
            ScoredEdge {
                head: t.head,
                relation: t.relation,
                tail: t.tail,
                weight: model.score(&t),
            }
        })
        .collect();
    Ok(ScoredGraph {
        n_nodes: kg.n_entities(),
        stats: SamplingStats {
            attempts: take,
            scored: edges.len(),
            ..Default::default()
        },
        edges,
        source_split: Some(split),
        polarity: Polarity::Positive,
    })
}

/// Draws `count` distinct unknown triples by rejection.
pub fn build_negative_graph(
    kg: &KnowledgeGraph,
    model: &EmbeddingModel,
    count: usize,
    seed: u64,
    mode: NegativeMode,
) -> Result<ScoredGraph> {
    check_model(kg, model)?;
    if count == 0 {
        return Err(KpError::InvalidArgument("sample count must be >= 1".into()));
    }
    let (ne, nr) = (kg.n_entities() as u32, kg.n_relations() as u32);
    if ne == 0 || nr == 0 {
        return Err(KpError::Empty("vocabulary".into()));
    }
    if mode == NegativeMode::HeadTail && kg.train.is_empty() {
        return Err(KpError::Empty("train split (head/tail corruption)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = count.saturating_mul(1000);
    let mut stats = SamplingStats::default();
    let mut seen: HashSet<Triple> = HashSet::with_capacity(count);
    let mut triples = Vec::with_capacity(count);

    while triples.len() < count {
        if stats.attempts >= max_attempts {
            return Err(KpError::SamplingSaturated {
                attempts: stats.attempts,
                accepted: triples.len(),
                requested: count,
            });
        }
        stats.attempts += 1;
        let cand = match mode {
            NegativeMode::FullGrid => Triple::new(
                rng.random_range(0..ne),
                rng.random_range(0..nr),
                rng.random_range(0..ne),
            ),
            NegativeMode::HeadTail => {
                let base = kg.train[rng.random_range(0..kg.train.len())];
                let e = rng.random_range(0..ne);
                if rng.random_bool(0.5) {
                    Triple::new(e, base.relation, base.tail)
                } else {
                    Triple::new(base.head, base.relation, e)
                }
            }
        };
        if kg.is_known(&cand) {
            stats.rejections += 1;
            continue;
        }
        if !seen.insert(cand) {
            stats.duplicates += 1;
            continue;
        }
        triples.push(cand);
    }

    let edges: Vec<ScoredEdge> = triples
        .into_iter()
        .map(|t| ScoredEdge {
            head: t.head,
            relation: t.relation,
            tail: t.tail,
            weight: model.score(&t),
        })
        .collect();
    stats.scored = edges.len();
    Ok(ScoredGraph {
        n_nodes: kg.n_entities(),
        edges,
        source_split: None,
        polarity: Polarity::Negative,
        stats,
    })
}

/// Positive graph from `split` plus a negative graph of the same edge count.
pub fn build_pair(
    kg: &KnowledgeGraph,
    split: Split,
    model: &EmbeddingModel,
    count: usize,
    seed: u64,
    mode: NegativeMode,
) -> Result<(ScoredGraph, ScoredGraph)> {
    let pos = build_positive_graph(kg, split, model, count, seed)?;
    let mut neg = build_negative_graph(
        kg,
        model,
        pos.edges.len(),
        seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
        mode,
    )?;
    neg.source_split = Some(split);
    Ok((pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kge_models::{init_embeddings, ModelKind};

    fn grid_kg() -> KnowledgeGraph {
        // 3 entities, 1 relation, 4 known cells of the 3x3 grid
        KnowledgeGraph::from_ids(
            3,
            1,
            vec![
                Triple::new(0, 0, 1),
                Triple::new(1, 0, 2),
                Triple::new(2, 0, 0),
            ],
            vec![],
            vec![Triple::new(0, 0, 0)],
        )
        .unwrap()
    }

    fn ten_triple_kg() -> KnowledgeGraph {
        let train = (0..10).map(|i| Triple::new(i, i % 2, (i + 1) % 12)).collect();
        KnowledgeGraph::from_ids(12, 2, train, vec![], vec![]).unwrap()
    }

    #[test]
    fn positive_exhaustion_and_subset() {
        let kg = ten_triple_kg();
        let m = init_embeddings(ModelKind::TransE, 12, 2, 4, 0).unwrap();
        let all = build_positive_graph(&kg, Split::Train, &m, 50, 1).unwrap();
        assert_eq!(all.edges.len(), 10);

        let g = build_positive_graph(&kg, Split::Train, &m, 4, 1).unwrap();
        assert_eq!(g.edges.len(), 4);
        let picked: HashSet<Triple> = g
            .edges
            .iter()
            .map(|e| Triple::new(e.head, e.relation, e.tail))
            .collect();
        assert_eq!(picked.len(), 4);
        assert!(picked.iter().all(|t| kg.train.contains(t)));
        for e in &g.edges {
            let t = Triple::new(e.head, e.relation, e.tail);
            assert_eq!(e.weight, m.score(&t));
        }
        assert_eq!(g, build_positive_graph(&kg, Split::Train, &m, 4, 1).unwrap());
    }

    #[test]
    fn positive_errors() {
        let kg = ten_triple_kg();
        let m = init_embeddings(ModelKind::TransE, 12, 2, 4, 0).unwrap();
        assert!(matches!(
            build_positive_graph(&kg, Split::Test, &m, 3, 0),
            Err(KpError::Empty(_))
        ));
        assert!(build_positive_graph(&kg, Split::Train, &m, 0, 0).is_err());
    }

    #[test]
    fn negatives_come_from_unknown_cells() {
        let kg = grid_kg();
        let m = init_embeddings(ModelKind::DistMult, 3, 1, 4, 0).unwrap();
        let mut unknown = HashSet::new();
        for h in 0..3 {
            for t in 0..3 {
                let c = Triple::new(h, 0, t);
                if !kg.contains(&c).unwrap() {
                    unknown.insert(c);
                }
            }
        }
        assert_eq!(unknown.len(), 5);
        for seed in 0..20 {
            let g = build_negative_graph(&kg, &m, 5, seed, NegativeMode::FullGrid).unwrap();
            let got: HashSet<Triple> = g
                .edges
                .iter()
                .map(|e| Triple::new(e.head, e.relation, e.tail))
                .collect();
            assert_eq!(got, unknown);
        }
        // only 5 unknown cells exist
        assert!(matches!(
            build_negative_graph(&kg, &m, 6, 0, NegativeMode::FullGrid),
            Err(KpError::SamplingSaturated { .. })
        ));
    }

    #[test]
    fn head_tail_mode_rejects_known() {
        let kg = ten_triple_kg();
        let m = init_embeddings(ModelKind::TransE, 12, 2, 4, 0).unwrap();
        let g = build_negative_graph(&kg, &m, 8, 3, NegativeMode::HeadTail).unwrap();
        for e in &g.edges {
            let t = Triple::new(e.head, e.relation, e.tail);
            assert!(!kg.contains(&t).unwrap());
            // shares head or tail with some train triple under the same relation
            assert!(kg
                .train
                .iter()
                .any(|p| p.relation == t.relation && (p.head == t.head || p.tail == t.tail)));
        }
    }

    #[test]
    fn pair_has_equal_cardinality_over_seeds() {
        let kg = ten_triple_kg();
        let m = init_embeddings(ModelKind::TransE, 12, 2, 4, 0).unwrap();
        for seed in 0..100 {
            let (p, n) = build_pair(&kg, Split::Train, &m, 7, seed, NegativeMode::FullGrid).unwrap();
            assert_eq!(p.edges.len(), n.edges.len());
            assert!(n.edges.iter().all(|e| {
                !kg.contains(&Triple::new(e.head, e.relation, e.tail)).unwrap()
            }));
            assert!(p.stats.scored + n.stats.scored <= 2 * 7);
        }
    }

    #[test]
    fn tsv_dump_marks_negatives() {
        let kg = grid_kg();
        let m = init_embeddings(ModelKind::TransE, 3, 1, 2, 0).unwrap();
        let g = build_negative_graph(&kg, &m, 2, 0, NegativeMode::FullGrid).unwrap();
        let tsv = g.to_tsv(&kg);
        assert_eq!(tsv.lines().count(), 2);
        assert!(tsv.lines().all(|l| l.split('\t').nth(1) == Some("NEG")));
    }
}

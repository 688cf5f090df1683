//! Rule-based synthetic knowledge graphs.
//!
//! Entities are scattered over clusters laid out on a chain. Each base
//! relation shifts a cluster by a fixed offset along the chain, and an entity
//! links to a few random members of the target cluster. Composed relations
//! follow two-hop paths of base relations, so the graph carries both local and
//! compositional regularities.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::kg_store::{KnowledgeGraph, Triple};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_entities: usize,
    pub n_clusters: usize,
    pub n_base_relations: usize,
    pub n_composed_relations: usize,
    /// Probability that an entity participates as head in a base relation.
    pub relation_density: f64,
    /// Tails drawn per (head, relation) pair.
    pub tails_per_head: usize,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_clusters: 20,
            n_base_relations: 6,
            n_composed_relations: 2,
            relation_density: 0.6,
            tails_per_head: 4,
            valid_fraction: 0.05,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KpError::InvalidArgument(m));
        if self.n_entities < 2 || self.n_clusters < 1 || self.n_clusters > self.n_entities {
            return bad(format!(
                "need 2 <= entities and 1 <= clusters <= entities, got {} / {}",
                self.n_entities, self.n_clusters
            ));
        }
        if self.n_base_relations < 1 {
            return bad("need at least one base relation".into());
        }
        if self.n_composed_relations > 0 && self.n_base_relations < 2 {
            return bad("composed relations need two base relations".into());
        }
        if !(0.0..=1.0).contains(&self.relation_density) || self.tails_per_head < 1 {
            return bad("relation_density must lie in [0, 1] and tails_per_head >= 1".into());
        }
        let held = self.valid_fraction + self.test_fraction;
        if self.valid_fraction < 0.0 || self.test_fraction < 0.0 || held >= 1.0 {
            return bad(format!("held-out fractions must be non-negative and sum below 1, got {held}"));
        }
        Ok(())
    }
}

/// Generates the graph and splits it into train / valid / test.
pub fn generate(cfg: &SynthConfig) -> Result<KnowledgeGraph> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_entities;
    let k = cfg.n_clusters;

    // every cluster gets at least one member
    let mut cluster_of: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    cluster_of.shuffle(&mut rng);
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (e, &c) in cluster_of.iter().enumerate() {
        members[c].push(e as u32);
    }

    // offsets stay below k so every relation has at least one source cluster
    let max_offset = (k / 2).max(1);
    let offsets: Vec<usize> = (0..cfg.n_base_relations)
        .map(|_| rng.random_range(0..max_offset) + usize::from(k > 1))
        .collect();

    let mut facts: BTreeSet<Triple> = BTreeSet::new();
    let mut out_edges: Vec<Vec<Vec<u32>>> = vec![vec![Vec::new(); n]; cfg.n_base_relations];
    for (r, &offset) in offsets.iter().enumerate() {
        for h in 0..n {
            let target = cluster_of[h] + offset;
            if target >= k || !rng.random_bool(cfg.relation_density) {
                continue;
            }
            let pool = &members[target];
            for _ in 0..cfg.tails_per_head {
                let t = pool[rng.random_range(0..pool.len())];
                if facts.insert(Triple::new(h as u32, r as u32, t)) {
                    out_edges[r][h].push(t);
                }
            }
        }
    }

    for c in 0..cfg.n_composed_relations {
        let rel = (cfg.n_base_relations + c) as u32;
        let a = rng.random_range(0..cfg.n_base_relations);
        let b = (a + 1 + rng.random_range(0..cfg.n_base_relations - 1)) % cfg.n_base_relations;
        for h in 0..n {
            // one composed fact per first hop keeps the relation comparable in size
            for &mid in &out_edges[a][h] {
                let next = &out_edges[b][mid as usize];
                if let Some(&t) = next.first() {
                    facts.insert(Triple::new(h as u32, rel, t));
                }
            }
        }
    }

    let mut all: Vec<Triple> = facts.into_iter().collect();
    all.shuffle(&mut rng);
    let n_test = (all.len() as f64 * cfg.test_fraction).round() as usize;
    let n_valid = (all.len() as f64 * cfg.valid_fraction).round() as usize;
    let test = all.split_off(all.len() - n_test);
    let valid = all.split_off(all.len() - n_valid);
    KnowledgeGraph::from_ids(
        n,
        cfg.n_base_relations + cfg.n_composed_relations,
        all,
        valid,
        test,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_graph_shape() {
        let kg = generate(&SynthConfig::default()).unwrap();
        assert_eq!(kg.n_entities(), 200);
        assert_eq!(kg.n_relations(), 8);
        assert!(kg.n_triples() > 1000, "{}", kg.n_triples());
        assert!(!kg.test.is_empty() && !kg.valid.is_empty());
        let test_share = kg.test.len() as f64 / kg.n_triples() as f64;
        assert!((test_share - 0.1).abs() < 0.01);
    }

    #[test]
    fn splits_are_disjoint_and_deterministic() {
        let cfg = SynthConfig {
            seed: 5,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let train: BTreeSet<_> = a.train.iter().collect();
        assert!(a.test.iter().all(|t| !train.contains(t)));
        assert!(a.valid.iter().all(|t| !train.contains(t)));
    }

    #[test]
    fn rejects_bad_configs() {
        let base = SynthConfig::default();
        assert!(generate(&SynthConfig { n_clusters: 0, ..base.clone() }).is_err());
        assert!(generate(&SynthConfig { test_fraction: 0.99, ..base.clone() }).is_err());
        assert!(generate(&SynthConfig { n_base_relations: 1, ..base }).is_err());
    }
}

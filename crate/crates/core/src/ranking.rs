//! Link-prediction ranking: the quadratic-cost reference evaluation.
//!
//! Ranks use average tie handling: `1 + #higher + #tied / 2`, where ties
//! exclude the true entity itself.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::kg_store::{KnowledgeGraph, Triple};
use crate::kge_models::{score_rows, EmbeddingModel};

/// Hits@N cut-offs reported by default.
pub const HITS_AT: [u32; 3] = [1, 3, 10];

static RANK_CALLS: AtomicU64 = AtomicU64::new(0);

/// Total number of [`rank_triple`] invocations in this process.
pub fn rank_triple_calls() -> u64 {
    RANK_CALLS.load(Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    Raw,
    #[default]
    Filtered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideSelection {
    Head,
    Tail,
    #[default]
    Both,
}

impl SideSelection {
    fn sides(self) -> &'static [Side] {
        match self {
            SideSelection::Head => &[Side::Head],
            SideSelection::Tail => &[Side::Tail],
            SideSelection::Both => &[Side::Head, Side::Tail],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mr: f64,
    pub mrr: f64,
    /// Keyed by N.
    pub hits: BTreeMap<u32, f64>,
    pub mode: RankingMode,
    pub side: SideSelection,
    pub n_evaluated: usize,
    pub wall_time_s: f64,
    /// Scoring-function evaluations spent.
    pub score_calls: u64,
}

impl RankingReport {
    pub fn hits_at(&self, n: u32) -> Option<f64> {
        self.hits.get(&n).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratConfig {
    pub beta_e: f64,
    pub beta_r: f64,
}

impl Default for StratConfig {
    fn default() -> Self {
        Self {
            beta_e: 1.0,
            beta_r: 0.0,
        }
    }
}

impl StratConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta_e", self.beta_e), ("beta_r", self.beta_r)] {
            if !(b > -1.0 && b <= 1.0) {
                return Err(KpError::InvalidArgument(format!("{name} must lie in (-1, 1], got {b}")));
            }
        }
        Ok(())
    }
}

/// Rank of the true entity of `t` when `side` is replaced by every entity.
pub fn rank_triple(
    m: &EmbeddingModel,
    kg: &KnowledgeGraph,
    t: &Triple,
    side: Side,
    mode: RankingMode,
) -> Result<f64> {
    m.check_triple(t)?;
    kg.check_triple(t)?;
    Ok(rank_unchecked(m, kg, t, side, mode))
}

fn rank_unchecked(
    m: &EmbeddingModel,
    kg: &KnowledgeGraph,
    t: &Triple,
    side: Side,
    mode: RankingMode,
) -> f64 {
    RANK_CALLS.fetch_add(1, Ordering::Relaxed);
    let r = m.relation_row(t.relation);
    let (truth, fixed) = match side {
        Side::Head => (t.head, m.entity_row(t.tail)),
        Side::Tail => (t.tail, m.entity_row(t.head)),
    };
    let score_with = |e: u32| match side {
        Side::Head => score_rows(m.kind, m.entity_row(e), r, fixed),
        Side::Tail => score_rows(m.kind, fixed, r, m.entity_row(e)),
    };
    let target = score_with(truth);
    let (mut higher, mut tied) = (0u64, 0u64);
    for e in 0..m.n_entities as u32 {
        if e == truth {
            continue;
        }
        let s = score_with(e);
        if s < target {
            continue;
        }
        if mode == RankingMode::Filtered {
            let cand = match side {
                Side::Head => Triple::new(e, t.relation, t.tail),
                Side::Tail => Triple::new(t.head, t.relation, e),
            };
            if kg.is_known(&cand) {
                continue;
            }
        }
        if s > target {
            higher += 1;
        } else {
            tied += 1;
        }
    }
    1.0 + higher as f64 + 0.5 * tied as f64
}

/// MR / MRR / Hits@N as weighted means; weights must sum to 1.
pub fn metrics_from_weighted_ranks(ranks: &[(f64, f64)]) -> (f64, f64, BTreeMap<u32, f64>) {
    let mut mr = 0.0;
    let mut mrr = 0.0;
    let mut hits: BTreeMap<u32, f64> = HITS_AT.iter().map(|&n| (n, 0.0)).collect();
    for &(rank, w) in ranks {
        mr += w * rank;
        mrr += w / rank;
        for (&n, h) in hits.iter_mut() {
            if rank <= n as f64 {
                *h += w;
            }
        }
    }
    // weights summing to 1 up to rounding can push means just past their range
    for h in hits.values_mut() {
        *h = h.clamp(0.0, 1.0);
    }
    (mr.max(1.0), mrr.clamp(0.0, 1.0), hits)
}

fn evaluate(
    m: &EmbeddingModel,
    kg: &KnowledgeGraph,
    triples: &[Triple],
    mode: RankingMode,
    side: SideSelection,
    weights: &[f64],
) -> Result<RankingReport> {
    if triples.is_empty() {
        return Err(KpError::Empty("no triples to rank".into()));
    }
    for t in triples {
        m.check_triple(t)?;
        kg.check_triple(t)?;
    }
    let start = Instant::now();
    let sides = side.sides();
    let per_triple = |t: &Triple| -> Vec<f64> {
        sides
            .iter()
            .map(|&s| rank_unchecked(m, kg, t, s, mode))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let ranks: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        triples.par_iter().map(per_triple).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let ranks: Vec<Vec<f64>> = triples.iter().map(per_triple).collect();

    let share = 1.0 / sides.len() as f64;
    let weighted: Vec<(f64, f64)> = ranks
        .iter()
        .zip(weights)
        .flat_map(|(rs, &w)| rs.iter().map(move |&r| (r, w * share)))
        .collect();
    let (mr, mrr, hits) = metrics_from_weighted_ranks(&weighted);
    Ok(RankingReport {
        mr,
        mrr,
        hits,
        mode,
        side,
        n_evaluated: triples.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        score_calls: (triples.len() * sides.len() * m.n_entities) as u64,
    })
}

/// Head and tail ranking over `triples`, both sides weighted equally.
pub fn ranking_metrics(
    m: &EmbeddingModel,
    kg: &KnowledgeGraph,
    triples: &[Triple],
    mode: RankingMode,
) -> Result<RankingReport> {
    ranking_metrics_with(m, kg, triples, mode, SideSelection::Both)
}

pub fn ranking_metrics_with(
    m: &EmbeddingModel,
    kg: &KnowledgeGraph,
    triples: &[Triple],
    mode: RankingMode,
    side: SideSelection,
) -> Result<RankingReport> {
    let w = 1.0 / triples.len().max(1) as f64;
    evaluate(m, kg, triples, mode, side, &vec![w; triples.len()])
}

/// Popularity weights `(f(h) f(t))^(-beta_e / 2) * f(r)^(-beta_r)` with
/// `f` = train frequency + 1, normalized to sum to one.
pub fn stratified_weights(kg: &KnowledgeGraph, triples: &[Triple], cfg: &StratConfig) -> Vec<f64> {
    let (ent, rel) = kg.train_frequencies();
    let f = |c: u64| (c + 1) as f64;
    let raw: Vec<f64> = triples
        .iter()
        .map(|t| {
            let fe = f(ent[t.head as usize]) * f(ent[t.tail as usize]);
            fe.powf(-cfg.beta_e / 2.0) * f(rel[t.relation as usize]).powf(-cfg.beta_r)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn stratified_metrics(
    m: &EmbeddingModel,
    kg: &KnowledgeGraph,
    triples: &[Triple],
    mode: RankingMode,
    cfg: &StratConfig,
) -> Result<RankingReport> {
    cfg.validate()?;
    if triples.is_empty() {
        return Err(KpError::Empty("no triples to rank".into()));
    }
    for t in triples {
        kg.check_triple(t)?;
    }
    let weights = stratified_weights(kg, triples, cfg);
    evaluate(m, kg, triples, mode, SideSelection::Both, &weights)
}

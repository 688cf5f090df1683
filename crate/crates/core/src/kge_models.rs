//! Embedding models, scoring functions with analytic gradients, margin-loss
//! training and checkpoint files.
//!
//! Every model is oriented so that a higher score means a more plausible
//! triple: distance-based models return negated distances.
//!
//! ComplEx and RotatE store complex vectors as interleaved `(re, im)` pairs, so
//! their embedding dimension must be even. RotatE relations are stored as
//! `dim / 2` phases, which keeps every rotation exactly unit-modulus.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::kg_store::{KnowledgeGraph, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
    RotatE,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::TransE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::RotatE,
    ];

    fn code(self) -> u32 {
        match self {
            ModelKind::TransE => 0,
            ModelKind::DistMult => 1,
            ModelKind::ComplEx => 2,
            ModelKind::RotatE => 3,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    fn is_complex(self) -> bool {
        matches!(self, ModelKind::ComplEx | ModelKind::RotatE)
    }

    /// Width of one relation row for an entity dimension `dim`.
    pub fn relation_width(self, dim: usize) -> usize {
        match self {
            ModelKind::RotatE => dim / 2,
            _ => dim,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::RotatE => "rotate",
        })
    }
}

impl FromStr for ModelKind {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            "rotate" => Ok(ModelKind::RotatE),
            other => Err(KpError::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub n_entities: usize,
    pub n_relations: usize,
    /// Row-major `n_entities x dim`.
    pub entity: Vec<f64>,
    /// Row-major `n_relations x kind.relation_width(dim)`.
    pub relation: Vec<f64>,
}

/// Uniform initialization in `[-6/sqrt(d), 6/sqrt(d)]`; RotatE phases in `[-pi, pi]`.
pub fn init_embeddings(
    kind: ModelKind,
    n_entities: usize,
    n_relations: usize,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingModel> {
    if dim == 0 {
        return Err(KpError::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if kind.is_complex() && !dim.is_multiple_of(2) {
        return Err(KpError::InvalidArgument(format!(
            "{kind} needs an even embedding dimension, got {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 6.0 / (dim as f64).sqrt();
    let entity = (0..n_entities * dim)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    let rel_len = n_relations * kind.relation_width(dim);
    let relation = match kind {
        ModelKind::RotatE => (0..rel_len).map(|_| rng.random_range(-PI..=PI)).collect(),
        _ => (0..rel_len)
            .map(|_| rng.random_range(-bound..=bound))
            .collect(),
    };
    Ok(EmbeddingModel {
        kind,
        dim,
        n_entities,
        n_relations,
        entity,
        relation,
    })
}

impl EmbeddingModel {
    pub fn relation_width(&self) -> usize {
        self.kind.relation_width(self.dim)
    }

    pub fn entity_row(&self, e: u32) -> &[f64] {
        let d = self.dim;
        &self.entity[e as usize * d..(e as usize + 1) * d]
    }

    pub fn relation_row(&self, r: u32) -> &[f64] {
        let w = self.relation_width();
        &self.relation[r as usize * w..(r as usize + 1) * w]
    }

    pub fn entity_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entity.chunks_exact(self.dim)
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        if t.head as usize >= self.n_entities
            || t.tail as usize >= self.n_entities
            || t.relation as usize >= self.n_relations
        {
            return Err(KpError::OutOfRange(format!(
                "triple {t} outside model vocabulary ({} entities, {} relations)",
                self.n_entities, self.n_relations
            )));
        }
        Ok(())
    }

    pub fn score_triple(&self, t: &Triple) -> Result<f64> {
        self.check_triple(t)?;
        Ok(self.score(t))
    }

    /// Score without bounds checks beyond slice indexing.
    #[inline]
    pub fn score(&self, t: &Triple) -> f64 {
        score_rows(
            self.kind,
            self.entity_row(t.head),
            self.relation_row(t.relation),
            self.entity_row(t.tail),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.entity.iter().chain(&self.relation).all(|v| v.is_finite())
    }
}

/// Scores one triple from its raw rows.
pub fn score_rows(kind: ModelKind, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    match kind {
        ModelKind::TransE => {
            let sq: f64 = h
                .iter()
                .zip(r)
                .zip(t)
                .map(|((h, r), t)| (h + r - t).powi(2))
                .sum();
            -sq.sqrt()
        }
        ModelKind::DistMult => h.iter().zip(r).zip(t).map(|((h, r), t)| h * r * t).sum(),
        ModelKind::ComplEx => h
            .chunks_exact(2)
            .zip(r.chunks_exact(2))
            .zip(t.chunks_exact(2))
            .map(|((h, r), t)| {
                let re = h[0] * r[0] - h[1] * r[1];
                let im = h[0] * r[1] + h[1] * r[0];
                re * t[0] + im * t[1]
            })
            .sum(),
        ModelKind::RotatE => {
            let sq: f64 = h
                .chunks_exact(2)
                .zip(r)
                .zip(t.chunks_exact(2))
                .map(|((h, &phase), t)| {
                    let (s, c) = phase.sin_cos();
                    let ur = h[0] * c - h[1] * s - t[0];
                    let ui = h[0] * s + h[1] * c - t[1];
                    ur * ur + ui * ui
                })
                .sum();
            -sq.sqrt()
        }
    }
}

/// Score plus its gradient with respect to the head, relation and tail rows.
/// The gradient slices are overwritten.
pub fn score_grad(
    kind: ModelKind,
    h: &[f64],
    r: &[f64],
    t: &[f64],
    gh: &mut [f64],
    gr: &mut [f64],
    gt: &mut [f64],
) -> f64 {
    match kind {
        ModelKind::TransE => {
            let mut sq = 0.0;
            for i in 0..h.len() {
                let u = h[i] + r[i] - t[i];
                gh[i] = u;
                sq += u * u;
            }
            let norm = sq.sqrt();
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            for i in 0..h.len() {
                let g = -gh[i] * inv;
                gh[i] = g;
                gr[i] = g;
                gt[i] = -g;
            }
            -norm
        }
        ModelKind::DistMult => {
            let mut s = 0.0;
            for i in 0..h.len() {
                s += h[i] * r[i] * t[i];
                gh[i] = r[i] * t[i];
                gr[i] = h[i] * t[i];
                gt[i] = h[i] * r[i];
            }
            s
        }
        ModelKind::ComplEx => {
            let mut s = 0.0;
            for k in 0..h.len() / 2 {
                let (hr, hi) = (h[2 * k], h[2 * k + 1]);
                let (rr, ri) = (r[2 * k], r[2 * k + 1]);
                let (tr, ti) = (t[2 * k], t[2 * k + 1]);
                let re = hr * rr - hi * ri;
                let im = hr * ri + hi * rr;
                s += re * tr + im * ti;
                gh[2 * k] = rr * tr + ri * ti;
                gh[2 * k + 1] = -ri * tr + rr * ti;
                gr[2 * k] = hr * tr + hi * ti;
                gr[2 * k + 1] = -hi * tr + hr * ti;
                gt[2 * k] = re;
                gt[2 * k + 1] = im;
            }
            s
        }
        ModelKind::RotatE => {
            let mut sq = 0.0;
            // stash residuals in gt, rotation partials in gh/gr
            for k in 0..r.len() {
                let (a, b) = (h[2 * k], h[2 * k + 1]);
                let (s, c) = r[k].sin_cos();
                let ur = a * c - b * s - t[2 * k];
                let ui = a * s + b * c - t[2 * k + 1];
                sq += ur * ur + ui * ui;
                gt[2 * k] = ur;
                gt[2 * k + 1] = ui;
                gh[2 * k] = ur * c + ui * s;
                gh[2 * k + 1] = -ur * s + ui * c;
                gr[k] = ur * (-a * s - b * c) + ui * (a * c - b * s);
            }
            let norm = sq.sqrt();
            let inv = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            for v in gh.iter_mut().chain(gr.iter_mut()) {
                *v *= -inv;
            }
            for v in gt.iter_mut() {
                *v *= inv;
            }
            -norm
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub margin: f64,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    /// L2 penalty applied to the rows touched by each update.
    #[serde(default)]
    pub weight_decay: f64,
    /// Entity rows are projected back into this L2 ball after each batch.
    #[serde(default)]
    pub entity_max_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 0.05,
            margin: 1.0,
            negatives_per_positive: 1,
            batch_size: 64,
            seed: 0,
            eval_every: 5,
            weight_decay: 0.0,
            entity_max_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(KpError::InvalidArgument(msg.to_owned()));
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.eval_every < 1 {
            return bad("eval_every must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive and finite");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if self.negatives_per_positive < 1 {
            return bad("negatives_per_positive must be >= 1");
        }
        if !(self.margin.is_finite() && self.weight_decay >= 0.0) {
            return bad("margin must be finite and weight_decay non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub epoch: usize,
    pub mean_loss: f64,
    pub model: EmbeddingModel,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub checkpoints: Vec<Checkpoint>,
    /// Mean margin loss per epoch, starting at epoch 1.
    pub epoch_losses: Vec<f64>,
}

/// Mean margin loss of `model` over the train split with one fixed set of
/// corruptions drawn from `seed`.
pub fn margin_loss(model: &EmbeddingModel, kg: &KnowledgeGraph, margin: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = kg.n_entities() as u32;
    let total: f64 = kg
        .train
        .iter()
        .map(|pos| {
            let neg = corrupt(pos, n, &mut rng);
            (margin - model.score(pos) + model.score(&neg)).max(0.0)
        })
        .sum();
    total / kg.train.len().max(1) as f64
}

fn corrupt(pos: &Triple, n_entities: u32, rng: &mut ChaCha8Rng) -> Triple {
    let e = rng.random_range(0..n_entities);
    if rng.random_bool(0.5) {
        Triple::new(e, pos.relation, pos.tail)
    } else {
        Triple::new(pos.head, pos.relation, e)
    }
}

/// Trains with the pairwise margin loss `max(0, margin - s(pos) + s(neg))` and
/// plain SGD. `sink` sees every checkpoint as it is emitted.
pub fn train<F>(
    mut model: EmbeddingModel,
    kg: &KnowledgeGraph,
    cfg: &TrainConfig,
    mut sink: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&Checkpoint) -> Result<()>,
{
    cfg.validate()?;
    if kg.train.is_empty() {
        return Err(KpError::Empty("train split".into()));
    }
    if model.n_entities != kg.n_entities() || model.n_relations != kg.n_relations() {
        return Err(KpError::InvalidArgument(format!(
            "model vocabulary {}x{} does not match graph {}x{}",
            model.n_entities,
            model.n_relations,
            kg.n_entities(),
            kg.n_relations()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_ent = kg.n_entities() as u32;
    let d = model.dim;
    let w = model.relation_width();
    let mut order: Vec<usize> = (0..kg.train.len()).collect();
    let mut checkpoints = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    let (mut gh, mut gr, mut gt) = (vec![0.0; d], vec![0.0; w], vec![0.0; d]);
    let mut ent_grad: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut rel_grad: BTreeMap<u32, Vec<f64>> = BTreeMap::new();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_pairs = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            ent_grad.clear();
            rel_grad.clear();
            for &idx in batch {
                let pos = kg.train[idx];
                for _ in 0..cfg.negatives_per_positive {
                    let neg = corrupt(&pos, n_ent, &mut rng);
                    let s_pos = model.score(&pos);
                    let s_neg = model.score(&neg);
                    let loss = cfg.margin - s_pos + s_neg;
                    n_pairs += 1;
                    if loss <= 0.0 {
                        continue;
                    }
                    loss_sum += loss;
                    for (triple, sign) in [(pos, -1.0), (neg, 1.0)] {
                        score_grad(
                            model.kind,
                            model.entity_row(triple.head),
                            model.relation_row(triple.relation),
                            model.entity_row(triple.tail),
                            &mut gh,
                            &mut gr,
                            &mut gt,
                        );
                        accumulate(&mut ent_grad, triple.head, &gh, sign);
                        accumulate(&mut ent_grad, triple.tail, &gt, sign);
                        accumulate(&mut rel_grad, triple.relation, &gr, sign);
                    }
                }
            }
            apply(&mut model.entity, d, &ent_grad, cfg.lr, cfg.weight_decay);
            apply(&mut model.relation, w, &rel_grad, cfg.lr, cfg.weight_decay);
            if model.kind == ModelKind::RotatE {
                for &r in rel_grad.keys() {
                    for phase in &mut model.relation[r as usize * w..(r as usize + 1) * w] {
                        *phase = wrap_phase(*phase);
                    }
                }
            }
            if let Some(max_norm) = cfg.entity_max_norm {
                for &e in ent_grad.keys() {
                    let row = &mut model.entity[e as usize * d..(e as usize + 1) * d];
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > max_norm {
                        let scale = max_norm / norm;
                        row.iter_mut().for_each(|v| *v *= scale);
                    }
                }
            }
        }

        let mean_loss = loss_sum / n_pairs.max(1) as f64;
        if !mean_loss.is_finite() || !model.is_finite() {
            return Err(KpError::NonFiniteLoss {
                epoch,
                loss: mean_loss,
            });
        }
        epoch_losses.push(mean_loss);

        if epoch % cfg.eval_every == 0 {
            let cp = Checkpoint {
                epoch,
                mean_loss,
                model: model.clone(),
            };
            sink(&cp)?;
            checkpoints.push(cp);
        }
    }

    Ok(TrainOutcome {
        model,
        checkpoints,
        epoch_losses,
    })
}

fn accumulate(acc: &mut BTreeMap<u32, Vec<f64>>, row: u32, grad: &[f64], sign: f64) {
    let slot = acc.entry(row).or_insert_with(|| vec![0.0; grad.len()]);
    for (s, g) in slot.iter_mut().zip(grad) {
        *s += sign * g;
    }
}

fn apply(params: &mut [f64], width: usize, grads: &BTreeMap<u32, Vec<f64>>, lr: f64, decay: f64) {
    for (&row, grad) in grads {
        let slice = &mut params[row as usize * width..(row as usize + 1) * width];
        for (p, g) in slice.iter_mut().zip(grad) {
            *p -= lr * (g + decay * *p);
        }
    }
}

fn wrap_phase(phase: f64) -> f64 {
    if (-PI..=PI).contains(&phase) {
        return phase;
    }
    let wrapped = (phase + PI).rem_euclid(2.0 * PI) - PI;
    wrapped.clamp(-PI, PI)
}

const MAGIC: &[u8; 4] = b"KPE1";
const HEADER_LEN: usize = 4 + 4 + 8 * 3;

/// Binary checkpoint: `KPE1`, kind (u32), |E|, |R|, d (u64), then row-major
/// little-endian f64 entity and relation matrices.
pub fn encode_checkpoint(model: &EmbeddingModel) -> Vec<u8> {
    let mut out =
        Vec::with_capacity(HEADER_LEN + 8 * (model.entity.len() + model.relation.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&model.kind.code().to_le_bytes());
    for v in [model.n_entities, model.n_relations, model.dim] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for v in model.entity.iter().chain(&model.relation) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<EmbeddingModel> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(KpError::Format("missing KPE1 header".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap()) as usize;
    let kind = ModelKind::from_code(u32_at(4))
        .ok_or_else(|| KpError::Format(format!("unknown model code {}", u32_at(4))))?;
    let (n_entities, n_relations, dim) = (u64_at(8), u64_at(16), u64_at(24));
    let n_ent_vals = n_entities * dim;
    let n_rel_vals = n_relations * kind.relation_width(dim);
    let expected = HEADER_LEN + 8 * (n_ent_vals + n_rel_vals);
    if bytes.len() != expected {
        return Err(KpError::Format(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let entity = values.by_ref().take(n_ent_vals).collect();
    let relation = values.collect();
    Ok(EmbeddingModel {
        kind,
        dim,
        n_entities,
        n_relations,
        entity,
        relation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub epoch: usize,
    pub mean_loss: f64,
    pub config: TrainConfig,
}

/// Writes `<stem>.bin` plus a `<stem>.json` sidecar.
pub fn save_checkpoint(dir: &Path, stem: &str, cp: &Checkpoint, cfg: &TrainConfig) -> Result<()> {
    let bin = dir.join(format!("{stem}.bin"));
    fs::write(&bin, encode_checkpoint(&cp.model)).map_err(|e| KpError::io(&bin, e))?;
    let meta = CheckpointMeta {
        kind: cp.model.kind,
        epoch: cp.epoch,
        mean_loss: cp.mean_loss,
        config: cfg.clone(),
    };
    let json = dir.join(format!("{stem}.json"));
    fs::write(&json, serde_json::to_vec_pretty(&meta)?).map_err(|e| KpError::io(&json, e))
}

pub fn load_checkpoint(path: &Path) -> Result<EmbeddingModel> {
    let bytes = fs::read(path).map_err(|e| KpError::io(path, e))?;
    decode_checkpoint(&bytes)
}

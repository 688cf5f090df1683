//! Browser demo: knowledge persistence on toy score graphs whose positive
//! and negative edge weights are drawn from two Gaussians.
//!
//! Every export returns a JSON string; errors surface as JS exceptions.

use kp_core::persistence::Direction;
use kp_core::sampling::Polarity;
use kp_core::theory::{gaussian_samples, gaussian_w2, lemma1_sweep, perm, stability_check, GaussianSummary};
use kp_core::transport::kp_details;
use kp_core::{KpError, ScoredGraph, SwConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Clone, Copy, Debug)]
pub struct ToyParams {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub gap: f64,
    pub sd_pos: f64,
    pub sd_neg: f64,
    pub seed: u64,
}

/// Random positive and negative graphs on the same vertex set.
pub fn toy_graphs(p: &ToyParams) -> Result<(ScoredGraph, ScoredGraph), KpError> {
    if p.n_nodes < 2 || p.n_edges == 0 {
        return Err(KpError::InvalidArgument("need at least 2 nodes and 1 edge".into()));
    }
    let pos = GaussianSummary::new(p.gap, p.sd_pos * p.sd_pos)?;
    let neg = GaussianSummary::new(0.0, p.sd_neg * p.sd_neg)?;
    let (wp, wn) = gaussian_samples(&pos, &neg, p.n_edges, p.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed);
    let n = p.n_nodes as u32;
    let mut edges = |weights: Vec<f64>| -> Vec<(u32, u32, f64)> {
        weights
            .into_iter()
            .map(|w| (rng.random_range(0..n), rng.random_range(0..n), w))
            .collect()
    };
    let e_pos = edges(wp);
    let e_neg = edges(wn);
    Ok((
        ScoredGraph::from_weighted_edges(p.n_nodes, e_pos, Polarity::Positive),
        ScoredGraph::from_weighted_edges(p.n_nodes, e_neg, Polarity::Negative),
    ))
}

#[derive(Serialize)]
pub struct DiagramView {
    pub frame: [f64; 2],
    /// `[birth, death, superlevel]` rows.
    pub positive: Vec<[f64; 3]>,
    pub negative: Vec<[f64; 3]>,
    pub kp: f64,
    pub perm: f64,
    pub w2: f64,
}

pub fn diagram_view(p: &ToyParams) -> Result<DiagramView, KpError> {
    let (gp, gn) = toy_graphs(p)?;
    let d = kp_details(&gp, &gn, &SwConfig::default())?;
    let rows = |pd: &kp_core::PersistenceDiagram| {
        pd.points
            .iter()
            .map(|q| [q.birth, q.death, f64::from(u8::from(q.direction == Direction::Superlevel))])
            .collect()
    };
    let pos = GaussianSummary::new(p.gap, p.sd_pos * p.sd_pos)?;
    let neg = GaussianSummary::new(0.0, p.sd_neg * p.sd_neg)?;
    Ok(DiagramView {
        frame: [d.frame.baseline, d.frame.cap],
        positive: rows(&d.positive),
        negative: rows(&d.negative),
        kp: d.kp,
        perm: perm(&pos, &neg)?,
        w2: gaussian_w2(&pos, &neg),
    })
}

#[derive(Serialize)]
pub struct SweepPoint {
    pub gap: f64,
    pub kp: f64,
    pub perm: f64,
    pub w2: f64,
}

/// Empirical KP next to the Gaussian PERM and W2 as the mean gap grows.
pub fn gap_sweep(p: &ToyParams, max_gap: f64, steps: usize) -> Result<Vec<SweepPoint>, KpError> {
    if steps < 2 || !(max_gap > 0.0) {
        return Err(KpError::InvalidArgument("need steps >= 2 and a positive max gap".into()));
    }
    let gaps: Vec<f64> = (0..steps).map(|i| max_gap * i as f64 / (steps - 1) as f64).collect();
    let theory = lemma1_sweep(&gaps, p.sd_pos, p.sd_neg)?;
    theory
        .into_iter()
        .map(|row| {
            let (gp, gn) = toy_graphs(&ToyParams { gap: row.gap, ..*p })?;
            let kp = kp_details(&gp, &gn, &SwConfig::default())?.kp;
            Ok(SweepPoint {
                gap: row.gap,
                kp,
                perm: row.perm,
                w2: row.w2,
            })
        })
        .collect()
}

fn js<T: Serialize>(r: Result<T, KpError>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Both diagrams with KP, PERM and Gaussian W2 for one configuration.
#[wasm_bindgen]
pub fn diagrams(n_nodes: usize, n_edges: usize, gap: f64, sd_pos: f64, sd_neg: f64, seed: u64) -> Result<String, JsError> {
    js(diagram_view(&ToyParams {
        n_nodes,
        n_edges,
        gap,
        sd_pos,
        sd_neg,
        seed,
    }))
}

/// KP, PERM and W2 over `steps` gaps from 0 to `max_gap`.
#[wasm_bindgen]
pub fn sweep(
    n_nodes: usize,
    n_edges: usize,
    sd_pos: f64,
    sd_neg: f64,
    max_gap: f64,
    steps: usize,
    seed: u64,
) -> Result<String, JsError> {
    let p = ToyParams {
        n_nodes,
        n_edges,
        gap: 0.0,
        sd_pos,
        sd_neg,
        seed,
    };
    js(gap_sweep(&p, max_gap, steps))
}

/// Noise trials on Gaussian scores: relative KP change against the bound.
#[wasm_bindgen]
pub fn stability(gap: f64, sd_pos: f64, sd_neg: f64, n: usize, noise: f64, trials: usize, seed: u64) -> Result<String, JsError> {
    js((|| {
        let pos = GaussianSummary::new(gap, sd_pos * sd_pos)?;
        let neg = GaussianSummary::new(0.0, sd_neg * sd_neg)?;
        let (a, b) = gaussian_samples(&pos, &neg, n, seed);
        stability_check(&a, &b, noise, trials, seed)
    })())
}

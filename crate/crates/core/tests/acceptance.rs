//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; the process fails if any criterion does.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use kp_core::harness::{
    correlate, early_stop_select, evaluate_model, kp_stage, robustness_sweep, run_experiment_on, ExperimentConfig,
    KpStageConfig, Metric, StageSeeds,
};
use kp_core::kg_store::{KnowledgeGraph, Split, Triple};
use kp_core::kge_models::{init_embeddings, score_grad, score_rows, train, EmbeddingModel, ModelKind, TrainConfig};
use kp_core::persistence::{graph_pd, Direction, Frame, PersistenceDiagram, PersistencePair};
use kp_core::ranking::{rank_triple, ranking_metrics, RankingMode, Side};
use kp_core::sampling::{default_count, NegativeMode, Polarity, ScoredGraph};
use kp_core::stats::{average_ranks, kendall, spearman, PairedSeries};
use kp_core::synth::{generate, SynthConfig};
use kp_core::theory::{
    lemma1_sweep, perm_closed_form, perm_quadrature, stability_check, GaussianSummary,
};
use kp_core::transport::{exact_wasserstein, matching_cost, optimal_matching, sliced_wasserstein, SwConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- 1

fn components(n: usize, edges: &[(u32, u32)]) -> usize {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a as usize].push(b as usize);
        adj[b as usize].push(a as usize);
    }
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

/// Diagram points from component counts at every distinct threshold.
fn brute_force_pd(n: usize, edges: &[(u32, u32, f64)], frame: Frame) -> Vec<(Direction, f64, f64, bool)> {
    let mut levels: Vec<f64> = edges.iter().map(|e| e.2).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut out = Vec::new();

    let mut prev = n;
    for &a in &levels {
        let active: Vec<(u32, u32)> = edges.iter().filter(|e| e.2 <= a).map(|e| (e.0, e.1)).collect();
        let c = components(n, &active);
        out.extend((0..prev - c).map(|_| (Direction::Sublevel, frame.baseline, a, false)));
        prev = c;
    }
    out.extend((0..prev).map(|_| (Direction::Sublevel, frame.baseline, frame.cap, true)));

    let mut prev = n;
    for &a in levels.iter().rev() {
        let active: Vec<(u32, u32)> = edges.iter().filter(|e| e.2 >= a).map(|e| (e.0, e.1)).collect();
        let c = components(n, &active);
        out.extend((0..prev - c).map(|_| (Direction::Superlevel, a, frame.cap, false)));
        prev = c;
    }
    out.extend((0..prev).map(|_| (Direction::Superlevel, frame.baseline, frame.cap, true)));
    out
}

fn sorted_points(mut v: Vec<(Direction, f64, f64, bool)>) -> Vec<(Direction, f64, f64, bool)> {
    v.sort_by(|a, b| {
        (a.0 as u8, a.3)
            .cmp(&(b.0 as u8, b.3))
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
    });
    v
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = r.random_range(1..=30usize);
        let m = r.random_range(0..=2 * n);
        // coarse weights force ties; self-loops and multi-edges are allowed
        let edges: Vec<(u32, u32, f64)> = (0..m)
            .map(|_| {
                (
                    r.random_range(0..n as u32),
                    r.random_range(0..n as u32),
                    f64::from(r.random_range(-8i32..=8)) * 0.25,
                )
            })
            .collect();
        let g = ScoredGraph::from_weighted_edges(n, edges.iter().copied(), Polarity::Positive);
        let frame = Frame::spanning([&g]);
        let pd = graph_pd(&g, None).expect("valid graph");
        let got = sorted_points(pd.points.iter().map(|p| (p.direction, p.birth, p.death, p.essential)).collect());
        let want = sorted_points(brute_force_pd(n, &edges, frame));
        if got != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/200 graphs differ from the threshold sweep"))
}

// ---------------------------------------------------------------- 2

fn random_pd(r: &mut ChaCha8Rng, n: usize, frame: Frame) -> PersistenceDiagram {
    let span = frame.cap - frame.baseline;
    PersistenceDiagram {
        points: (0..n)
            .map(|_| {
                let a = frame.baseline + span * r.random::<f64>();
                let b = frame.baseline + span * r.random::<f64>();
                PersistencePair {
                    birth: a.min(b),
                    death: a.max(b),
                    direction: Direction::Sublevel,
                    essential: false,
                }
            })
            .collect(),
        baseline: frame.baseline,
        cap: frame.cap,
    }
}

/// Minimum over every partial matching, enumerated recursively.
fn brute_force_cost(a: &[(f64, f64)], b: &[(f64, f64)], p: u32) -> f64 {
    fn go(i: usize, a: &[(f64, f64)], b: &[(f64, f64)], p: u32, m: &mut Vec<Option<usize>>, used: &mut [bool], best: &mut f64) {
        if i == a.len() {
            *best = best.min(matching_cost(a, b, m, p));
            return;
        }
        m.push(None);
        go(i + 1, a, b, p, m, used, best);
        m.pop();
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                m.push(Some(j));
                go(i + 1, a, b, p, m, used, best);
                m.pop();
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, a, b, p, &mut Vec::new(), &mut vec![false; b.len()], &mut best);
    best
}

fn euclid_cost(a: &[(f64, f64)], b: &[(f64, f64)], m: &[Option<usize>], p: u32) -> f64 {
    let pw = |x: f64| if p == 1 { x } else { x * x };
    let mut used = vec![false; b.len()];
    let mut total = 0.0;
    for (i, x) in a.iter().enumerate() {
        total += match m[i] {
            Some(j) => {
                used[j] = true;
                pw(((x.0 - b[j].0).powi(2) + (x.1 - b[j].1).powi(2)).sqrt())
            }
            None => pw((x.1 - x.0) / 2f64.sqrt()),
        };
    }
    for (j, y) in b.iter().enumerate() {
        if !used[j] {
            total += pw((y.1 - y.0) / 2f64.sqrt());
        }
    }
    total
}

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let frame = Frame {
        baseline: -3.0,
        cap: 5.0,
    };
    let mut failures = Vec::new();

    for trial in 0..50 {
        let n = r.random_range(0..40);
        let d = random_pd(&mut r, n, frame);
        let cfg = SwConfig {
            seed: trial,
            ..Default::default()
        };
        let v = sliced_wasserstein(&d, &d, &cfg).unwrap();
        if v != 0.0 {
            failures.push(format!("SW(D,D) = {v}"));
            break;
        }
    }

    let mut worst_scale = 0.0f64;
    for trial in 0..50 {
        let n = r.random_range(1..40);
        let d1 = random_pd(&mut r, n, frame);
        let n = r.random_range(1..40);
        let d2 = random_pd(&mut r, n, frame);
        let c = 0.1 + 10.0 * r.random::<f64>();
        for order in [1, 2] {
            let cfg = SwConfig {
                seed: trial,
                order,
                ..Default::default()
            };
            let base = sliced_wasserstein(&d1, &d2, &cfg).unwrap();
            let scaled = sliced_wasserstein(&d1.scaled(c), &d2.scaled(c), &cfg).unwrap();
            worst_scale = worst_scale.max((scaled - c * base).abs() / (c * base).max(f64::MIN_POSITIVE));
        }
    }
    if worst_scale > 1e-12 {
        failures.push(format!("homogeneity error {worst_scale:e}"));
    }

    let mut exact_bad = 0;
    let mut metric_gap = 0.0f64;
    for _ in 0..200 {
        let n = r.random_range(0..=6);
        let d1 = random_pd(&mut r, n, frame);
        let n = r.random_range(0..=6);
        let d2 = random_pd(&mut r, n, frame);
        let a: Vec<_> = d1.coords().collect();
        let b: Vec<_> = d2.coords().collect();
        for p in [1, 2] {
            let brute = brute_force_cost(&a, &b, p);
            let (cost, m) = optimal_matching(&a, &b, p);
            let w = exact_wasserstein(&d1, &d2, p).unwrap();
            let root = if p == 1 { brute } else { brute.sqrt() };
            if cost != brute || w != root {
                exact_bad += 1;
            }
            metric_gap = metric_gap.max((euclid_cost(&a, &b, &m, p) - cost).abs());
        }
    }
    if exact_bad > 0 {
        failures.push(format!("{exact_bad} exact/brute-force mismatches"));
    }
    if metric_gap > 1e-12 {
        failures.push(format!("ground cost differs from the Euclidean reference by {metric_gap:e}"));
    }
    let detail = if failures.is_empty() {
        format!("SW(D,D)=0 on 50, homogeneity err {worst_scale:.1e}, exact = brute force on 400")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pos = GaussianSummary::new(r.random_range(-3.0..3.0), r.random_range(0.05..4.0)).unwrap();
        let neg = GaussianSummary::new(r.random_range(-3.0..3.0), r.random_range(0.05..4.0)).unwrap();
        let d = (perm_closed_form(&pos, &neg) - perm_quadrature(&pos, &neg).unwrap()).abs();
        worst = worst.max(d);
    }

    let mut monotone = true;
    for (sd_pos, sd_neg) in [(1.0, 1.0), (0.5, 1.5), (2.0, 0.7), (1.2, 1.2)] {
        let gaps: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let rows = lemma1_sweep(&gaps, sd_pos, sd_neg).unwrap();
        monotone &= rows.windows(2).all(|w| w[1].perm < w[0].perm && w[1].w2 > w[0].w2);
    }

    let pos = GaussianSummary::new(2.0, 1.0).unwrap();
    let neg = GaussianSummary::new(0.0, 1.0).unwrap();
    let (a, b) = kp_core::theory::gaussian_samples(&pos, &neg, 5000, 3);
    let report = stability_check(&a, &b, 0.3, 100, 3).unwrap();

    let pass = worst <= 1e-8 && monotone && report.violations == 0 && report.trials.len() == 100;
    outcome(
        pass,
        format!(
            "perm max diff {worst:.1e}, strict monotone {monotone}, {} violations / {} trials",
            report.violations,
            report.trials.len()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let kg = generate(&SynthConfig::default()).unwrap();
    let mut kp_wins = 0;
    let mut concordant = 0;
    for seed in 0..20u64 {
        let cfg = ExperimentConfig {
            seed,
            baselines: false,
            ..Default::default()
        };
        let seeds = StageSeeds::from_global(seed);
        let untrained = init_embeddings(ModelKind::TransE, kg.n_entities(), kg.n_relations(), cfg.dim, seeds.init).unwrap();
        let train_cfg = TrainConfig {
            seed: seeds.train,
            ..cfg.train.clone()
        };
        let trained = train(untrained.clone(), &kg, &train_cfg, |_| Ok(())).unwrap().model;
        let before = evaluate_model(&kg, &untrained, 0, &cfg);
        let after = evaluate_model(&kg, &trained, train_cfg.epochs, &cfg);
        let kp = (before.metric(Metric::KpTest).unwrap(), after.metric(Metric::KpTest).unwrap());
        let hits = (before.metric(Metric::Hits(10)).unwrap(), after.metric(Metric::Hits(10)).unwrap());
        let kp_up = kp.1 > kp.0;
        kp_wins += usize::from(kp_up);
        concordant += usize::from(kp_up == (hits.1 > hits.0));
    }
    outcome(
        kp_wins >= 19 && concordant >= 19,
        format!("trained KP above untrained on {kp_wins}/20 seeds, agreeing with Hits@10 on {concordant}/20"),
    )
}

// ---------------------------------------------------------------- 5, 6

fn fmt3(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.3}"))
}

fn criteria_5_6() -> (Outcome, Outcome, Duration) {
    let start = Instant::now();
    let kg = generate(&SynthConfig::default()).unwrap();
    let cfg = ExperimentConfig {
        baselines: false,
        ..Default::default()
    };
    let out = run_experiment_on(&kg, &cfg).unwrap();
    let n = out.reports.len();
    let c = correlate(&out.reports, Metric::KpTest, Metric::Hits(10)).unwrap();
    let five = outcome(
        n >= 8 && c.pearson.is_some_and(|p| p >= 0.5),
        format!(
            "{n} checkpoints, pearson {} (spearman {})",
            fmt3(c.pearson),
            fmt3(c.spearman)
        ),
    );
    let es = early_stop_select(&out.reports, Metric::KpTest, &[Metric::Hits(10)]).unwrap();
    let row = &es.rows[0];
    let six = match row.relative_error {
        Some(e) => outcome(
            e <= 0.15,
            format!(
                "KP picks epoch {}, Hits@10 best at {}, relative error {e:.3}",
                es.selected_epoch, row.best_epoch
            ),
        ),
        None => outcome(false, "relative error undefined (best Hits@10 is 0)"),
    };
    (five, six, start.elapsed())
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let kg = generate(&SynthConfig {
        n_entities: 2000,
        n_clusters: 200,
        ..Default::default()
    })
    .unwrap();
    let seeds = StageSeeds::from_global(7);
    let model = init_embeddings(ModelKind::TransE, kg.n_entities(), kg.n_relations(), 32, seeds.init).unwrap();
    let model = train(
        model,
        &kg,
        &TrainConfig {
            epochs: 5,
            eval_every: 5,
            seed: seeds.train,
            ..Default::default()
        },
        |_| Ok(()),
    )
    .unwrap()
    .model;

    let stage = KpStageConfig {
        count: default_count(&kg, 1.0),
        repeats: 1,
        seed: seeds.sample_test,
        negative_mode: NegativeMode::FullGrid,
        sw: SwConfig::default(),
    };
    let t = Instant::now();
    kp_stage(&kg, &model, Split::Test, &stage).unwrap();
    let kp_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    ranking_metrics(&model, &kg, &kg.test, RankingMode::Filtered).unwrap();
    let rank_s = t.elapsed().as_secs_f64();

    let mut r = rng(7);
    let frame = Frame {
        baseline: -1.0,
        cap: 1.0,
    };
    let d1 = random_pd(&mut r, 2000, frame);
    let d2 = random_pd(&mut r, 2000, frame);
    let t = Instant::now();
    sliced_wasserstein(&d1, &d2, &SwConfig::default()).unwrap();
    let sw_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    exact_wasserstein(&d1, &d2, 2).unwrap();
    let exact_s = t.elapsed().as_secs_f64();

    outcome(
        kp_s * 10.0 <= rank_s && sw_s * 2.0 <= exact_s,
        format!(
            "KP {kp_s:.4}s vs ranking {rank_s:.3}s ({:.1}x); SW {sw_s:.4}s vs exact {exact_s:.2}s ({:.0}x)",
            rank_s / kp_s,
            exact_s / sw_s
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig {
        baselines: false,
        ..Default::default()
    };
    let rows = robustness_sweep(&cfg, &[0.2, 0.4, 0.6, 0.8, 1.0], 5).unwrap();
    let max_std = rows.iter().map(|r| r.std).fold(0.0, f64::max);
    let hi = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    let means: Vec<String> = rows.iter().map(|r| format!("{:.3}", r.mean)).collect();
    outcome(
        max_std <= 0.1 && hi - lo <= 0.15,
        format!("max std {max_std:.3}, band {:.3}, means [{}]", hi - lo, means.join(", ")),
    )
}

// ---------------------------------------------------------------- 9

fn oracle_rank(m: &EmbeddingModel, known: &HashSet<Triple>, t: &Triple, side: Side, mode: RankingMode) -> f64 {
    let truth = match side {
        Side::Head => t.head,
        Side::Tail => t.tail,
    };
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for e in 0..m.n_entities as u32 {
        let cand = match side {
            Side::Head => Triple::new(e, t.relation, t.tail),
            Side::Tail => Triple::new(t.head, t.relation, e),
        };
        if e != truth && mode == RankingMode::Filtered && known.contains(&cand) {
            continue;
        }
        scored.push((m.score(&cand), e == truth));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    // average 1-based position over the block of scores equal to the truth
    let target = scored.iter().find(|s| s.1).unwrap().0;
    let positions: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].0 == target).map(|i| i + 1).collect();
    positions.iter().sum::<usize>() as f64 / positions.len() as f64
}

fn oracle_kendall(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let (mut s, mut tx, mut ty) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[i].total_cmp(&xs[j]) as i64;
            let dy = ys[i].total_cmp(&ys[j]) as i64;
            s += dx * dy;
            tx += u64::from(dx == 0);
            ty += u64::from(dy == 0);
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    s as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let kinds = [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx, ModelKind::RotatE];
    let mut rank_bad = 0;
    for fixture in 0..1000 {
        let n_e = r.random_range(3..25usize);
        let n_r = r.random_range(1..4usize);
        let kind = kinds[fixture % 4];
        let mut m = init_embeddings(kind, n_e, n_r, 4, fixture as u64).unwrap();
        // integer-valued rows produce exact score ties
        for v in m.entity.iter_mut() {
            *v = f64::from(r.random_range(-1i32..=1));
        }
        if kind != ModelKind::RotatE {
            for v in m.relation.iter_mut() {
                *v = f64::from(r.random_range(-1i32..=1));
            }
        }
        let rand_t = |r: &mut ChaCha8Rng| {
            Triple::new(r.random_range(0..n_e as u32), r.random_range(0..n_r as u32), r.random_range(0..n_e as u32))
        };
        let train: Vec<Triple> = (0..r.random_range(0..3 * n_e)).map(|_| rand_t(&mut r)).collect();
        let test: Vec<Triple> = (0..3).map(|_| rand_t(&mut r)).collect();
        let kg = KnowledgeGraph::from_ids(n_e, n_r, train, Vec::new(), test).unwrap();
        let known: HashSet<Triple> = kg.train.iter().chain(&kg.test).copied().collect();
        for t in &kg.test {
            for side in [Side::Head, Side::Tail] {
                for mode in [RankingMode::Raw, RankingMode::Filtered] {
                    if rank_triple(&m, &kg, t, side, mode).unwrap() != oracle_rank(&m, &known, t, side, mode) {
                        rank_bad += 1;
                    }
                }
            }
        }
    }

    let mut kendall_bad = 0;
    let mut invariance_bad = 0;
    for _ in 0..100 {
        let n = r.random_range(2..60usize);
        let xs: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8i32))).collect();
        let ys: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..8i32)) + 0.5 * r.random::<f64>().round()).collect();
        let s = PairedSeries::new(xs.clone(), ys.clone()).unwrap();
        let k = kendall(&s);
        let distinct = |v: &[f64]| v.iter().any(|x| *x != v[0]);
        match k {
            Ok(k) if k != oracle_kendall(&xs, &ys) => kendall_bad += 1,
            Err(_) if distinct(&xs) && distinct(&ys) => kendall_bad += 1,
            _ => {}
        }
        let f = |v: &[f64]| v.iter().map(|x| (x * 0.7).exp() + x.powi(3)).collect::<Vec<f64>>();
        let t = PairedSeries::new(f(&xs), f(&ys)).unwrap();
        if average_ranks(&xs) != average_ranks(&f(&xs))
            || kendall(&s).ok() != kendall(&t).ok()
            || spearman(&s).ok() != spearman(&t).ok()
        {
            invariance_bad += 1;
        }
    }
    outcome(
        rank_bad == 0 && kendall_bad == 0 && invariance_bad == 0,
        format!("rank mismatches {rank_bad}/24000, kendall mismatches {kendall_bad}/100, invariance failures {invariance_bad}/100"),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let dim = 8;
    let mut worst = 0.0f64;
    let mut fails = 0;
    for kind in [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx, ModelKind::RotatE] {
        let rw = kind.relation_width(dim);
        for _ in 0..100 {
            let mut h: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let mut rel: Vec<f64> = (0..rw).map(|_| r.random_range(-1.0..1.0)).collect();
            let mut t: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            let (mut gh, mut gr, mut gt) = (vec![0.0; dim], vec![0.0; rw], vec![0.0; dim]);
            score_grad(kind, &h, &rel, &t, &mut gh, &mut gr, &mut gt);
            let analytic: Vec<f64> = gh.iter().chain(&gr).chain(&gt).copied().collect();
            let eps = 1e-6;
            let mut numeric = Vec::with_capacity(analytic.len());
            for which in 0..3 {
                let len = [dim, rw, dim][which];
                for i in 0..len {
                    let v = match which {
                        0 => &mut h,
                        1 => &mut rel,
                        _ => &mut t,
                    };
                    let orig = v[i];
                    v[i] = orig + eps;
                    let up = score_rows(kind, &h, &rel, &t);
                    let v = match which {
                        0 => &mut h,
                        1 => &mut rel,
                        _ => &mut t,
                    };
                    v[i] = orig - eps;
                    let down = score_rows(kind, &h, &rel, &t);
                    let v = match which {
                        0 => &mut h,
                        1 => &mut rel,
                        _ => &mut t,
                    };
                    v[i] = orig;
                    numeric.push((up - down) / (2.0 * eps));
                }
            }
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
            let rel_err = norm(&diff) / norm(&analytic).max(norm(&numeric));
            worst = worst.max(rel_err);
            fails += usize::from(!(rel_err <= 1e-4));
        }
    }
    outcome(fails == 0, format!("400 gradients, worst relative error {worst:.1e}"))
}

// ----------------------------------------------------------------

fn report(id: &str, limit_s: u64, o: Outcome, elapsed: Duration) -> bool {
    let in_time = elapsed.as_secs_f64() < limit_s as f64;
    let pass = o.pass && in_time;
    let timing = if in_time {
        format!("{:.1}s", elapsed.as_secs_f64())
    } else {
        format!("{:.1}s, over the {limit_s}s budget", elapsed.as_secs_f64())
    };
    println!("criterion {id:>2}: {} | {} [{timing}]", if pass { "PASS" } else { "FAIL" }, o.detail);
    pass
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    // `cargo test -- --list` and filters expect libtest behaviour; honour the
    // listing request and otherwise run everything
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut all = true;
    let (o, d) = timed(criterion_1);
    all &= report("1", 10, o, d);
    let (o, d) = timed(criterion_2);
    all &= report("2", 30, o, d);
    let (o, d) = timed(criterion_3);
    all &= report("3", 60, o, d);
    let (o, d) = timed(criterion_4);
    all &= report("4", 300, o, d);
    let (five, six, d) = criteria_5_6();
    all &= report("5", 600, five, d);
    all &= report("6", 600, six, d);
    let (o, d) = timed(criterion_7);
    all &= report("7", 900, o, d);
    let (o, d) = timed(criterion_8);
    all &= report("8", 1200, o, d);
    let (o, d) = timed(criterion_9);
    all &= report("9", 30, o, d);
    let (o, d) = timed(criterion_10);
    all &= report("10", 30, o, d);
    if !all {
        std::process::exit(1);
    }
}

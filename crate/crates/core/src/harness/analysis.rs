use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{EvalReport, Metric};
use super::run::{derive_seed, kp_stage, KpStageConfig, StageSeeds};
use crate::error::{KpError, Result};
use crate::kg_store::{KnowledgeGraph, Split};
use crate::kge_models::{init_embeddings, train, EmbeddingModel, ModelKind, TrainConfig};
use crate::ranking::ranking_metrics;
use crate::sampling::default_count;
use crate::stats::{correlations, PairedSeries};
use crate::theory::{
    gaussian_samples, lemma1_sweep, stability_bound, stability_check, stability_csv, sweep_csv,
    GaussianSummary, StabilityInput, StabilityReport, SweepRow,
};
use crate::transport::SwConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Across the checkpoints of one model.
    Intra,
    /// Across the final checkpoints of several models.
    Inter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub metric_x: String,
    pub metric_y: String,
    pub n: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

/// Latest checkpoint of each `(run_id, model_kind)`.
pub fn final_reports(reports: &[EvalReport]) -> Vec<EvalReport> {
    let mut last: BTreeMap<(String, String), &EvalReport> = BTreeMap::new();
    for r in reports {
        let key = (r.run_id.clone(), r.model_kind.to_string());
        if last.get(&key).is_none_or(|prev| r.epoch >= prev.epoch) {
            last.insert(key, r);
        }
    }
    last.into_values().cloned().collect()
}

/// Reports of one model kind, ordered by epoch.
pub fn model_series(reports: &[EvalReport], kind: ModelKind) -> Vec<EvalReport> {
    let mut out: Vec<EvalReport> = reports.iter().filter(|r| r.model_kind == kind).cloned().collect();
    out.sort_by_key(|r| r.epoch);
    out
}

/// Pairs `metric_x` with `metric_y` across `reports`. Reports missing either
/// metric are skipped; undefined coefficients come back as `None`.
pub fn correlate(reports: &[EvalReport], metric_x: Metric, metric_y: Metric) -> Result<CorrelationResult> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .filter_map(|r| Some((r.metric(metric_x)?, r.metric(metric_y)?)))
        .unzip();
    if xs.len() < 3 {
        return Err(KpError::InvalidArgument(format!(
            "need >= 3 reports with both {metric_x} and {metric_y}, got {}",
            xs.len()
        )));
    }
    let n = xs.len();
    let series = PairedSeries::labeled(xs, ys, &metric_x.to_string(), &metric_y.to_string())?;
    let c = correlations(&series);
    Ok(CorrelationResult {
        metric_x: metric_x.to_string(),
        metric_y: metric_y.to_string(),
        n,
        pearson: c.pearson,
        spearman: c.spearman,
        kendall: c.kendall,
    })
}

fn best_index(values: &[f64], lower_is_better: bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        let better = if lower_is_better { v < values[best] } else { v > values[best] };
        if better {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopRow {
    pub metric: String,
    /// Epoch that `metric` itself would select.
    pub best_epoch: usize,
    pub best_value: f64,
    /// Value of `metric` at the criterion's epoch.
    pub value_at_selected: f64,
    /// `None` when the best value is zero.
    pub relative_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopResult {
    pub criterion: String,
    pub selected_epoch: usize,
    pub rows: Vec<EarlyStopRow>,
}

/// Selects the checkpoint that is best under `criterion` (earliest on ties)
/// and reports, for each metric, how far its value there is from its own
/// optimum.
pub fn early_stop_select(reports: &[EvalReport], criterion: Metric, metrics: &[Metric]) -> Result<EarlyStopResult> {
    if reports.is_empty() {
        return Err(KpError::Empty("no reports".into()));
    }
    let mut ordered: Vec<&EvalReport> = reports.iter().collect();
    ordered.sort_by_key(|r| r.epoch);
    let column = |m: Metric| -> Result<Vec<f64>> {
        ordered
            .iter()
            .map(|r| {
                r.metric(m).ok_or_else(|| {
                    KpError::InvalidArgument(format!("metric {m} missing at epoch {}", r.epoch))
                })
            })
            .collect()
    };
    let crit = column(criterion)?;
    let selected = best_index(&crit, criterion.lower_is_better());
    let mut rows = Vec::with_capacity(metrics.len());
    for &m in metrics {
        let values = column(m)?;
        let best = best_index(&values, m.lower_is_better());
        let best_value = values[best];
        let at_selected = values[selected];
        rows.push(EarlyStopRow {
            metric: m.to_string(),
            best_epoch: ordered[best].epoch,
            best_value,
            value_at_selected: at_selected,
            relative_error: (best_value != 0.0).then(|| (at_selected - best_value).abs() / best_value.abs()),
        });
    }
    Ok(EarlyStopResult {
        criterion: criterion.to_string(),
        selected_epoch: ordered[selected].epoch,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub fraction: f64,
    pub sample_count: usize,
    /// Pearson correlation per seed.
    pub correlations: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation across seeds.
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.iter().all(|&x| x == xs[0]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Recomputes KP(test) on every checkpoint at each sampling fraction with
/// `n_seeds` independent samples, correlating each KP series against the
/// fixed `reference` series (one value per checkpoint).
pub fn robustness_from_checkpoints(
    kg: &KnowledgeGraph,
    checkpoints: &[EmbeddingModel],
    reference: &[f64],
    cfg: &ExperimentConfig,
    fractions: &[f64],
    n_seeds: usize,
) -> Result<Vec<RobustnessRow>> {
    if checkpoints.len() != reference.len() {
        return Err(KpError::InvalidArgument(format!(
            "{} checkpoints but {} reference values",
            checkpoints.len(),
            reference.len()
        )));
    }
    if n_seeds < 2 {
        return Err(KpError::InvalidArgument("n_seeds must be >= 2".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(KpError::InvalidArgument(format!("fraction {f} outside (0, 1]")));
    }
    let base = default_count(kg, cfg.edges_per_entity);
    let seeds = StageSeeds::from_global(cfg.seed);
    let sw = SwConfig {
        seed: seeds.sw,
        ..cfg.sw.clone()
    };
    let mut rows = Vec::with_capacity(fractions.len());
    for (fi, &fraction) in fractions.iter().enumerate() {
        let count = ((base as f64 * fraction).round() as usize).max(1);
        let mut corrs = Vec::with_capacity(n_seeds);
        for s in 0..n_seeds {
            let stage = KpStageConfig {
                count,
                repeats: 1,
                seed: derive_seed(seeds.sample_test, ((fi as u64) << 32) | s as u64),
                negative_mode: cfg.negative_mode,
                sw: sw.clone(),
            };
            let kps = checkpoints
                .iter()
                .map(|m| kp_stage(kg, m, Split::Test, &stage).map(|o| o.mean))
                .collect::<Result<Vec<f64>>>()?;
            let series = PairedSeries::new(kps, reference.to_vec())?;
            corrs.push(crate::stats::pearson(&series)?);
        }
        let (mean, std) = mean_std(&corrs);
        rows.push(RobustnessRow {
            fraction,
            sample_count: count,
            correlations: corrs,
            mean,
            std,
        });
    }
    Ok(rows)
}

/// Trains the first configured model with checkpoints, ranks every
/// checkpoint once and runs [`robustness_from_checkpoints`] against Hits@10.
pub fn robustness_sweep(cfg: &ExperimentConfig, fractions: &[f64], n_seeds: usize) -> Result<Vec<RobustnessRow>> {
    cfg.validate()?;
    let mut kg = cfg.dataset.load()?;
    kg.set_known_policy(cfg.known_policy);
    let seeds = StageSeeds::from_global(cfg.seed);
    let kind = cfg.models[0];
    let model = init_embeddings(kind, kg.n_entities(), kg.n_relations(), cfg.dim, seeds.init)?;
    let train_cfg = TrainConfig {
        seed: seeds.train,
        ..cfg.train.clone()
    };
    let outcome = train(model, &kg, &train_cfg, |_| Ok(()))?;
    let models: Vec<EmbeddingModel> = outcome.checkpoints.into_iter().map(|c| c.model).collect();
    let reference = models
        .iter()
        .map(|m| {
            let r = ranking_metrics(m, &kg, &kg.test, cfg.ranking_mode)?;
            r.hits_at(10).ok_or_else(|| KpError::Undefined("hits@10 missing".into()))
        })
        .collect::<Result<Vec<f64>>>()?;
    robustness_from_checkpoints(&kg, &models, &reference, cfg, fractions, n_seeds)
}

pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    let mut out = String::from("fraction,sample_count,mean,std,correlations\n");
    for r in rows {
        let each: Vec<String> = r.correlations.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{},{},{},{}", r.fraction, r.sample_count, r.mean, r.std, each.join(";"));
    }
    out
}

/// Smallest stage time accepted as a measurement.
pub const MIN_CLOCK_S: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub model_kind: ModelKind,
    pub ranking_s: f64,
    pub kp_s: f64,
    pub speedup: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub notes: Vec<String>,
}

/// `ranking_s / kp_s`, refusing times below the clock resolution.
pub fn speedup(ranking_s: f64, kp_s: f64) -> Result<f64> {
    if !(kp_s >= MIN_CLOCK_S && ranking_s >= MIN_CLOCK_S) {
        return Err(KpError::InvalidArgument(format!(
            "stage times below clock resolution {MIN_CLOCK_S}s (ranking {ranking_s}, kp {kp_s})"
        )));
    }
    Ok(ranking_s / kp_s)
}

/// Totals the `ranking` and `kp_test` stage times per model.
pub fn timing_report(reports: &[EvalReport]) -> TimingReport {
    let mut totals: BTreeMap<String, (ModelKind, f64, f64)> = BTreeMap::new();
    let mut out = TimingReport::default();
    for r in reports {
        let (Some(&rank), Some(&kp)) = (r.wall_times.get("ranking"), r.wall_times.get("kp_test")) else {
            out.notes.push(format!(
                "{} {} epoch {}: missing ranking or kp_test timing, skipped",
                r.run_id, r.model_kind, r.epoch
            ));
            continue;
        };
        let e = totals.entry(r.model_kind.to_string()).or_insert((r.model_kind, 0.0, 0.0));
        e.1 += rank;
        e.2 += kp;
    }
    for (name, (kind, rank, kp)) in totals {
        match speedup(rank, kp) {
            Ok(s) => out.rows.push(TimingRow {
                model_kind: kind,
                ranking_s: rank,
                kp_s: kp,
                speedup: s,
            }),
            Err(e) => out.notes.push(format!("{name}: {e}")),
        }
    }
    out
}

pub fn timing_csv(t: &TimingReport) -> String {
    let mut out = String::from("model_kind,ranking_s,kp_s,speedup\n");
    for r in &t.rows {
        let _ = writeln!(out, "{},{},{},{}", r.model_kind, r.ranking_s, r.kp_s, r.speedup);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    pub gaps: Vec<f64>,
    pub sd_pos: f64,
    pub sd_neg: f64,
    /// Score distributions the stability trials start from.
    pub pos: (f64, f64),
    pub neg: (f64, f64),
    pub n_samples: usize,
    pub noise_sigma: f64,
    pub trials: usize,
    /// Variance ratios `noisy / original` tabulated through the bound.
    pub variance_ratios: Vec<f64>,
    pub seed: u64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            gaps: (0..=40).map(|i| i as f64 * 0.1).collect(),
            sd_pos: 1.0,
            sd_neg: 1.0,
            pos: (2.0, 1.0),
            neg: (0.0, 1.0),
            n_samples: 5000,
            noise_sigma: 0.3,
            trials: 100,
            variance_ratios: vec![1.0, 1.25, 1.5, 2.0, 3.0, 4.0],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub variance_ratio: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub sweep: Vec<SweepRow>,
    pub monotone: bool,
    pub stability: StabilityReport,
    pub bounds: Vec<BoundRow>,
    pub pass: bool,
}

impl TheoryReport {
    pub fn bounds_csv(&self) -> String {
        let mut out = String::from("variance_ratio,bound\n");
        for b in &self.bounds {
            let _ = writeln!(out, "{},{}", b.variance_ratio, b.bound);
        }
        out
    }

    pub fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "pass" } else { "fail" };
        format!(
            "lemma1 monotonicity: {} ({} rows)\nstability: {} ({} violations over {} trials, noise {})\n",
            verdict(self.monotone),
            self.sweep.len(),
            verdict(self.stability.violations == 0),
            self.stability.violations,
            self.stability.trials.len(),
            self.stability.noise_sigma
        )
    }

    /// Writes `lemma1_sweep.csv`, `stability.csv`, `bounds.csv` and
    /// `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| KpError::io(dir, e))?;
        let files = [
            ("lemma1_sweep.csv", sweep_csv(&self.sweep)),
            ("stability.csv", stability_csv(&self.stability)),
            ("bounds.csv", self.bounds_csv()),
            ("summary.txt", self.summary()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| KpError::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn theory_report(cfg: &TheoryConfig) -> Result<TheoryReport> {
    let sweep = lemma1_sweep(&cfg.gaps, cfg.sd_pos, cfg.sd_neg)?;
    let monotone = sweep.iter().all(|r| !r.flagged);
    let pos = GaussianSummary::new(cfg.pos.0, cfg.pos.1)?;
    let neg = GaussianSummary::new(cfg.neg.0, cfg.neg.1)?;
    let (xs, ys) = gaussian_samples(&pos, &neg, cfg.n_samples, cfg.seed);
    let stability = stability_check(&xs, &ys, cfg.noise_sigma, cfg.trials, derive_seed(cfg.seed, 1))?;
    let bounds = cfg
        .variance_ratios
        .iter()
        .map(|&ratio| {
            let bound = stability_bound(&StabilityInput {
                sigma2_mu1: 1.0,
                sigma2_mu2: ratio,
                sigma2_nu1: 1.0,
                sigma2_nu2: ratio,
            })?;
            Ok(BoundRow {
                variance_ratio: ratio,
                bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = monotone && stability.violations == 0;
    Ok(TheoryReport {
        sweep,
        monotone,
        stability,
        bounds,
        pass,
    })
}

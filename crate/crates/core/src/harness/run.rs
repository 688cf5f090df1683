use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{append_report, summary_csv, EvalReport, SCHEMA_VERSION};
use crate::baselines::{avl, conicity, shortest_path_kernel, KernelConfig};
use crate::error::{KpError, Result};
use crate::kg_store::{KnowledgeGraph, Split};
use crate::kge_models::{init_embeddings, save_checkpoint, train, EmbeddingModel, ModelKind};
use crate::ranking::{ranking_metrics, stratified_metrics};
use crate::sampling::{build_pair, default_count, NegativeMode, ScoredGraph};
use crate::transport::{kp_score, SwConfig};

/// SplitMix64 finalizer over `base ^ stream`; independent streams per stage.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_SAMPLE_TRAIN: u64 = 2;
const STREAM_SAMPLE_TEST: u64 = 3;
const STREAM_KERNEL: u64 = 4;

/// Seeds used by every stage of a run, derived from the global seed.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSeeds {
    pub init: u64,
    pub train: u64,
    pub sample_train: u64,
    pub sample_test: u64,
    pub sw: u64,
    pub kernel: u64,
}

impl StageSeeds {
    pub fn from_global(seed: u64) -> Self {
        Self {
            init: derive_seed(seed, STREAM_INIT),
            train: seed,
            sample_train: derive_seed(seed, STREAM_SAMPLE_TRAIN),
            sample_test: derive_seed(seed, STREAM_SAMPLE_TEST),
            sw: seed,
            kernel: derive_seed(seed, STREAM_KERNEL),
        }
    }

    fn as_map(&self) -> BTreeMap<String, u64> {
        [
            ("init", self.init),
            ("train", self.train),
            ("sample_train", self.sample_train),
            ("sample_test", self.sample_test),
            ("sw", self.sw),
            ("kernel", self.kernel),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
    }
}

/// Everything the KP stage needs; ranking inputs are deliberately absent.
#[derive(Clone, Debug)]
pub struct KpStageConfig {
    pub count: usize,
    pub repeats: usize,
    pub seed: u64,
    pub negative_mode: NegativeMode,
    pub sw: SwConfig,
}

#[derive(Clone, Debug)]
pub struct KpStageOutput {
    pub mean: f64,
    pub values: Vec<f64>,
    /// Graphs of the first repeat.
    pub graphs: (ScoredGraph, ScoredGraph),
    pub seconds: f64,
}

/// Samples `repeats` positive/negative graph pairs from `split` and averages
/// their KP. Repeat `i` samples with `derive_seed(seed, i)`; repeat 0 uses
/// `seed` itself.
pub fn kp_stage(
    kg: &KnowledgeGraph,
    model: &EmbeddingModel,
    split: Split,
    cfg: &KpStageConfig,
) -> Result<KpStageOutput> {
    if cfg.repeats < 1 {
        return Err(KpError::InvalidArgument("KP repeats must be >= 1".into()));
    }
    let start = Instant::now();
    let mut values = Vec::with_capacity(cfg.repeats);
    let mut first = None;
    for i in 0..cfg.repeats {
        let seed = if i == 0 { cfg.seed } else { derive_seed(cfg.seed, i as u64) };
        let (pos, neg) = build_pair(kg, split, model, cfg.count, seed, cfg.negative_mode)?;
        values.push(kp_score(&pos, &neg, &cfg.sw)?);
        if first.is_none() {
            first = Some((pos, neg));
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(KpStageOutput {
        mean,
        values,
        graphs: first.expect("at least one repeat"),
        seconds,
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs every evaluation stage on one model. Stage failures are recorded in
/// the report instead of aborting.
pub fn evaluate_model(
    kg: &KnowledgeGraph,
    model: &EmbeddingModel,
    epoch: usize,
    cfg: &ExperimentConfig,
) -> EvalReport {
    let seeds = StageSeeds::from_global(cfg.seed);
    let count = default_count(kg, cfg.edges_per_entity);
    let sw = SwConfig {
        seed: seeds.sw,
        ..cfg.sw.clone()
    };
    let stage_cfg = |seed| KpStageConfig {
        count,
        repeats: cfg.n_eval_seeds,
        seed,
        negative_mode: cfg.negative_mode,
        sw: sw.clone(),
    };
    let mut report = EvalReport {
        schema: SCHEMA_VERSION,
        run_id: cfg.run_id(),
        model_kind: model.kind,
        dataset: cfg.dataset.name(),
        epoch,
        kp_train: None,
        kp_test: None,
        kp_repeats: cfg.n_eval_seeds,
        ranking: None,
        strat: None,
        conicity: None,
        avl: None,
        gk_train: None,
        gk_test: None,
        wall_times: BTreeMap::new(),
        seeds: seeds.as_map(),
        errors: BTreeMap::new(),
    };
    let record_error = |report: &mut EvalReport, stage: &str, e: KpError| {
        report.errors.insert(stage.to_owned(), e.to_string());
    };

    let mut graphs = BTreeMap::new();
    for (stage, split, seed) in [
        ("kp_train", Split::Train, seeds.sample_train),
        ("kp_test", Split::Test, seeds.sample_test),
    ] {
        match kp_stage(kg, model, split, &stage_cfg(seed)) {
            Ok(out) => {
                report.wall_times.insert(stage.to_owned(), out.seconds);
                if split == Split::Train {
                    report.kp_train = Some(out.mean);
                } else {
                    report.kp_test = Some(out.mean);
                }
                graphs.insert(stage, out.graphs);
            }
            Err(e) => record_error(&mut report, stage, e),
        }
    }

    let (ranking, secs) = timed(|| ranking_metrics(model, kg, &kg.test, cfg.ranking_mode));
    report.wall_times.insert("ranking".into(), secs);
    match ranking {
        Ok(r) => report.ranking = Some(r),
        Err(e) => record_error(&mut report, "ranking", e),
    }
    let (strat, secs) = timed(|| stratified_metrics(model, kg, &kg.test, cfg.ranking_mode, &cfg.strat));
    report.wall_times.insert("strat".into(), secs);
    match strat {
        Ok(r) => report.strat = Some(r),
        Err(e) => record_error(&mut report, "strat", e),
    }

    if cfg.baselines {
        let (geom, secs) = timed(|| Ok((conicity(model), avl(model))));
        report.wall_times.insert("geometry".into(), secs);
        if let Ok((c, a)) = geom {
            match c {
                Ok(v) => report.conicity = Some(v),
                Err(e) => record_error(&mut report, "conicity", e),
            }
            match a {
                Ok(v) => report.avl = Some(v),
                Err(e) => record_error(&mut report, "avl", e),
            }
        }
        let kernel = KernelConfig {
            seed: seeds.kernel,
            ..cfg.kernel.clone()
        };
        for (stage, key) in [("gk_train", "kp_train"), ("gk_test", "kp_test")] {
            let Some((pos, neg)) = graphs.get(key) else {
                continue;
            };
            let (gk, secs) = timed(|| shortest_path_kernel(pos, neg, &kernel));
            report.wall_times.insert(stage.to_owned(), secs);
            match gk {
                Ok(v) if stage == "gk_train" => report.gk_train = Some(v),
                Ok(v) => report.gk_test = Some(v),
                Err(e) => record_error(&mut report, stage, e),
            }
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model_kind: ModelKind,
    pub reports: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub run_id: String,
    pub dataset: String,
    pub n_entities: usize,
    pub n_relations: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub config: ExperimentConfig,
    pub models: Vec<ModelOutcome>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub reports: Vec<EvalReport>,
    pub manifest: RunManifest,
    /// Directory the run was written to, when persisted.
    pub run_dir: Option<PathBuf>,
}

fn prepare_run_dir(cfg: &ExperimentConfig) -> Result<Option<PathBuf>> {
    let Some(root) = &cfg.output_dir else {
        return Ok(None);
    };
    let dir = root.join(cfg.run_id());
    fs::create_dir_all(&dir).map_err(|e| KpError::io(&dir, e))?;
    // a rerun replaces the previous report stream
    let reports = dir.join("reports.jsonl");
    if reports.exists() {
        fs::remove_file(&reports).map_err(|e| KpError::io(&reports, e))?;
    }
    Ok(Some(dir))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| KpError::io(path, e))
}

/// Trains every configured model with checkpoints and evaluates each one.
///
/// A model whose training fails is recorded in the manifest and the run moves
/// on to the next model.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut kg = cfg.dataset.load()?;
    kg.set_known_policy(cfg.known_policy);
    run_experiment_on(&kg, cfg)
}

/// [`run_experiment`] on an already loaded graph.
pub fn run_experiment_on(kg: &KnowledgeGraph, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let run_dir = prepare_run_dir(cfg)?;
    let seeds = StageSeeds::from_global(cfg.seed);
    let train_cfg = crate::kge_models::TrainConfig {
        seed: seeds.train,
        ..cfg.train.clone()
    };
    let mut reports = Vec::new();
    let mut outcomes = Vec::new();

    for &kind in &cfg.models {
        let before = reports.len();
        let result = init_embeddings(kind, kg.n_entities(), kg.n_relations(), cfg.dim, seeds.init)
            .and_then(|model| {
                train(model, kg, &train_cfg, |cp| {
                    if let (Some(dir), true) = (&run_dir, cfg.save_checkpoints) {
                        let cp_dir = dir.join("checkpoints");
                        fs::create_dir_all(&cp_dir).map_err(|e| KpError::io(&cp_dir, e))?;
                        save_checkpoint(&cp_dir, &format!("{kind}-e{:04}", cp.epoch), cp, &train_cfg)?;
                    }
                    let report = evaluate_model(kg, &cp.model, cp.epoch, cfg);
                    if let Some(dir) = &run_dir {
                        append_report(&dir.join("reports.jsonl"), &report)?;
                    }
                    reports.push(report);
                    Ok(())
                })
            });
        outcomes.push(ModelOutcome {
            model_kind: kind,
            reports: reports.len() - before,
            error: result.err().map(|e| e.to_string()),
        });
    }

    let manifest = RunManifest {
        schema: SCHEMA_VERSION,
        run_id: cfg.run_id(),
        dataset: cfg.dataset.name(),
        n_entities: kg.n_entities(),
        n_relations: kg.n_relations(),
        n_train: kg.train.len(),
        n_valid: kg.valid.len(),
        n_test: kg.test.len(),
        config: cfg.clone(),
        models: outcomes,
    };
    if let Some(dir) = &run_dir {
        write_file(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
        write_file(&dir.join("summary.csv"), &summary_csv(&reports))?;
    }
    Ok(ExperimentOutput {
        reports,
        manifest,
        run_dir,
    })
}

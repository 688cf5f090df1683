use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kp_core::harness::{
    correlate, early_stop_select, evaluate_model, final_reports, read_reports_from, robustness_csv,
    robustness_sweep, run_experiment, summary_csv, theory_report, timing_csv, timing_report, append_report,
    DatasetSource, EvalReport, ExperimentConfig, Metric, Scope, StageSeeds, TheoryConfig, SCHEMA_VERSION,
};
use kp_core::kg_store::KnownPolicy;
use kp_core::kge_models::{decode_checkpoint, save_checkpoint, train, CheckpointMeta, TrainConfig};
use kp_core::ranking::{RankingMode, StratConfig};
use kp_core::sampling::NegativeMode;
use kp_core::synth::{generate, SynthConfig};
use kp_core::{init_embeddings, KpError, ModelKind, SwConfig};
use serde::Serialize;

use crate::{
    Command, CorrelateArgs, DataArgs, EarlyStopArgs, EvalArgs, KpArgs, LoadCheckArgs, ModelArgs, ReportSelect,
    RobustnessArgs, SynthGenArgs, TheoryArgs, TimingArgs, TrainArgs,
};

pub enum Failure {
    Usage(String),
    Runtime(KpError),
}

impl From<KpError> for Failure {
    fn from(e: KpError) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn usage<T, E: std::fmt::Display>(r: Result<T, E>) -> CmdResult<T> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

pub fn run(cmd: Command) -> CmdResult {
    match cmd {
        Command::LoadCheck(a) => load_check(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Correlate(a) => correlate_cmd(a),
        Command::EarlyStop(a) => early_stop_cmd(a),
        Command::Robustness(a) => robustness_cmd(a),
        Command::Timing(a) => timing_cmd(a),
        Command::Theory(a) => theory_cmd(a),
        Command::SynthGen(a) => synth_gen(a),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    command: &'a str,
    result: T,
}

fn emit<T: Serialize>(command: &str, result: T, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(&Envelope {
        schema: SCHEMA_VERSION,
        command,
        result,
    })
    .map_err(KpError::from)?;
    match out {
        Some(path) => write(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Runtime(KpError::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })),
                _ => Ok(()),
            }
        }
    }
}

fn write(path: &Path, text: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| KpError::Io {
            path: parent.to_owned(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| {
        Failure::Runtime(KpError::Io {
            path: path.to_owned(),
            source: e,
        })
    })
}

fn mkdir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| {
        Failure::Runtime(KpError::Io {
            path: dir.to_owned(),
            source: e,
        })
    })
}

fn dataset(d: &DataArgs) -> DatasetSource {
    match &d.data_dir {
        Some(dir) => DatasetSource::tsv_dir(dir),
        None => DatasetSource::Synthetic(SynthConfig {
            n_entities: d.synth_entities,
            n_clusters: d.synth_clusters,
            seed: d.synth_seed,
            ..Default::default()
        }),
    }
}

fn train_config(m: &ModelArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: m.epochs,
        lr: m.lr,
        margin: m.margin,
        negatives_per_positive: m.negatives,
        batch_size: m.batch_size,
        seed,
        eval_every: m.eval_every,
        weight_decay: m.weight_decay,
        entity_max_norm: m.max_norm,
    }
}

fn negative_mode(s: &str) -> CmdResult<NegativeMode> {
    match s {
        "full-grid" | "full_grid" => Ok(NegativeMode::FullGrid),
        "head-tail" | "head_tail" => Ok(NegativeMode::HeadTail),
        other => Err(Failure::Usage(format!("unknown negative mode `{other}`"))),
    }
}

fn ranking_mode(s: &str) -> CmdResult<RankingMode> {
    match s {
        "filtered" => Ok(RankingMode::Filtered),
        "raw" => Ok(RankingMode::Raw),
        other => Err(Failure::Usage(format!("unknown ranking mode `{other}`"))),
    }
}

fn model_kinds(names: &[String]) -> CmdResult<Vec<ModelKind>> {
    names.iter().map(|n| usage(n.parse::<ModelKind>())).collect()
}

fn experiment_config(
    data: &DataArgs,
    model: &ModelArgs,
    kp: &KpArgs,
    models: Vec<ModelKind>,
    seed: u64,
) -> CmdResult<ExperimentConfig> {
    let cfg = ExperimentConfig {
        dataset: dataset(data),
        models,
        dim: model.dim,
        train: train_config(model, seed),
        sw: SwConfig {
            n_slices: kp.slices,
            order: kp.order,
            ..Default::default()
        },
        edges_per_entity: kp.edges_per_entity,
        negative_mode: negative_mode(&kp.negative_mode)?,
        ranking_mode: ranking_mode(&kp.ranking)?,
        known_policy: if data.exclude_valid {
            KnownPolicy::ExcludeValid
        } else {
            KnownPolicy::AllSplits
        },
        strat: StratConfig {
            beta_e: kp.beta_e,
            beta_r: kp.beta_r,
        },
        baselines: !kp.no_baselines,
        n_eval_seeds: kp.eval_seeds,
        seed,
        ..Default::default()
    };
    usage(cfg.validate())?;
    Ok(cfg)
}

#[derive(Serialize)]
struct LoadSummary {
    entities: usize,
    relations: usize,
    train: usize,
    valid: usize,
    test: usize,
    triples: usize,
    duplicates_dropped: usize,
}

fn load_check(a: LoadCheckArgs) -> CmdResult {
    let kg = DatasetSource::tsv_dir(&a.data_dir).load()?;
    emit(
        "load-check",
        LoadSummary {
            entities: kg.n_entities(),
            relations: kg.n_relations(),
            train: kg.train.len(),
            valid: kg.valid.len(),
            test: kg.test.len(),
            triples: kg.n_triples(),
            duplicates_dropped: kg.duplicates_dropped,
        },
        None,
    )
}

#[derive(Serialize)]
struct TrainSummary {
    model_kind: ModelKind,
    checkpoints: Vec<usize>,
    final_loss: Option<f64>,
    out: PathBuf,
}

fn train_cmd(a: TrainArgs) -> CmdResult {
    let kind = usage(a.model_kind.parse::<ModelKind>())?;
    let cfg = train_config(&a.model, a.seed);
    usage(cfg.validate())?;
    let mut kg = dataset(&a.data).load()?;
    if a.data.exclude_valid {
        kg.set_known_policy(KnownPolicy::ExcludeValid);
    }
    let seeds = StageSeeds::from_global(a.seed);
    let model = usage(init_embeddings(kind, kg.n_entities(), kg.n_relations(), a.model.dim, seeds.init))?;
    mkdir(&a.out)?;
    let outcome = train(model, &kg, &cfg, |cp| {
        save_checkpoint(&a.out, &format!("{kind}-e{:04}", cp.epoch), cp, &cfg)
    })?;
    emit(
        "train",
        TrainSummary {
            model_kind: kind,
            checkpoints: outcome.checkpoints.iter().map(|c| c.epoch).collect(),
            final_loss: outcome.epoch_losses.last().copied(),
            out: a.out,
        },
        None,
    )
}

#[derive(Serialize)]
struct EvalSummary {
    run_dir: PathBuf,
    reports: usize,
    failures: Vec<String>,
}

fn eval_cmd(a: EvalArgs) -> CmdResult {
    let kinds = model_kinds(&a.models)?;
    let mut cfg = experiment_config(&a.data, &a.model, &a.kp, kinds, a.seed)?;
    cfg.run_id = a.run_id.clone();
    cfg.output_dir = Some(a.out.clone());
    cfg.save_checkpoints = a.save_checkpoints;
    usage(cfg.validate())?;

    let Some(cp_dir) = &a.checkpoint_dir else {
        let out = run_experiment(&cfg)?;
        let failures = out
            .manifest
            .models
            .iter()
            .filter_map(|m| m.error.as_ref().map(|e| format!("{}: {e}", m.model_kind)))
            .collect();
        return emit(
            "eval",
            EvalSummary {
                run_dir: out.run_dir.unwrap_or_default(),
                reports: out.reports.len(),
                failures,
            },
            None,
        );
    };

    let mut kg = cfg.dataset.load()?;
    kg.set_known_policy(cfg.known_policy);
    let mut metas = Vec::new();
    let entries = fs::read_dir(cp_dir).map_err(|e| KpError::Io {
        path: cp_dir.clone(),
        source: e,
    })?;
    for entry in entries.flatten() {
        let path = entry.path();
        if path.extension().is_some_and(|x| x == "json") && path.with_extension("bin").exists() {
            let text = fs::read_to_string(&path).map_err(|e| KpError::Io {
                path: path.clone(),
                source: e,
            })?;
            let meta: CheckpointMeta = serde_json::from_str(&text).map_err(KpError::from)?;
            metas.push((meta.kind.to_string(), meta.epoch, path.with_extension("bin")));
        }
    }
    metas.sort();
    if metas.is_empty() {
        return Err(Failure::Runtime(KpError::Empty(format!("no checkpoints in {}", cp_dir.display()))));
    }
    let run_dir = a.out.join(cfg.run_id());
    mkdir(&run_dir)?;
    let jsonl = run_dir.join("reports.jsonl");
    let _ = fs::remove_file(&jsonl);
    let mut reports: Vec<EvalReport> = Vec::new();
    for (_, epoch, bin) in metas {
        let bytes = fs::read(&bin).map_err(|e| KpError::Io {
            path: bin.clone(),
            source: e,
        })?;
        let model = decode_checkpoint(&bytes)?;
        let report = evaluate_model(&kg, &model, epoch, &cfg);
        append_report(&jsonl, &report)?;
        reports.push(report);
    }
    write(&run_dir.join("summary.csv"), &summary_csv(&reports))?;
    emit(
        "eval",
        EvalSummary {
            run_dir,
            reports: reports.len(),
            failures: Vec::new(),
        },
        None,
    )
}

fn selected_reports(s: &ReportSelect) -> CmdResult<Vec<EvalReport>> {
    let mut reports = read_reports_from(&s.reports)?;
    if let Some(name) = &s.model_kind {
        let kind = usage(name.parse::<ModelKind>())?;
        reports.retain(|r| r.model_kind == kind);
    }
    reports.sort_by(|a, b| (&a.run_id, a.model_kind.to_string(), a.epoch).cmp(&(&b.run_id, b.model_kind.to_string(), b.epoch)));
    Ok(reports)
}

fn correlate_cmd(a: CorrelateArgs) -> CmdResult {
    let x = usage(a.metric_x.parse::<Metric>())?;
    let y = usage(a.metric_y.parse::<Metric>())?;
    let scope = match a.scope.as_str() {
        "intra" => Scope::Intra,
        "inter" => Scope::Inter,
        other => return Err(Failure::Usage(format!("unknown scope `{other}`"))),
    };
    let mut reports = selected_reports(&a.select)?;
    if scope == Scope::Inter {
        reports = final_reports(&reports);
    }
    let result = usage(correlate(&reports, x, y))?;
    emit("correlate", result, a.out.as_deref())
}

fn early_stop_cmd(a: EarlyStopArgs) -> CmdResult {
    let criterion = usage(a.criterion.parse::<Metric>())?;
    let metrics = a
        .metrics
        .iter()
        .map(|m| usage(m.parse::<Metric>()))
        .collect::<CmdResult<Vec<_>>>()?;
    let reports = selected_reports(&a.select)?;
    let kinds: std::collections::BTreeSet<String> = reports.iter().map(|r| r.model_kind.to_string()).collect();
    if kinds.len() > 1 {
        return Err(Failure::Usage("reports span several models; pass --model-kind".into()));
    }
    let result = usage(early_stop_select(&reports, criterion, &metrics))?;
    emit("early-stop", result, a.out.as_deref())
}

fn robustness_cmd(a: RobustnessArgs) -> CmdResult {
    let kind = usage(a.model_kind.parse::<ModelKind>())?;
    let cfg = experiment_config(&a.data, &a.model, &a.kp, vec![kind], a.seed)?;
    if a.n_seeds < 2 {
        return Err(Failure::Usage("--n-seeds must be >= 2".into()));
    }
    let rows = robustness_sweep(&cfg, &a.fractions, a.n_seeds)?;
    if let Some(dir) = &a.out {
        mkdir(dir)?;
        write(&dir.join("robustness.csv"), &robustness_csv(&rows))?;
        emit("robustness", &rows, Some(&dir.join("robustness.json")))?;
    }
    emit("robustness", rows, None)
}

fn timing_cmd(a: TimingArgs) -> CmdResult {
    let reports = selected_reports(&a.select)?;
    let report = timing_report(&reports);
    if let Some(dir) = &a.out {
        mkdir(dir)?;
        write(&dir.join("timing.csv"), &timing_csv(&report))?;
        emit("timing", &report, Some(&dir.join("timing.json")))?;
    }
    emit("timing", report, None)
}

#[derive(Serialize)]
struct TheorySummary {
    monotone: bool,
    stability_violations: usize,
    trials: usize,
    pass: bool,
    out: PathBuf,
}

fn theory_cmd(a: TheoryArgs) -> CmdResult {
    let cfg = TheoryConfig {
        noise_sigma: a.noise,
        trials: a.trials,
        n_samples: a.samples,
        seed: a.seed,
        ..Default::default()
    };
    let report = match theory_report(&cfg) {
        Err(KpError::InvalidArgument(m)) => return Err(Failure::Usage(m)),
        other => other?,
    };
    report.write(&a.out)?;
    emit(
        "theory",
        TheorySummary {
            monotone: report.monotone,
            stability_violations: report.stability.violations,
            trials: report.stability.trials.len(),
            pass: report.pass,
            out: a.out,
        },
        None,
    )
}

fn synth_gen(a: SynthGenArgs) -> CmdResult {
    let cfg = SynthConfig {
        n_entities: a.entities,
        n_clusters: a.clusters,
        n_base_relations: a.base_relations,
        n_composed_relations: a.composed_relations,
        relation_density: a.density,
        tails_per_head: a.tails_per_head,
        valid_fraction: a.valid_fraction,
        test_fraction: a.test_fraction,
        seed: a.seed,
    };
    usage(cfg.validate())?;
    let kg = generate(&cfg)?;
    mkdir(&a.out)?;
    kg.write_tsv(&a.out.join("train.tsv"), &a.out.join("valid.tsv"), &a.out.join("test.tsv"))?;
    emit(
        "synth-gen",
        LoadSummary {
            entities: kg.n_entities(),
            relations: kg.n_relations(),
            train: kg.train.len(),
            valid: kg.valid.len(),
            test: kg.test.len(),
            triples: kg.n_triples(),
            duplicates_dropped: kg.duplicates_dropped,
        },
        None,
    )
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::KernelConfig;
use crate::error::{KpError, Result};
use crate::kg_store::{load_tsv, KnowledgeGraph, KnownPolicy};
use crate::kge_models::{ModelKind, TrainConfig};
use crate::ranking::{RankingMode, StratConfig};
use crate::sampling::{NegativeMode, DEFAULT_EDGES_PER_ENTITY};
use crate::synth::{generate, SynthConfig};
use crate::transport::SwConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Tsv {
        name: String,
        train: PathBuf,
        valid: PathBuf,
        test: PathBuf,
    },
    Synthetic(SynthConfig),
}

impl DatasetSource {
    /// Directory holding `train.tsv`, `valid.tsv` and `test.tsv`.
    pub fn tsv_dir(dir: &Path) -> Self {
        let name = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        DatasetSource::Tsv {
            name,
            train: dir.join("train.tsv"),
            valid: dir.join("valid.tsv"),
            test: dir.join("test.tsv"),
        }
    }

    pub fn name(&self) -> String {
        match self {
            DatasetSource::Tsv { name, .. } => name.clone(),
            DatasetSource::Synthetic(c) => format!("synth-{}e-s{}", c.n_entities, c.seed),
        }
    }

    pub fn load(&self) -> Result<KnowledgeGraph> {
        match self {
            DatasetSource::Tsv {
                train, valid, test, ..
            } => load_tsv(train, valid, test),
            DatasetSource::Synthetic(c) => generate(c),
        }
    }
}

/// Upper bounds a config must respect; FB15K-237 sized runs fit inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanityBounds {
    pub max_entities: usize,
    pub max_relations: usize,
    pub max_triples: usize,
    pub max_dim: usize,
    pub max_epochs: usize,
}

impl Default for SanityBounds {
    fn default() -> Self {
        Self {
            max_entities: 5_000_000,
            max_relations: 100_000,
            max_triples: 100_000_000,
            max_dim: 4096,
            max_epochs: 10_000,
        }
    }
}

/// Graph shape declared ahead of loading, checked against [`SanityBounds`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

impl DatasetShape {
    pub const FB15K_237: DatasetShape = DatasetShape {
        entities: 14_541,
        relations: 237,
        triples: 272_115,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub models: Vec<ModelKind>,
    pub dim: usize,
    pub train: TrainConfig,
    pub sw: SwConfig,
    /// Sampled edges per entity for each score graph.
    pub edges_per_entity: f64,
    pub negative_mode: NegativeMode,
    pub ranking_mode: RankingMode,
    pub known_policy: KnownPolicy,
    pub strat: StratConfig,
    pub kernel: KernelConfig,
    pub baselines: bool,
    /// Independent KP samples averaged per checkpoint.
    pub n_eval_seeds: usize,
    pub output_dir: Option<PathBuf>,
    pub save_checkpoints: bool,
    pub run_id: Option<String>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic(SynthConfig::default()),
            models: vec![ModelKind::TransE],
            dim: 32,
            train: TrainConfig::default(),
            sw: SwConfig::default(),
            edges_per_entity: DEFAULT_EDGES_PER_ENTITY,
            negative_mode: NegativeMode::FullGrid,
            ranking_mode: RankingMode::Filtered,
            known_policy: KnownPolicy::AllSplits,
            strat: StratConfig::default(),
            kernel: KernelConfig::default(),
            baselines: true,
            n_eval_seeds: 1,
            output_dir: None,
            save_checkpoints: false,
            run_id: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.dataset.name(), self.seed))
    }

    /// Checks every module precondition that does not need the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KpError::InvalidArgument(m));
        if self.models.is_empty() {
            return bad("at least one model kind is required".into());
        }
        if self.dim == 0 {
            return bad("dim must be >= 1".into());
        }
        for kind in &self.models {
            if matches!(kind, ModelKind::ComplEx | ModelKind::RotatE) && !self.dim.is_multiple_of(2) {
                return bad(format!("{kind} needs an even dim, got {}", self.dim));
            }
        }
        self.train.validate()?;
        self.sw.validate()?;
        self.strat.validate()?;
        if self.baselines {
            self.kernel.validate()?;
        }
        if !(self.edges_per_entity > 0.0 && self.edges_per_entity.is_finite()) {
            return bad(format!("edges_per_entity must be positive, got {}", self.edges_per_entity));
        }
        if self.n_eval_seeds < 1 {
            return bad("n_eval_seeds must be >= 1".into());
        }
        if let DatasetSource::Synthetic(c) = &self.dataset {
            c.validate()?;
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\']) {
                return bad(format!("run id `{id}` must be a non-empty file name"));
            }
        }
        Ok(())
    }

    /// [`Self::validate`] plus size bounds for a declared dataset shape.
    pub fn validate_for(&self, shape: &DatasetShape, bounds: &SanityBounds) -> Result<()> {
        self.validate()?;
        let checks = [
            ("entities", shape.entities, bounds.max_entities),
            ("relations", shape.relations, bounds.max_relations),
            ("triples", shape.triples, bounds.max_triples),
            ("dim", self.dim, bounds.max_dim),
            ("epochs", self.train.epochs, bounds.max_epochs),
        ];
        for (what, value, max) in checks {
            if value > max {
                return Err(KpError::InvalidArgument(format!("{what} = {value} exceeds bound {max}")));
            }
        }
        if shape.entities < 2 || shape.relations < 1 {
            return Err(KpError::InvalidArgument("dataset needs >= 2 entities and >= 1 relation".into()));
        }
        Ok(())
    }
}

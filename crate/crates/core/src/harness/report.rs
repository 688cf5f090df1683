use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::kge_models::ModelKind;
use crate::ranking::RankingReport;

pub const SCHEMA_VERSION: u32 = 1;

/// JSON schema every serialized [`EvalReport`] validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../schemas/eval_report.schema.json");

/// One evaluated checkpoint.
///
/// Metric fields are `None` when their stage failed; the message is kept in
/// `errors` under the stage name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub run_id: String,
    pub model_kind: ModelKind,
    pub dataset: String,
    pub epoch: usize,
    pub kp_train: Option<f64>,
    pub kp_test: Option<f64>,
    /// Number of independent samples averaged into each KP value.
    pub kp_repeats: usize,
    pub ranking: Option<RankingReport>,
    pub strat: Option<RankingReport>,
    pub conicity: Option<f64>,
    pub avl: Option<f64>,
    pub gk_train: Option<f64>,
    pub gk_test: Option<f64>,
    pub wall_times: BTreeMap<String, f64>,
    pub seeds: BTreeMap<String, u64>,
    pub errors: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::KpTrain => self.kp_train,
            Metric::KpTest => self.kp_test,
            Metric::Mr => self.ranking.as_ref().map(|r| r.mr),
            Metric::Mrr => self.ranking.as_ref().map(|r| r.mrr),
            Metric::Hits(n) => self.ranking.as_ref().and_then(|r| r.hits_at(n)),
            Metric::StratMr => self.strat.as_ref().map(|r| r.mr),
            Metric::StratMrr => self.strat.as_ref().map(|r| r.mrr),
            Metric::StratHits(n) => self.strat.as_ref().and_then(|r| r.hits_at(n)),
            Metric::Conicity => self.conicity,
            Metric::Avl => self.avl,
            Metric::GkTrain => self.gk_train,
            Metric::GkTest => self.gk_test,
        }
    }

    /// Copy with every wall-clock field zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.wall_times.values_mut().for_each(|v| *v = 0.0);
        for rank in [&mut r.ranking, &mut r.strat].into_iter().flatten() {
            rank.wall_time_s = 0.0;
        }
        r
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    KpTrain,
    KpTest,
    Mr,
    Mrr,
    Hits(u32),
    StratMr,
    StratMrr,
    StratHits(u32),
    Conicity,
    Avl,
    GkTrain,
    GkTest,
}

impl Metric {
    /// MR-style metrics improve downwards.
    pub fn lower_is_better(self) -> bool {
        matches!(self, Metric::Mr | Metric::StratMr)
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::KpTrain => f.write_str("kp_train"),
            Metric::KpTest => f.write_str("kp_test"),
            Metric::Mr => f.write_str("mr"),
            Metric::Mrr => f.write_str("mrr"),
            Metric::Hits(n) => write!(f, "hits@{n}"),
            Metric::StratMr => f.write_str("strat_mr"),
            Metric::StratMrr => f.write_str("strat_mrr"),
            Metric::StratHits(n) => write!(f, "strat_hits@{n}"),
            Metric::Conicity => f.write_str("conicity"),
            Metric::Avl => f.write_str("avl"),
            Metric::GkTrain => f.write_str("gk_train"),
            Metric::GkTest => f.write_str("gk_test"),
        }
    }
}

impl FromStr for Metric {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let hits = |rest: &str| {
            rest.parse::<u32>()
                .map_err(|_| KpError::InvalidArgument(format!("bad hits cut-off in `{s}`")))
        };
        Ok(match s.as_str() {
            "kp_train" => Metric::KpTrain,
            "kp_test" | "kp" => Metric::KpTest,
            "mr" => Metric::Mr,
            "mrr" => Metric::Mrr,
            "strat_mr" => Metric::StratMr,
            "strat_mrr" => Metric::StratMrr,
            "conicity" => Metric::Conicity,
            "avl" => Metric::Avl,
            "gk_train" => Metric::GkTrain,
            "gk_test" => Metric::GkTest,
            other => {
                if let Some(rest) = other.strip_prefix("strat_hits@") {
                    Metric::StratHits(hits(rest)?)
                } else if let Some(rest) = other.strip_prefix("hits@") {
                    Metric::Hits(hits(rest)?)
                } else {
                    return Err(KpError::InvalidArgument(format!("unknown metric `{other}`")));
                }
            }
        })
    }
}

/// Appends one report as a JSON line and flushes.
pub fn append_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| KpError::io(path, e))?;
    let line = report.to_json_line()?;
    writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| KpError::io(path, e))
}

pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>> {
    let f = File::open(path).map_err(|e| KpError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| KpError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let report: EvalReport = serde_json::from_str(&line).map_err(|e| {
            KpError::InvalidArgument(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        if report.schema != SCHEMA_VERSION {
            return Err(KpError::InvalidArgument(format!(
                "{}:{}: unsupported schema {}",
                path.display(),
                i + 1,
                report.schema
            )));
        }
        out.push(report);
    }
    Ok(out)
}

/// Reads a report file, or every `reports.jsonl` below a directory.
pub fn read_reports_from(path: &Path) -> Result<Vec<EvalReport>> {
    if !path.is_dir() {
        return read_reports(path);
    }
    let mut files = Vec::new();
    collect_report_files(path, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_reports(&f)?);
    }
    Ok(out)
}

fn collect_report_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| KpError::io(dir, e))? {
        let path = entry.map_err(|e| KpError::io(dir, e))?.path();
        if path.is_dir() {
            collect_report_files(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "reports.jsonl") {
            out.push(path);
        }
    }
    Ok(())
}

const SUMMARY_METRICS: [Metric; 10] = [
    Metric::KpTrain,
    Metric::KpTest,
    Metric::Mr,
    Metric::Mrr,
    Metric::Hits(1),
    Metric::Hits(3),
    Metric::Hits(10),
    Metric::StratMrr,
    Metric::Conicity,
    Metric::GkTest,
];

/// One row per report; undefined metrics are left empty.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("run_id,model_kind,epoch");
    for m in SUMMARY_METRICS {
        let _ = write!(out, ",{m}");
    }
    out.push_str(",kp_test_s,ranking_s\n");
    for r in reports {
        let _ = write!(out, "{},{},{}", r.run_id, r.model_kind, r.epoch);
        for m in SUMMARY_METRICS {
            match r.metric(m) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        let time = |k: &str| r.wall_times.get(k).map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, ",{},{}", time("kp_test"), time("ranking"));
    }
    out
}

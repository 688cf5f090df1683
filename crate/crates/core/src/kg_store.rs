//! Triple storage, vocabulary interning and membership queries.
//!
//! Entities and relations are interned to dense ids in first-seen order while
//! reading `train`, then `valid`, then `test`. The membership index over the
//! union of splits drives negative rejection and filtered ranking.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub const fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// Which splits count as "known" for negative rejection and filtering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnownPolicy {
    #[default]
    AllSplits,
    /// Validation triples are not treated as known.
    ExcludeValid,
}

#[derive(Default)]
struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    pub entity_names: Vec<String>,
    pub relation_names: Vec<String>,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    known: HashSet<Triple>,
    policy: KnownPolicy,
    /// Number of duplicate lines dropped while loading, summed over splits.
    pub duplicates_dropped: usize,
}

impl KnowledgeGraph {
    /// Builds a graph from named triples. Duplicates within a split are
    /// dropped and counted.
    pub fn from_named<S: AsRef<str>>(
        train: &[[S; 3]],
        valid: &[[S; 3]],
        test: &[[S; 3]],
    ) -> Self {
        let mut entities = Interner::default();
        let mut relations = Interner::default();
        let mut duplicates = 0;
        let mut intern_split = |rows: &[[S; 3]]| {
            let mut seen = HashSet::with_capacity(rows.len());
            let mut out = Vec::with_capacity(rows.len());
            for [h, r, t] in rows {
                let triple = Triple::new(
                    entities.intern(h.as_ref()),
                    relations.intern(r.as_ref()),
                    entities.intern(t.as_ref()),
                );
                if seen.insert(triple) {
                    out.push(triple);
                } else {
                    duplicates += 1;
                }
            }
            out
        };
        let train = intern_split(train);
        let valid = intern_split(valid);
        let test = intern_split(test);
        let mut kg = Self {
            entity_names: entities.names,
            relation_names: relations.names,
            train,
            valid,
            test,
            known: HashSet::new(),
            policy: KnownPolicy::AllSplits,
            duplicates_dropped: duplicates,
        };
        kg.rebuild_known();
        kg
    }

    /// Builds a graph directly from id triples with anonymous names `e{i}` / `r{i}`.
    pub fn from_ids(
        n_entities: usize,
        n_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let mut kg = Self {
            entity_names: (0..n_entities).map(|i| format!("e{i}")).collect(),
            relation_names: (0..n_relations).map(|i| format!("r{i}")).collect(),
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
            known: HashSet::new(),
            policy: KnownPolicy::AllSplits,
            duplicates_dropped: 0,
        };
        let dedup = |rows: Vec<Triple>, kg: &Self| -> Result<Vec<Triple>> {
            let mut seen = HashSet::with_capacity(rows.len());
            let mut out = Vec::with_capacity(rows.len());
            for t in rows {
                kg.check_triple(&t)?;
                if seen.insert(t) {
                    out.push(t);
                }
            }
            Ok(out)
        };
        kg.train = dedup(train, &kg)?;
        kg.valid = dedup(valid, &kg)?;
        kg.test = dedup(test, &kg)?;
        kg.rebuild_known();
        Ok(kg)
    }

    pub fn n_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relation_names.len()
    }

    pub fn n_triples(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn known_policy(&self) -> KnownPolicy {
        self.policy
    }

    pub fn set_known_policy(&mut self, policy: KnownPolicy) {
        self.policy = policy;
        self.rebuild_known();
    }

    fn rebuild_known(&mut self) {
        let mut known = HashSet::with_capacity(self.n_triples());
        known.extend(self.train.iter().copied());
        if self.policy == KnownPolicy::AllSplits {
            known.extend(self.valid.iter().copied());
        }
        known.extend(self.test.iter().copied());
        self.known = known;
    }

    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        let ne = self.n_entities() as u32;
        let nr = self.n_relations() as u32;
        if t.head >= ne || t.tail >= ne || t.relation >= nr {
            return Err(KpError::OutOfRange(format!(
                "triple {t} outside vocabulary ({ne} entities, {nr} relations)"
            )));
        }
        Ok(())
    }

    /// Membership in the known index (all splits under the default policy).
    pub fn contains(&self, t: &Triple) -> Result<bool> {
        self.check_triple(t)?;
        Ok(self.known.contains(t))
    }

    /// Unchecked membership for hot loops where ids are already validated.
    #[inline]
    pub(crate) fn is_known(&self, t: &Triple) -> bool {
        self.known.contains(t)
    }

    /// Per-entity and per-relation occurrence counts over the train split.
    pub fn train_frequencies(&self) -> (Vec<u64>, Vec<u64>) {
        let mut ent = vec![0u64; self.n_entities()];
        let mut rel = vec![0u64; self.n_relations()];
        for t in &self.train {
            ent[t.head as usize] += 1;
            ent[t.tail as usize] += 1;
            rel[t.relation as usize] += 1;
        }
        (ent, rel)
    }

    /// Writes one split as `head\trelation\ttail` lines using vocabulary names.
    pub fn write_split(&self, split: Split, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for t in self.split(split) {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.entity_names[t.head as usize],
                self.relation_names[t.relation as usize],
                self.entity_names[t.tail as usize]
            )
            .expect("write to Vec");
        }
        fs::write(path, out).map_err(|e| KpError::io(path, e))
    }

    pub fn write_tsv(&self, train: &Path, valid: &Path, test: &Path) -> Result<()> {
        self.write_split(Split::Train, train)?;
        self.write_split(Split::Valid, valid)?;
        self.write_split(Split::Test, test)
    }
}

fn read_rows(path: &Path) -> Result<Vec<[String; 3]>> {
    let text = fs::read_to_string(path).map_err(|e| KpError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(KpError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                found: fields.len(),
            });
        }
        rows.push([
            fields[0].to_owned(),
            fields[1].to_owned(),
            fields[2].to_owned(),
        ]);
    }
    Ok(rows)
}

/// Loads the three standard splits.
pub fn load_tsv(train: &Path, valid: &Path, test: &Path) -> Result<KnowledgeGraph> {
    let train = read_rows(train)?;
    let valid = read_rows(valid)?;
    let test = read_rows(test)?;
    Ok(KnowledgeGraph::from_named(&train, &valid, &test))
}

//! 0-dimensional persistence of score graphs under edge filtrations.
//!
//! Every vertex is born at a shared `baseline`. Edges enter in weight order
//! (ascending for the sublevel filtration, descending for the superlevel one)
//! and each merge of two components kills one of them. All components share a
//! birth, so the elder rule falls back to vertex ids: the component holding
//! the smaller vertex id survives. Components alive at the end are closed at
//! the shared `cap` and flagged essential.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::sampling::ScoredGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sublevel,
    Superlevel,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Sublevel => "sub",
            Direction::Superlevel => "super",
        })
    }
}

impl FromStr for Direction {
    type Err = KpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sub" | "sublevel" => Ok(Direction::Sublevel),
            "super" | "superlevel" => Ok(Direction::Superlevel),
            other => Err(KpError::InvalidArgument(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
    pub direction: Direction,
    /// Never merged; `death` is the cap standing in for infinity.
    pub essential: bool,
}

impl PersistencePair {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// The `[baseline, cap]` window shared by diagrams that will be compared.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub baseline: f64,
    pub cap: f64,
}

impl Frame {
    /// Smallest frame covering every edge weight of `graphs`; `(0, 0)` when
    /// there are no edges at all.
    pub fn spanning<'a>(graphs: impl IntoIterator<Item = &'a ScoredGraph>) -> Frame {
        let range = graphs
            .into_iter()
            .filter_map(ScoredGraph::weight_range)
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)));
        match range {
            Some((baseline, cap)) => Frame { baseline, cap },
            None => Frame {
                baseline: 0.0,
                cap: 0.0,
            },
        }
    }

    fn check_covers(&self, g: &ScoredGraph) -> Result<()> {
        if !(self.baseline.is_finite() && self.cap.is_finite() && self.baseline <= self.cap) {
            return Err(KpError::InvalidArgument(format!(
                "invalid frame [{}, {}]",
                self.baseline, self.cap
            )));
        }
        if let Some((lo, hi)) = g.weight_range() {
            if lo < self.baseline || hi > self.cap {
                return Err(KpError::InvalidArgument(format!(
                    "frame [{}, {}] does not cover weights [{lo}, {hi}]",
                    self.baseline, self.cap
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePair>,
    pub baseline: f64,
    pub cap: f64,
}

impl PersistenceDiagram {
    pub fn empty(frame: Frame) -> Self {
        Self {
            points: Vec::new(),
            baseline: frame.baseline,
            cap: frame.cap,
        }
    }

    pub fn frame(&self) -> Frame {
        Frame {
            baseline: self.baseline,
            cap: self.cap,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coords(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().map(|p| (p.birth, p.death))
    }

    /// Scales every coordinate and the frame by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| PersistencePair {
                    birth: p.birth * c,
                    death: p.death * c,
                    ..*p
                })
                .collect(),
            baseline: self.baseline * c,
            cap: self.cap * c,
        }
    }

    /// CSV with header `direction,birth,death`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,birth,death\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.direction, p.birth, p.death);
        }
        out
    }

    /// Parses [`Self::to_csv`] output. The frame is taken from `frame`, or
    /// from the extreme coordinates when absent.
    pub fn from_csv(text: &str, frame: Option<Frame>) -> Result<Self> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("direction")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let bad = || KpError::InvalidArgument(format!("diagram csv line {}: `{line}`", i + 1));
            if fields.len() != 3 {
                return Err(bad());
            }
            let direction = fields[0].parse()?;
            let birth: f64 = fields[1].trim().parse().map_err(|_| bad())?;
            let death: f64 = fields[2].trim().parse().map_err(|_| bad())?;
            if !(birth.is_finite() && death.is_finite() && death >= birth) {
                return Err(bad());
            }
            points.push(PersistencePair {
                birth,
                death,
                direction,
                essential: false,
            });
        }
        let frame = frame.unwrap_or_else(|| {
            let lo = points.iter().map(|p| p.birth).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p.death).fold(f64::NEG_INFINITY, f64::max);
            if points.is_empty() {
                Frame {
                    baseline: 0.0,
                    cap: 0.0,
                }
            } else {
                Frame {
                    baseline: lo,
                    cap: hi,
                }
            }
        });
        Ok(Self {
            points,
            baseline: frame.baseline,
            cap: frame.cap,
        })
    }
}

struct Components {
    parent: Vec<u32>,
    size: Vec<u32>,
    /// Smallest vertex id in the component, indexed by root.
    eldest: Vec<u32>,
}

impl Components {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            eldest: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[v as usize] != root {
            let next = self.parent[v as usize];
            self.parent[v as usize] = root;
            v = next;
        }
        root
    }

    /// Merges the components of `a` and `b`; returns false if already joined.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        let eldest = self.eldest[ra as usize].min(self.eldest[rb as usize]);
        self.eldest[big as usize] = eldest;
        true
    }
}

fn validate_graph(g: &ScoredGraph) -> Result<()> {
    if g.n_nodes == 0 {
        return Err(KpError::Empty("graph has no vertices".into()));
    }
    let n = g.n_nodes as u32;
    for e in &g.edges {
        if e.head >= n || e.tail >= n {
            return Err(KpError::OutOfRange(format!(
                "edge ({}, {}) in a graph of {} vertices",
                e.head, e.tail, g.n_nodes
            )));
        }
        if !e.weight.is_finite() {
            return Err(KpError::InvalidArgument(format!(
                "non-finite edge weight {}",
                e.weight
            )));
        }
    }
    Ok(())
}

/// Elder-rule sweep over `weights` processed in ascending order. Returns the
/// merge values in processing order and the number of surviving components.
fn sweep(g: &ScoredGraph, weights: &[f64]) -> (Vec<f64>, usize) {
    let mut order: Vec<(f64, u32, u32)> = g
        .edges
        .iter()
        .zip(weights)
        .map(|(e, &w)| (w, e.head, e.tail))
        .collect();
    // stable: equal weights keep input order
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut uf = Components::new(g.n_nodes);
    let mut merges = Vec::with_capacity(g.n_nodes.saturating_sub(1));
    for (w, head, tail) in order {
        if uf.union(head, tail) {
            merges.push(w);
            if merges.len() + 1 == g.n_nodes {
                break;
            }
        }
    }
    let survivors = g.n_nodes - merges.len();
    (merges, survivors)
}

fn resolve_frame(g: &ScoredGraph, frame: Option<Frame>) -> Result<Frame> {
    let frame = frame.unwrap_or_else(|| Frame::spanning([g]));
    frame.check_covers(g)?;
    Ok(frame)
}

/// Diagram of the filtration adding edges with `weight <= a` as `a` grows.
pub fn sublevel_pd(g: &ScoredGraph, frame: Option<Frame>) -> Result<PersistenceDiagram> {
    validate_graph(g)?;
    let frame = resolve_frame(g, frame)?;
    let weights: Vec<f64> = g.weights().collect();
    let (merges, survivors) = sweep(g, &weights);
    let mut points = Vec::with_capacity(g.n_nodes);
    points.extend(merges.into_iter().map(|w| PersistencePair {
        birth: frame.baseline,
        death: w,
        direction: Direction::Sublevel,
        essential: false,
    }));
    points.extend((0..survivors).map(|_| PersistencePair {
        birth: frame.baseline,
        death: frame.cap,
        direction: Direction::Sublevel,
        essential: true,
    }));
    Ok(PersistenceDiagram {
        points,
        baseline: frame.baseline,
        cap: frame.cap,
    })
}

/// Diagram of the filtration adding edges with `weight >= a` as `a` falls.
/// Computed as the sublevel diagram of the negated graph mapped back, so a
/// merge at weight `w` becomes the point `(w, cap)`.
pub fn superlevel_pd(g: &ScoredGraph, frame: Option<Frame>) -> Result<PersistenceDiagram> {
    validate_graph(g)?;
    let frame = resolve_frame(g, frame)?;
    let negated: Vec<f64> = g.weights().map(|w| -w).collect();
    let (merges, survivors) = sweep(g, &negated);
    let (lo, hi) = (-frame.cap, -frame.baseline);
    let mut points = Vec::with_capacity(g.n_nodes);
    // a point (lo, m) of the negated sweep maps to (-m, -lo)
    points.extend(merges.into_iter().map(|m| PersistencePair {
        birth: -m,
        death: -lo,
        direction: Direction::Superlevel,
        essential: false,
    }));
    points.extend((0..survivors).map(|_| PersistencePair {
        birth: -hi,
        death: -lo,
        direction: Direction::Superlevel,
        essential: true,
    }));
    Ok(PersistenceDiagram {
        points,
        baseline: frame.baseline,
        cap: frame.cap,
    })
}

/// Concatenation of the sublevel and superlevel diagrams.
pub fn graph_pd(g: &ScoredGraph, frame: Option<Frame>) -> Result<PersistenceDiagram> {
    let frame = resolve_frame(g, frame)?;
    let mut pd = sublevel_pd(g, Some(frame))?;
    pd.points.extend(superlevel_pd(g, Some(frame))?.points);
    Ok(pd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Polarity;

    fn graph(n: usize, edges: &[(u32, u32, f64)]) -> ScoredGraph {
        ScoredGraph::from_weighted_edges(n, edges.iter().copied(), Polarity::Positive)
    }

    fn sorted_pairs(pd: &PersistenceDiagram) -> Vec<(f64, f64)> {
        let mut v: Vec<_> = pd.coords().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    const FRAME: Frame = Frame {
        baseline: 1.0,
        cap: 2.0,
    };

    #[test]
    fn chain_sublevel() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let pd = sublevel_pd(&g, Some(FRAME)).unwrap();
        assert_eq!(sorted_pairs(&pd), vec![(1.0, 1.0), (1.0, 2.0), (1.0, 2.0)]);
        assert_eq!(pd.points.iter().filter(|p| p.essential).count(), 1);
    }

    #[test]
    fn chain_superlevel() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let pd = superlevel_pd(&g, Some(FRAME)).unwrap();
        // descending sweep: w=2 merges first, then w=1
        assert_eq!(sorted_pairs(&pd), vec![(1.0, 2.0), (1.0, 2.0), (2.0, 2.0)]);
        let mut pers: Vec<f64> = pd.points.iter().map(|p| p.persistence()).collect();
        pers.sort_by(f64::total_cmp);
        assert_eq!(pers, vec![0.0, 1.0, 1.0]);
        assert!(pd.points.iter().all(|p| p.death >= p.birth));
    }

    #[test]
    fn chain_concatenation() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let pd = graph_pd(&g, Some(FRAME)).unwrap();
        assert_eq!(pd.len(), 6);
        assert_eq!(
            sorted_pairs(&pd),
            vec![(1.0, 1.0), (1.0, 2.0), (1.0, 2.0), (1.0, 2.0), (1.0, 2.0), (2.0, 2.0)]
        );
    }

    #[test]
    fn edgeless_and_single() {
        let f = Frame {
            baseline: -1.0,
            cap: 3.0,
        };
        for n in [1usize, 4] {
            let g = graph(n, &[]);
            for pd in [sublevel_pd(&g, Some(f)).unwrap(), superlevel_pd(&g, Some(f)).unwrap()] {
                assert_eq!(pd.len(), n);
                assert!(pd.coords().all(|c| c == (-1.0, 3.0)));
            }
            assert_eq!(graph_pd(&g, Some(f)).unwrap().len(), 2 * n);
        }
    }

    #[test]
    fn constant_weights_are_symmetric() {
        let g = graph(4, &[(0, 1, 0.5), (2, 3, 0.5), (1, 2, 0.5), (0, 3, 0.5)]);
        let sub = sublevel_pd(&g, None).unwrap();
        let sup = superlevel_pd(&g, None).unwrap();
        assert_eq!(sorted_pairs(&sub), sorted_pairs(&sup));
    }

    #[test]
    fn errors() {
        assert!(matches!(sublevel_pd(&graph(0, &[]), None), Err(KpError::Empty(_))));
        let g = graph(2, &[(0, 1, 5.0)]);
        assert!(sublevel_pd(&g, Some(FRAME)).is_err());
        assert!(sublevel_pd(&graph(2, &[(0, 2, 1.0)]), None).is_err());
        assert!(sublevel_pd(&graph(2, &[(0, 1, f64::NAN)]), None).is_err());
    }

    #[test]
    fn elder_rule_keeps_smallest_vertex() {
        // merges never change which component is essential when ids break ties
        let g = graph(3, &[(2, 1, 1.0), (1, 0, 1.5)]);
        let pd = sublevel_pd(&g, None).unwrap();
        assert_eq!(pd.points.len(), 3);
        assert_eq!(pd.points.iter().filter(|p| p.essential).count(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        let pd = graph_pd(&g, Some(FRAME)).unwrap();
        let back = PersistenceDiagram::from_csv(&pd.to_csv(), Some(FRAME)).unwrap();
        assert_eq!(back.coords().collect::<Vec<_>>(), pd.coords().collect::<Vec<_>>());
        assert!(PersistenceDiagram::from_csv("direction,birth,death\nsub,2,1\n", None).is_err());
    }
}

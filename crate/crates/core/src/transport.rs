//! Diagram distances: sliced and exact Wasserstein, and the KP score.
//!
//! Points live in the Euclidean plane. A point `(b, d)` can always be matched
//! to its orthogonal projection `((b+d)/2, (b+d)/2)` on the diagonal, at
//! distance `(d - b) / sqrt(2)`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};
use crate::persistence::{graph_pd, Frame, PersistenceDiagram};
use crate::sampling::ScoredGraph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceSampling {
    /// Directions drawn uniformly on the half-circle from the seed.
    #[default]
    MonteCarlo,
    /// Evenly spaced midpoints of the half-circle; ignores the seed.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwConfig {
    pub n_slices: usize,
    /// 1 or 2.
    pub order: u32,
    pub seed: u64,
    pub include_diagonal_projections: bool,
    #[serde(default)]
    pub sampling: SliceSampling,
}

impl Default for SwConfig {
    fn default() -> Self {
        Self {
            n_slices: 100,
            order: 2,
            seed: 0,
            include_diagonal_projections: true,
            sampling: SliceSampling::MonteCarlo,
        }
    }
}

impl SwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slices < 1 {
            return Err(KpError::InvalidArgument("n_slices must be >= 1".into()));
        }
        check_order(self.order)
    }

    /// Slice angles in `[-pi/2, pi/2)`.
    pub fn directions(&self) -> Vec<f64> {
        match self.sampling {
            SliceSampling::MonteCarlo => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..self.n_slices)
                    .map(|_| rng.random_range(-FRAC_PI_2..FRAC_PI_2))
                    .collect()
            }
            SliceSampling::Grid => {
                let step = PI / self.n_slices as f64;
                (0..self.n_slices)
                    .map(|k| -FRAC_PI_2 + step * (k as f64 + 0.5))
                    .collect()
            }
        }
    }
}

fn check_order(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(KpError::InvalidArgument(format!("order must be 1 or 2, got {p}")))
    }
}

fn check_frames(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> Result<()> {
    if d1.baseline != d2.baseline || d1.cap != d2.cap {
        return Err(KpError::FrameMismatch(format!(
            "[{}, {}] vs [{}, {}]",
            d1.baseline, d1.cap, d2.baseline, d2.cap
        )));
    }
    Ok(())
}

#[inline]
fn diagonal_projection((b, d): (f64, f64)) -> (f64, f64) {
    let m = 0.5 * (b + d);
    (m, m)
}

#[inline]
fn pow_p(x: f64, p: u32) -> f64 {
    if p == 1 {
        x
    } else {
        x * x
    }
}

/// Distinct points with multiplicities. Points on the lines `birth =
/// baseline`, `death = cap` and `birth = death` are grouped and ordered along
/// their line, so every slice projects each group to a monotone run and the
/// per-slice sort only has to merge a few runs.
fn atoms(points: impl Iterator<Item = (f64, f64)>, frame: Frame) -> Vec<((f64, f64), u64)> {
    let group = |&(b, d): &(f64, f64)| {
        if b == frame.baseline {
            0
        } else if d == frame.cap {
            1
        } else if b == d {
            2
        } else {
            3
        }
    };
    let mut pts: Vec<(f64, f64)> = points.collect();
    pts.sort_unstable_by(|x, y| {
        group(x)
            .cmp(&group(y))
            .then(x.0.total_cmp(&y.0))
            .then(x.1.total_cmp(&y.1))
    });
    let mut out: Vec<((f64, f64), u64)> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last_mut() {
            Some((q, n)) if *q == p => *n += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

/// 1D optimal transport cost between two weighted point sets of equal total
/// mass: walk both sorted lists and pair off mass in order.
fn sorted_cost(xs: &mut [(f64, u64)], ys: &mut [(f64, u64)], p: u32) -> f64 {
    // stable sort: it detects and merges the presorted runs from `atoms`
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    ys.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut i, mut j) = (0, 0);
    let (mut left_x, mut left_y) = (xs[0].1, ys[0].1);
    let mut total = 0.0;
    loop {
        let m = left_x.min(left_y);
        total += m as f64 * pow_p((xs[i].0 - ys[j].0).abs(), p);
        left_x -= m;
        left_y -= m;
        if left_x == 0 {
            i += 1;
            if i == xs.len() {
                break;
            }
            left_x = xs[i].1;
        }
        if left_y == 0 {
            j += 1;
            if j == ys.len() {
                break;
            }
            left_y = ys[j].1;
        }
    }
    total
}

fn slice_cost(a: &[((f64, f64), u64)], b: &[((f64, f64), u64)], theta: f64, p: u32) -> f64 {
    let (s, c) = theta.sin_cos();
    let mut xs: Vec<(f64, u64)> = a.iter().map(|&((u, v), n)| (u * c + v * s, n)).collect();
    let mut ys: Vec<(f64, u64)> = b.iter().map(|&((u, v), n)| (u * c + v * s, n)).collect();
    sorted_cost(&mut xs, &mut ys, p)
}

type Atoms = [((f64, f64), u64)];

#[cfg(feature = "parallel")]
fn slice_costs(a: &Atoms, b: &Atoms, thetas: &[f64], p: u32) -> Vec<f64> {
    use rayon::prelude::*;
    thetas.par_iter().map(|&t| slice_cost(a, b, t, p)).collect()
}

#[cfg(not(feature = "parallel"))]
fn slice_costs(a: &Atoms, b: &Atoms, thetas: &[f64], p: u32) -> Vec<f64> {
    thetas.iter().map(|&t| slice_cost(a, b, t, p)).collect()
}

/// Monte Carlo sliced Wasserstein distance `(mean_theta W_p^p)^(1/p)`.
///
/// With diagonal projections on, each diagram is padded with the diagonal
/// projections of the other's points, so both projected sets have
/// `|d1| + |d2|` elements. Coincident points are merged into weighted atoms
/// before projection. Per-slice values are computed independently and
/// summed in slice order, so the result does not depend on thread count.
pub fn sliced_wasserstein(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    cfg: &SwConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_frames(d1, d2)?;
    if d1.is_empty() && d2.is_empty() {
        return Ok(0.0);
    }
    let (a, b) = if cfg.include_diagonal_projections {
        (
            atoms(d1.coords().chain(d2.coords().map(diagonal_projection)), d1.frame()),
            atoms(d2.coords().chain(d1.coords().map(diagonal_projection)), d1.frame()),
        )
    } else {
        if d1.len() != d2.len() {
            return Err(KpError::InvalidArgument(format!(
                "diagram sizes differ ({} vs {}) and diagonal projections are off",
                d1.len(),
                d2.len()
            )));
        }
        if d1.is_empty() {
            return Ok(0.0);
        }
        (atoms(d1.coords(), d1.frame()), atoms(d2.coords(), d1.frame()))
    };
    let thetas = cfg.directions();
    let costs = slice_costs(&a, &b, &thetas, cfg.order);
    let mean = costs.iter().sum::<f64>() / thetas.len() as f64;
    Ok(if cfg.order == 1 { mean } else { mean.sqrt() })
}

/// Default combined point limit for [`exact_wasserstein`].
pub const EXACT_POINT_LIMIT: usize = 5_000;

/// Cost of matching two points: Euclidean distance to the power `p`.
#[inline]
pub fn point_cost(x: (f64, f64), y: (f64, f64), p: u32) -> f64 {
    let sq = (x.0 - y.0).powi(2) + (x.1 - y.1).powi(2);
    if p == 2 {
        sq
    } else {
        sq.sqrt()
    }
}

/// Cost of sending a point to the diagonal.
#[inline]
pub fn diagonal_cost((b, d): (f64, f64), p: u32) -> f64 {
    pow_p((d - b).abs() / SQRT_2, p)
}

/// Total `p`-cost of a partial matching, where `matching[i]` is the partner of
/// `d1` point `i` in `d2` (or `None` for the diagonal). Unmatched `d2` points
/// go to the diagonal. Summation order is fixed: `d1` points in order, then
/// unmatched `d2` points in order.
pub fn matching_cost(
    d1: &[(f64, f64)],
    d2: &[(f64, f64)],
    matching: &[Option<usize>],
    p: u32,
) -> f64 {
    let mut used = vec![false; d2.len()];
    let mut total = 0.0;
    for (i, &x) in d1.iter().enumerate() {
        total += match matching[i] {
            Some(j) => {
                used[j] = true;
                point_cost(x, d2[j], p)
            }
            None => diagonal_cost(x, p),
        };
    }
    for (j, &y) in d2.iter().enumerate() {
        if !used[j] {
            total += diagonal_cost(y, p);
        }
    }
    total
}

/// Rectangular assignment (rows <= cols) by shortest augmenting paths with
/// potentials. Returns the column assigned to each row.
fn assign(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    debug_assert!(rows <= cols);
    // 1-based arrays; column 0 is the virtual source
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![f64::INFINITY; cols + 1];
    let mut used = vec![false; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * cols..i0 * cols];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            result[owner[j] - 1] = j - 1;
        }
    }
    result
}

/// Optimal partial matching between two point sets with the diagonal as
/// slack. Returns `(sum of p-costs, matching)`; see [`matching_cost`].
pub fn optimal_matching(
    d1: &[(f64, f64)],
    d2: &[(f64, f64)],
    p: u32,
) -> (f64, Vec<Option<usize>>) {
    let (n1, n2) = (d1.len(), d2.len());
    if n1 == 0 {
        return (matching_cost(d1, d2, &[], p), Vec::new());
    }
    // columns: d2 points, then one private diagonal slot per d1 point.
    // Matching x to y is charged c(x, y) - diag(y) so that leaving y
    // unmatched costs nothing extra inside the assignment.
    let cols = n2 + n1;
    let mut cost = vec![f64::INFINITY; n1 * cols];
    for (i, &x) in d1.iter().enumerate() {
        let row = &mut cost[i * cols..(i + 1) * cols];
        for (j, &y) in d2.iter().enumerate() {
            row[j] = point_cost(x, y, p) - diagonal_cost(y, p);
        }
        row[n2 + i] = diagonal_cost(x, p);
    }
    let assignment = assign(&cost, n1, cols);
    let matching: Vec<Option<usize>> = assignment
        .into_iter()
        .map(|j| (j < n2).then_some(j))
        .collect();
    (matching_cost(d1, d2, &matching, p), matching)
}

/// Exact `p`-Wasserstein distance between diagrams.
pub fn exact_wasserstein(d1: &PersistenceDiagram, d2: &PersistenceDiagram, p: u32) -> Result<f64> {
    exact_wasserstein_with_limit(d1, d2, p, EXACT_POINT_LIMIT)
}

pub fn exact_wasserstein_with_limit(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: u32,
    limit: usize,
) -> Result<f64> {
    check_order(p)?;
    check_frames(d1, d2)?;
    let size = d1.len() + d2.len();
    if size > limit {
        return Err(KpError::TooLarge { size, limit });
    }
    let a: Vec<_> = d1.coords().collect();
    let b: Vec<_> = d2.coords().collect();
    let (total, _) = optimal_matching(&a, &b, p);
    Ok(if p == 1 { total } else { total.sqrt() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct KpDetails {
    pub kp: f64,
    pub frame: Frame,
    pub positive: PersistenceDiagram,
    pub negative: PersistenceDiagram,
}

/// KP together with the diagrams it was computed from.
pub fn kp_details(g_pos: &ScoredGraph, g_neg: &ScoredGraph, cfg: &SwConfig) -> Result<KpDetails> {
    if g_pos.edges.len() != g_neg.edges.len() {
        return Err(KpError::InvalidArgument(format!(
            "positive and negative graphs must have equal edge counts ({} vs {})",
            g_pos.edges.len(),
            g_neg.edges.len()
        )));
    }
    let frame = Frame::spanning([g_pos, g_neg]);
    let positive = graph_pd(g_pos, Some(frame))?;
    let negative = graph_pd(g_neg, Some(frame))?;
    let kp = sliced_wasserstein(&positive, &negative, cfg)?;
    Ok(KpDetails {
        kp,
        frame,
        positive,
        negative,
    })
}

/// Knowledge persistence: sliced Wasserstein distance between the diagrams
/// of the positive and negative score graphs in a shared frame.
pub fn kp_score(g_pos: &ScoredGraph, g_neg: &ScoredGraph, cfg: &SwConfig) -> Result<f64> {
    kp_details(g_pos, g_neg, cfg).map(|d| d.kp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::{Direction, PersistencePair};
    use crate::sampling::Polarity;

    fn pd(points: &[(f64, f64)], frame: Frame) -> PersistenceDiagram {
        PersistenceDiagram {
            points: points
                .iter()
                .map(|&(birth, death)| PersistencePair {
                    birth,
                    death,
                    direction: Direction::Sublevel,
                    essential: false,
                })
                .collect(),
            baseline: frame.baseline,
            cap: frame.cap,
        }
    }

    const F: Frame = Frame {
        baseline: 0.0,
        cap: 2.0,
    };

    #[test]
    fn identity_is_zero() {
        let d = pd(&[(0.0, 1.0), (0.5, 2.0), (0.0, 0.0)], F);
        for sampling in [SliceSampling::MonteCarlo, SliceSampling::Grid] {
            let cfg = SwConfig {
                sampling,
                ..Default::default()
            };
            assert_eq!(sliced_wasserstein(&d, &d, &cfg).unwrap(), 0.0);
        }
        assert_eq!(exact_wasserstein(&d, &d, 2).unwrap(), 0.0);
    }

    #[test]
    fn empty_and_mismatch() {
        let cfg = SwConfig::default();
        assert_eq!(
            sliced_wasserstein(&pd(&[], F), &pd(&[], F), &cfg).unwrap(),
            0.0
        );
        let other = Frame {
            baseline: 0.0,
            cap: 3.0,
        };
        assert!(matches!(
            sliced_wasserstein(&pd(&[(0.0, 1.0)], F), &pd(&[(0.0, 1.0)], other), &cfg),
            Err(KpError::FrameMismatch(_))
        ));
        let no_diag = SwConfig {
            include_diagonal_projections: false,
            ..cfg
        };
        assert!(sliced_wasserstein(&pd(&[(0.0, 1.0)], F), &pd(&[], F), &no_diag).is_err());
        assert!(SwConfig {
            order: 3,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn on_diagonal_point_is_free() {
        let a = pd(&[(0.0, 2.0)], F);
        let b = pd(&[(0.0, 2.0), (1.0, 1.0)], F);
        assert_eq!(exact_wasserstein(&a, &b, 2).unwrap(), 0.0);
        assert_eq!(exact_wasserstein(&a, &b, 1).unwrap(), 0.0);
    }

    #[test]
    fn single_point_against_empty() {
        let a = pd(&[(0.0, 1.0)], F);
        let e = pd(&[], F);
        let w = exact_wasserstein(&a, &e, 2).unwrap();
        assert!((w - 1.0 / SQRT_2).abs() < 1e-15);
        // per slice: |<(-1/2, 1/2), theta>|^2, mean 1/4 over the half circle
        let cfg = SwConfig {
            n_slices: 1000,
            sampling: SliceSampling::Grid,
            ..Default::default()
        };
        let sw = sliced_wasserstein(&a, &e, &cfg).unwrap();
        assert!((sw - 0.5).abs() < 1e-9, "{sw}");
    }

    #[test]
    fn exact_size_limit() {
        let a = pd(&[(0.0, 1.0), (0.0, 2.0)], F);
        assert!(matches!(
            exact_wasserstein_with_limit(&a, &a, 2, 3),
            Err(KpError::TooLarge { size: 4, limit: 3 })
        ));
    }

    #[test]
    fn assignment_small_square() {
        // optimum is rows -> (1, 0, 2): 1 + 2 + 2
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = assign(&cost, 3, 3);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn kp_of_identical_graphs_is_zero() {
        let g = ScoredGraph::from_weighted_edges(
            4,
            [(0, 1, 0.3), (1, 2, -0.2), (2, 3, 1.0)],
            Polarity::Positive,
        );
        let mut neg = g.clone();
        neg.polarity = Polarity::Negative;
        assert_eq!(kp_score(&g, &neg, &SwConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn separated_supports_give_positive_kp() {
        let pos = ScoredGraph::from_weighted_edges(
            4,
            [(0, 1, 1.0), (1, 2, 0.8)],
            Polarity::Positive,
        );
        let neg = ScoredGraph::from_weighted_edges(
            4,
            [(0, 1, -1.0), (2, 3, 0.1)],
            Polarity::Negative,
        );
        assert!(kp_score(&pos, &neg, &SwConfig::default()).unwrap() > 0.0);
        let short = ScoredGraph::from_weighted_edges(4, [(0, 1, -1.0)], Polarity::Negative);
        assert!(kp_score(&pos, &short, &SwConfig::default()).is_err());
    }
}

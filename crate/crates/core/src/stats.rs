//! Pearson, Spearman and Kendall tau-b correlation.

use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub label_x: String,
    pub label_y: String,
}

impl PairedSeries {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        Self::labeled(xs, ys, "x", "y")
    }

    pub fn labeled(xs: Vec<f64>, ys: Vec<f64>, label_x: &str, label_y: &str) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(KpError::InvalidArgument(format!(
                "series lengths differ ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(KpError::InvalidArgument("need at least two pairs".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(KpError::InvalidArgument("series contain non-finite values".into()));
        }
        Ok(Self {
            xs,
            ys,
            label_x: label_x.to_owned(),
            label_y: label_y.to_owned(),
        })
    }
}

fn pearson_raw(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(KpError::Undefined("correlation with a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(s: &PairedSeries) -> Result<f64> {
    pearson_raw(&s.xs, &s.ys)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(s: &PairedSeries) -> Result<f64> {
    pearson_raw(&average_ranks(&s.xs), &average_ranks(&s.ys))
}

/// Number of pairs within runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort on `v` counting inversions (pairs `i < j` with `v[i] > v[j]`).
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        count_inversions(left, bl) + count_inversions(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau-b in O(n log n) (Knight's algorithm).
pub fn kendall(s: &PairedSeries) -> Result<f64> {
    let n = s.xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = s.xs.iter().copied().zip(s.ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = n * (n - 1) / 2;
    let xs_sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs_sorted);
    let n3 = tied_pairs(&pairs);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = count_inversions(&mut ys, &mut buf);
    // ys is now sorted
    let n2 = tied_pairs(&ys);

    let denom_x = n0 - n1;
    let denom_y = n0 - n2;
    if denom_x == 0 || denom_y == 0 {
        return Err(KpError::Undefined("kendall tau of an all-tied series".into()));
    }
    // concordant - discordant
    let num = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok(tau_b(num, denom_x, denom_y))
}

/// `(C - D) / sqrt((n0 - n1)(n0 - n2))`.
pub fn tau_b(concordant_minus_discordant: i64, untied_x: u64, untied_y: u64) -> f64 {
    concordant_minus_discordant as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

/// All three coefficients; undefined ones are `None`.
pub fn correlations(s: &PairedSeries) -> Correlations {
    Correlations {
        pearson: pearson(s).ok(),
        spearman: spearman(s).ok(),
        kendall: kendall(s).ok(),
    }
}

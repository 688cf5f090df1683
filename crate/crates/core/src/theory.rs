//! Gaussian model of positive and negative score distributions.
//!
//! With positive scores `X ~ N(m+, s+^2)` and negative scores
//! `Y ~ N(m-, s-^2)`:
//!
//! * the expected rank of a positive scored `a` is the negative upper tail
//!   `P(Y >= a)`;
//! * PERM, its mean under the positive law, is `P(Y >= X)`;
//! * the 2-Wasserstein distance between the two laws is
//!   `sqrt((m+ - m-)^2 + (s+ - s-)^2)`.
//!
//! PERM is computed in closed form and by adaptive Simpson quadrature.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{KpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSummary {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(mean.is_finite() && variance.is_finite() && variance > 0.0) {
            return Err(KpError::InvalidArgument(format!(
                "gaussian needs finite mean and positive variance, got N({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    /// Sample mean and unbiased variance.
    pub fn fit(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(KpError::Empty("need at least two samples to fit".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if !(var > 0.0) {
            return Err(KpError::Undefined("zero-variance sample".into()));
        }
        Self::new(mean, var)
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd();
        (-0.5 * z * z).exp() / (self.sd() * (2.0 * PI).sqrt())
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `P(Y >= a)` for `Y ~ neg`.
pub fn expected_rank(neg: &GaussianSummary, a: f64) -> f64 {
    0.5 * libm::erfc((a - neg.mean) / (neg.sd() * SQRT_2))
}

/// `P(Y >= X)` for independent `X ~ pos`, `Y ~ neg`.
pub fn perm_closed_form(pos: &GaussianSummary, neg: &GaussianSummary) -> f64 {
    normal_cdf((neg.mean - pos.mean) / (pos.variance + neg.variance).sqrt())
}

const SIMPSON_TOL: f64 = 1e-13;
const SIMPSON_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(KpError::Quadrature(format!(
                "no convergence on [{a}, {b}] (error estimate {delta:e})"
            )));
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    // split once so a peaked integrand cannot fool the first estimate
    let halves = [(a, m, fa, f(0.5 * (a + m)), fm), (m, b, fm, f(0.5 * (m + b)), fb)];
    let mut total = 0.0;
    for (lo, hi, flo, fmid, fhi) in halves {
        let whole = simpson(flo, fmid, fhi, lo, hi);
        total += recurse(&f, lo, hi, flo, fmid, fhi, whole, tol / 2.0, SIMPSON_MAX_DEPTH)?;
    }
    Ok(total)
}

/// PERM as `int pos(x) ER(x) dx` over `mean(pos) +- 10 sd(pos)`.
pub fn perm_quadrature(pos: &GaussianSummary, neg: &GaussianSummary) -> Result<f64> {
    let half = 10.0 * pos.sd();
    adaptive_simpson(
        |x| pos.pdf(x) * expected_rank(neg, x),
        pos.mean - half,
        pos.mean + half,
        SIMPSON_TOL,
    )
}

/// Agreement required between the two PERM routes.
pub const PERM_AGREEMENT: f64 = 1e-8;

/// PERM by closed form, cross-checked against quadrature.
pub fn perm(pos: &GaussianSummary, neg: &GaussianSummary) -> Result<f64> {
    let closed = perm_closed_form(pos, neg);
    let quad = perm_quadrature(pos, neg)?;
    if (closed - quad).abs() > PERM_AGREEMENT {
        return Err(KpError::Quadrature(format!(
            "closed form {closed} and quadrature {quad} disagree"
        )));
    }
    Ok(closed)
}

pub fn gaussian_w2(a: &GaussianSummary, b: &GaussianSummary) -> f64 {
    let dm = a.mean - b.mean;
    let ds = a.sd() - b.sd();
    (dm * dm + ds * ds).sqrt()
}

/// Differences smaller than this count as saturation, not a violation.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `mean(pos) - mean(neg)`.
    pub gap: f64,
    pub perm: f64,
    pub w2: f64,
    /// Monotonicity broken relative to the previous row.
    pub flagged: bool,
}

/// PERM and W2 along a mean-gap grid with fixed standard deviations. The
/// negative mean is held at zero and the positive mean set to each gap.
pub fn lemma1_sweep(gaps: &[f64], sd_pos: f64, sd_neg: f64) -> Result<Vec<SweepRow>> {
    if gaps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KpError::InvalidArgument("gap grid must be strictly increasing".into()));
    }
    let neg = GaussianSummary::new(0.0, sd_neg * sd_neg)?;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(gaps.len());
    for &gap in gaps {
        let pos = GaussianSummary::new(gap, sd_pos * sd_pos)?;
        let perm = perm(&pos, &neg)?;
        let w2 = gaussian_w2(&pos, &neg);
        let flagged = rows.last().is_some_and(|prev| {
            let perm_ok = perm < prev.perm || (perm - prev.perm).abs() <= MONOTONE_TOL;
            let w2_ok = w2 > prev.w2 || (w2 - prev.w2).abs() <= MONOTONE_TOL;
            // both moving in opposite directions; a gap grid with negative
            // entries makes W2 shrink first, which is what the flag reports
            !(perm_ok && w2_ok)
        });
        rows.push(SweepRow {
            gap,
            perm,
            w2,
            flagged,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("gap,perm,w2,flagged\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.gap, r.perm, r.w2, r.flagged);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityInput {
    pub sigma2_mu1: f64,
    pub sigma2_mu2: f64,
    pub sigma2_nu1: f64,
    pub sigma2_nu2: f64,
}

impl StabilityInput {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma2_mu1, self.sigma2_mu2, self.sigma2_nu1, self.sigma2_nu2];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(KpError::InvalidArgument(format!("variances must be positive: {all:?}")))
        }
    }
}

/// Univariate relative-change bound:
/// `max(1 - (s2_mu1 / s2_mu2)^(3/2), 1 - (s2_nu1 / s2_nu2)^(3/2))`.
pub fn stability_bound(s: &StabilityInput) -> Result<f64> {
    s.validate()?;
    let term = |orig: f64, noisy: f64| 1.0 - (orig / noisy).powf(1.5);
    Ok(term(s.sigma2_mu1, s.sigma2_mu2).max(term(s.sigma2_nu1, s.sigma2_nu2)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrial {
    pub trial: usize,
    pub kp_original: f64,
    pub kp_noisy: f64,
    /// `|kp_original - kp_noisy| / kp_original`.
    pub relative_change: f64,
    pub bound: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub noise_sigma: f64,
    pub trials: Vec<StabilityTrial>,
    pub violations: usize,
}

/// Adds `N(0, noise_sigma^2)` noise to every score, refits both Gaussians and
/// compares the relative change of the Gaussian W2 surrogate to the bound.
pub fn stability_check(
    pos: &[f64],
    neg: &[f64],
    noise_sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if pos.len() != neg.len() {
        return Err(KpError::InvalidArgument(format!(
            "sample sizes differ ({} vs {})",
            pos.len(),
            neg.len()
        )));
    }
    if trials < 1 {
        return Err(KpError::InvalidArgument("trials must be >= 1".into()));
    }
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|e| KpError::InvalidArgument(format!("noise sigma {noise_sigma}: {e}")))?;
    let mu1 = GaussianSummary::fit(pos)?;
    let nu1 = GaussianSummary::fit(neg)?;
    let kp1 = gaussian_w2(&mu1, &nu1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(trials);
    let mut buf_p = vec![0.0; pos.len()];
    let mut buf_n = vec![0.0; neg.len()];
    for trial in 0..trials {
        for (dst, &x) in buf_p.iter_mut().zip(pos) {
            *dst = x + noise.sample(&mut rng);
        }
        for (dst, &x) in buf_n.iter_mut().zip(neg) {
            *dst = x + noise.sample(&mut rng);
        }
        let mu2 = GaussianSummary::fit(&buf_p)?;
        let nu2 = GaussianSummary::fit(&buf_n)?;
        let kp2 = gaussian_w2(&mu2, &nu2);
        let delta = (kp1 - kp2).abs();
        let relative_change = if delta == 0.0 {
            0.0
        } else if kp1 > 0.0 {
            delta / kp1
        } else {
            return Err(KpError::Undefined("relative change of a zero KP".into()));
        };
        let bound = stability_bound(&StabilityInput {
            sigma2_mu1: mu1.variance,
            sigma2_mu2: mu2.variance,
            sigma2_nu1: nu1.variance,
            sigma2_nu2: nu2.variance,
        })?;
        rows.push(StabilityTrial {
            trial,
            kp_original: kp1,
            kp_noisy: kp2,
            relative_change,
            bound,
            violated: relative_change > bound,
        });
    }
    let violations = rows.iter().filter(|r| r.violated).count();
    Ok(StabilityReport {
        noise_sigma,
        trials: rows,
        violations,
    })
}

pub fn stability_csv(report: &StabilityReport) -> String {
    let mut out = String::from("trial,noise_sigma,kp_original,kp_noisy,relative_change,bound,violated\n");
    for t in &report.trials {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.trial, report.noise_sigma, t.kp_original, t.kp_noisy, t.relative_change, t.bound, t.violated
        );
    }
    out
}

/// Draws `n` scores from each Gaussian; used for theory fixtures.
pub fn gaussian_samples(pos: &GaussianSummary, neg: &GaussianSummary, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = Normal::new(pos.mean, pos.sd()).expect("validated summary");
    let q = Normal::new(neg.mean, neg.sd()).expect("validated summary");
    let xs = (0..n).map(|_| p.sample(&mut rng)).collect();
    let ys = (0..n).map(|_| q.sample(&mut rng)).collect();
    (xs, ys)
}

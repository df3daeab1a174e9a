//! Largest Lyapunov exponent of a scalar series by evolution and
//! replacement of nearest-neighbor pairs (Wolf's method), on a
//! non-overlapping window embedding.
//!
//! The exponent is reported in bits per embedded step:
//!
//! ```text
//! λ = 1/(t_final - 1) · Σ_k log2(L'_k / L_k)
//! ```

use crate::error::{Error, Result};
use crate::keystream::ChaoticSeed;

/// Default angle bound for neighbor replacement, in degrees.
pub const DEFAULT_THETA_MAX_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConfig {
    m: usize,
    epsilon: f64,
    theta_max_deg: f64,
}

impl EmbeddingConfig {
    pub fn new(m: usize, epsilon: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "embedding dimension must be at least 1".into(),
            ));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "evolution threshold must be positive, got {epsilon}"
            )));
        }
        Ok(EmbeddingConfig {
            m,
            epsilon,
            theta_max_deg: DEFAULT_THETA_MAX_DEG,
        })
    }

    /// `m` with `ε` set to 10% of the series' range.
    pub fn with_default_epsilon(series: &[f64], m: usize) -> Result<Self> {
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
                (lo.min(z), hi.max(z))
            });
        let range = hi - lo;
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::DegenerateDistance("series has zero range".into()));
        }
        Self::new(m, 0.1 * range)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn theta_max_deg(&self) -> f64 {
        self.theta_max_deg
    }
}

/// One evolution/replacement step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replacement {
    /// One-based fiducial index `t_k` when the pair was formed.
    pub t: usize,
    /// One-based neighbor index `t'_k`.
    pub neighbor: usize,
    /// Steps both points were evolved.
    pub steps: usize,
    /// Initial separation `L_k`.
    pub initial: f64,
    /// Final separation `L'_k`.
    pub evolved: f64,
    /// The angle constraint could not be met and the plain nearest neighbor was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplacementLog {
    pub replacements: Vec<Replacement>,
    /// One-based fiducial index at termination.
    pub t_final: usize,
}

impl ReplacementLog {
    /// `q`, the number of replacement steps.
    pub fn q(&self) -> usize {
        self.replacements.len()
    }

    pub fn fallbacks(&self) -> usize {
        self.replacements.iter().filter(|r| r.fallback).count()
    }
}

/// Non-overlapping windows `Y_i = [z_{(i-1)m+1} .. z_{im}]`; trailing samples are dropped.
pub fn embed(series: &[f64], m: usize) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "embedding dimension must be at least 1".into(),
        ));
    }
    if series.len() < m {
        return Err(Error::InsufficientData(format!(
            "{} samples cannot fill one {m}-dimensional point",
            series.len()
        )));
    }
    Ok(series.chunks_exact(m).map(<[f64]>::to_vec).collect())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn within_angle(prev_dir: &[f64], candidate_dir: &[f64], cos_min: f64) -> bool {
    let dot: f64 = prev_dir.iter().zip(candidate_dir).map(|(a, b)| a * b).sum();
    let np = prev_dir.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nc = candidate_dir.iter().map(|a| a * a).sum::<f64>().sqrt();
    if np == 0.0 {
        return true;
    }
    dot / (np * nc) > cos_min
}

/// Nearest point to `Y_t` among zero-based candidate indices `< limit`.
fn nearest_within(
    points: &[Vec<f64>],
    t: usize,
    prev_dir: Option<&[f64]>,
    theta_max_deg: f64,
    limit: usize,
) -> Result<usize> {
    let cos_min = theta_max_deg.to_radians().cos();
    let here = &points[t];
    let mut best: Option<(f64, usize)> = None;
    let mut any_separated = false;
    for (j, p) in points.iter().enumerate().take(limit) {
        if j == t {
            continue;
        }
        let d = distance(here, p);
        if d == 0.0 {
            continue;
        }
        any_separated = true;
        if let Some(dir) = prev_dir {
            let cand: Vec<f64> = p.iter().zip(here).map(|(a, b)| a - b).collect();
            if !within_angle(dir, &cand, cos_min) {
                continue;
            }
        }
        // strict comparison keeps the smallest index on ties
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, j));
        }
    }
    match best {
        Some((_, j)) => Ok(j),
        None if !any_separated => Err(Error::DegenerateDistance(format!(
            "every candidate coincides with point {}",
            t + 1
        ))),
        None => Err(Error::ReplacementFailure(format!(
            "no neighbor of point {} within {theta_max_deg} degrees",
            t + 1
        ))),
    }
}

/// Directional nearest neighbor of the one-based point `t`.
///
/// Candidates at zero distance are skipped. When `prev_dir` is given, a
/// candidate `Y_j` must satisfy `angle(prev_dir, Y_j - Y_t) < theta_max`.
/// Ties go to the smallest index. Returns a one-based index.
pub fn nearest_neighbor(
    points: &[Vec<f64>],
    t: usize,
    prev_dir: Option<&[f64]>,
    theta_max_deg: f64,
) -> Result<usize> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least two phase points".into(),
        ));
    }
    if t == 0 || t > points.len() {
        return Err(Error::InvalidArgument(format!(
            "point index {t} outside 1..={}",
            points.len()
        )));
    }
    nearest_within(points, t - 1, prev_dir, theta_max_deg, points.len()).map(|j| j + 1)
}

/// Runs the evolution/replacement loop and returns `(λ, log)`.
///
/// Each pair is evolved at least one step and until its separation exceeds
/// `ε` or either point reaches the end of the embedding. The evolved
/// fiducial index carries into the next replacement, whose neighbor must lie
/// within the angle bound of the previous evolved separation vector; if no
/// such neighbor exists the unconstrained nearest one is used and the step
/// is flagged.
pub fn wolf_lle(series: &[f64], cfg: &EmbeddingConfig) -> Result<(f64, ReplacementLog)> {
    let points = embed(series, cfg.m)?;
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} phase points are too few to evolve a pair"
        )));
    }
    let mut t = 0usize;
    let mut prev_dir: Option<Vec<f64>> = None;
    let mut replacements = Vec::new();
    let mut log_sum = 0.0;

    while t + 1 < n {
        // neighbors must leave room for at least one evolution step
        let limit = n - 1;
        let (nb, fallback) =
            match nearest_within(&points, t, prev_dir.as_deref(), cfg.theta_max_deg, limit) {
                Ok(j) => (j, false),
                Err(Error::ReplacementFailure(_)) => (
                    nearest_within(&points, t, None, cfg.theta_max_deg, limit)?,
                    true,
                ),
                Err(e) => return Err(e),
            };
        let initial = distance(&points[t], &points[nb]);

        let mut steps = 0;
        let mut evolved = initial;
        while t + steps + 1 < n && nb + steps + 1 < n {
            steps += 1;
            evolved = distance(&points[t + steps], &points[nb + steps]);
            if evolved > cfg.epsilon {
                break;
            }
        }
        if evolved == 0.0 {
            return Err(Error::DegenerateDistance(format!(
                "points {} and {} coincide after {steps} steps",
                t + steps + 1,
                nb + steps + 1
            )));
        }
        log_sum += (evolved / initial).log2();
        replacements.push(Replacement {
            t: t + 1,
            neighbor: nb + 1,
            steps,
            initial,
            evolved,
            fallback,
        });

        t += steps;
        prev_dir = Some(
            points[nb + steps]
                .iter()
                .zip(&points[t])
                .map(|(a, b)| a - b)
                .collect(),
        );
    }

    if replacements.is_empty() {
        return Err(Error::InsufficientData(
            "no replacement step completed".into(),
        ));
    }
    let t_final = t + 1;
    let lambda = log_sum / (t_final - 1) as f64;
    Ok((
        lambda,
        ReplacementLog {
            replacements,
            t_final,
        },
    ))
}

/// Initial conditions of both chaotic maps derived from `λ`.
pub fn seed_from_lambda(lambda: f64) -> Result<ChaoticSeed> {
    ChaoticSeed::from_lambda(lambda)
}

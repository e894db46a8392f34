//! Scott-Knott ranking: sort groups by median, split recursively where the
//! between-group sum of squares is largest, and keep a split only when a
//! bootstrap test and Cliff's delta both say the two sides differ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{median_iqr, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScottKnottConfig {
    pub bootstrap_samples: usize,
    /// Significance level of the bootstrap test.
    pub alpha: f64,
    /// Smallest |Cliff's delta| treated as a real effect.
    pub min_effect: f64,
    pub seed: u64,
}

impl Default for ScottKnottConfig {
    fn default() -> Self {
        ScottKnottConfig {
            bootstrap_samples: 512,
            alpha: 0.05,
            min_effect: 0.147,
            seed: 1,
        }
    }
}

/// Cliff's delta: `(#{x > y} − #{x < y}) / (|xs| · |ys|)`.
pub fn cliffs_delta(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.is_empty() || ys.is_empty() {
        return 0.0;
    }
    let mut ys_sorted = ys.to_vec();
    ys_sorted.sort_by(f64::total_cmp);
    let mut more = 0usize;
    let mut less = 0usize;
    for &x in xs {
        // ys strictly below x, ys strictly above x
        let below = ys_sorted.partition_point(|&y| y < x);
        let not_above = ys_sorted.partition_point(|&y| y <= x);
        more += below;
        less += ys_sorted.len() - not_above;
    }
    (more as f64 - less as f64) / (xs.len() * ys.len()) as f64
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Welch-style separation statistic used by the bootstrap.
fn separation(ys: &[f64], zs: &[f64]) -> f64 {
    let gap = (mean(ys) - mean(zs)).abs();
    let se = (variance(ys) / ys.len() as f64 + variance(zs) / zs.len() as f64).sqrt();
    if se > 0.0 {
        gap / se
    } else if gap > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// True when the bootstrap rejects "same mean" at level `alpha`.
fn bootstrap_differs(ys: &[f64], zs: &[f64], cfg: &ScottKnottConfig, rng: &mut ChaCha8Rng) -> bool {
    let observed = separation(ys, zs);
    let pooled_mean = (ys.iter().sum::<f64>() + zs.iter().sum::<f64>()) / (ys.len() + zs.len()) as f64;
    let my = mean(ys);
    let mz = mean(zs);
    let yhat: Vec<f64> = ys.iter().map(|y| y - my + pooled_mean).collect();
    let zhat: Vec<f64> = zs.iter().map(|z| z - mz + pooled_mean).collect();

    let mut ybuf = vec![0.0; ys.len()];
    let mut zbuf = vec![0.0; zs.len()];
    let mut bigger = 0usize;
    for _ in 0..cfg.bootstrap_samples {
        for slot in ybuf.iter_mut() {
            *slot = yhat[rng.random_range(0..yhat.len())];
        }
        for slot in zbuf.iter_mut() {
            *slot = zhat[rng.random_range(0..zhat.len())];
        }
        if separation(&ybuf, &zbuf) > observed {
            bigger += 1;
        }
    }
    (bigger as f64 / cfg.bootstrap_samples as f64) < cfg.alpha
}

fn differs(ys: &[f64], zs: &[f64], cfg: &ScottKnottConfig, rng: &mut ChaCha8Rng) -> bool {
    cliffs_delta(ys, zs).abs() >= cfg.min_effect && bootstrap_differs(ys, zs, cfg, rng)
}

struct Group<'a> {
    name: &'a str,
    values: &'a [f64],
    median: f64,
}

/// Cut position in `1..groups.len()` maximizing the between-group
/// expectation `n_l/n·(μ_l − μ)² + n_r/n·(μ_r − μ)²`.
pub(crate) fn best_cut(groups: &[&[f64]]) -> Option<(usize, f64)> {
    if groups.len() < 2 {
        return None;
    }
    let total_n: usize = groups.iter().map(|g| g.len()).sum();
    let total_sum: f64 = groups.iter().flat_map(|g| g.iter()).sum();
    let mu = total_sum / total_n as f64;
    let mut best: Option<(usize, f64)> = None;
    let mut left_n = 0usize;
    let mut left_sum = 0.0;
    for cut in 1..groups.len() {
        left_n += groups[cut - 1].len();
        left_sum += groups[cut - 1].iter().sum::<f64>();
        let right_n = total_n - left_n;
        let right_sum = total_sum - left_sum;
        let ml = left_sum / left_n as f64;
        let mr = right_sum / right_n as f64;
        let score = left_n as f64 / total_n as f64 * (ml - mu).powi(2)
            + right_n as f64 / total_n as f64 * (mr - mu).powi(2);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((cut, score));
        }
    }
    best
}

fn split(groups: &[Group], cfg: &ScottKnottConfig, rng: &mut ChaCha8Rng, leaves: &mut Vec<usize>, offset: usize) {
    let slices: Vec<&[f64]> = groups.iter().map(|g| g.values).collect();
    if let Some((cut, _)) = best_cut(&slices) {
        let left: Vec<f64> = slices[..cut].iter().flat_map(|s| s.iter().copied()).collect();
        let right: Vec<f64> = slices[cut..].iter().flat_map(|s| s.iter().copied()).collect();
        if differs(&left, &right, cfg, rng) {
            split(&groups[..cut], cfg, rng, leaves, offset);
            split(&groups[cut..], cfg, rng, leaves, offset + cut);
            return;
        }
    }
    leaves.push(offset + groups.len());
}

/// Ranks named samples; smaller values are better and get rank 1. Returns
/// `(name, rank)` sorted by rank, then median, then name.
pub fn scott_knott(samples: &[(String, Vec<f64>)], cfg: &ScottKnottConfig) -> Result<Vec<(String, usize)>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoTreatments);
    }
    let mut groups = Vec::with_capacity(samples.len());
    for (name, values) in samples {
        let (median, _) = median_iqr(values)?;
        groups.push(Group {
            name,
            values,
            median,
        });
    }
    groups.sort_by(|a, b| a.median.total_cmp(&b.median).then_with(|| a.name.cmp(b.name)));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // exclusive end index of every leaf, left to right
    let mut leaves = Vec::new();
    split(&groups, cfg, &mut rng, &mut leaves, 0);

    let mut out = Vec::with_capacity(groups.len());
    let mut start = 0;
    for (rank, end) in leaves.into_iter().enumerate() {
        for g in &groups[start..end] {
            out.push((g.name.to_string(), rank + 1));
        }
        start = end;
    }
    Ok(out)
}

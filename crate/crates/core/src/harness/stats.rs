//! Rank-based tests: Kruskal-Wallis and Conover's pairwise post-hoc test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ranks of `values` in ascending order, ties receiving their mean rank.
pub fn midranks(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Statistics("NaN in sample".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j share ranks i+1..=j+1.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    Ok(ranks)
}

struct Ranked {
    n: usize,
    k: usize,
    sizes: Vec<usize>,
    rank_sums: Vec<f64>,
    rank_sq_sum: f64,
    tie_term: f64,
}

fn rank_groups(groups: &[Vec<f64>]) -> Result<Ranked> {
    if groups.len() < 2 {
        return Err(Error::Statistics("need at least two groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::Statistics("empty group".into()));
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = midranks(&pooled)?;
    let mut rank_sums = Vec::with_capacity(groups.len());
    let mut at = 0;
    for g in groups {
        rank_sums.push(ranks[at..at + g.len()].iter().sum());
        at += g.len();
    }
    // Tie groups: sum of t^3 - t over runs of equal values.
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    Ok(Ranked {
        n: pooled.len(),
        k: groups.len(),
        sizes: groups.iter().map(Vec::len).collect(),
        rank_sums,
        rank_sq_sum: ranks.iter().map(|r| r * r).sum(),
        tie_term,
    })
}

impl Ranked {
    /// Tie-corrected H, or None when every value is identical.
    fn h(&self) -> Option<f64> {
        let n = self.n as f64;
        let correction = 1.0 - self.tie_term / (n * n * n - n);
        if correction <= 0.0 {
            return None;
        }
        let s: f64 = self
            .rank_sums
            .iter()
            .zip(&self.sizes)
            .map(|(r, &m)| r * r / m as f64)
            .sum();
        Some((12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0)) / correction)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    pub h: f64,
    pub df: usize,
    pub p: f64,
}

pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    let ranked = rank_groups(groups)?;
    let df = ranked.k - 1;
    let Some(h) = ranked.h() else {
        return Ok(KruskalWallis { h: 0.0, df, p: 1.0 });
    };
    let h = h.max(0.0);
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Statistics(e.to_string()))?;
    Ok(KruskalWallis { h, df, p: chi.sf(h) })
}

/// Conover's all-pairs test on Kruskal-Wallis ranks, unadjusted two-sided
/// p-values from the t distribution with `N - k` degrees of freedom.
/// Returns a symmetric `k x k` matrix with unit diagonal.
pub fn conover_posthoc(groups: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let ranked = rank_groups(groups)?;
    let (n, k) = (ranked.n, ranked.k);
    let mut p = vec![vec![1.0; k]; k];
    let Some(h) = ranked.h() else {
        return Ok(p);
    };
    if n <= k {
        return Err(Error::Statistics(
            "post-hoc test needs more observations than groups".into(),
        ));
    }
    let nf = n as f64;
    let s2 = (ranked.rank_sq_sum - nf * (nf + 1.0) * (nf + 1.0) / 4.0) / (nf - 1.0);
    let d = (nf - 1.0 - h) / (nf - k as f64);
    let t_dist = StudentsT::new(0.0, 1.0, (n - k) as f64).map_err(|e| Error::Statistics(e.to_string()))?;
    let mean_rank: Vec<f64> = ranked
        .rank_sums
        .iter()
        .zip(&ranked.sizes)
        .map(|(r, &m)| r / m as f64)
        .collect();
    for i in 0..k {
        for j in i + 1..k {
            let diff = (mean_rank[i] - mean_rank[j]).abs();
            let b = 1.0 / ranked.sizes[i] as f64 + 1.0 / ranked.sizes[j] as f64;
            let denom = s2 * b * d;
            let pij = if denom > 0.0 {
                2.0 * t_dist.sf(diff / denom.sqrt())
            } else if diff > 0.0 {
                0.0
            } else {
                1.0
            };
            p[i][j] = pij.min(1.0);
            p[j][i] = p[i][j];
        }
    }
    Ok(p)
}

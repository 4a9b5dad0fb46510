//! Mann–Whitney rank-sum test and quantile summaries.
//!
//! Censored observations (`None`) rank worse than every observed value and
//! tie with each other. Small samples use the exact permutation
//! distribution of the rank sum (midranks for ties); larger ones use the
//! tie-corrected normal approximation with continuity correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Largest pooled sample size handled by exact enumeration.
pub const EXACT_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// The first sample tends to be smaller.
    Less,
    /// The first sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumTest {
    /// Mann–Whitney U of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub method: Method,
}

fn order(a: &Option<f64>, b: &Option<f64>) -> std::cmp::Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    }
}

/// Doubled midranks (integers) in input order.
fn doubled_ranks(values: &[Option<f64>]) -> (Vec<u64>, Vec<u64>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| order(&values[a], &values[b]));
    let mut ranks = vec![0; values.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && order(&values[idx[i]], &values[idx[j + 1]]).is_eq() {
            j += 1;
        }
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        tie_sizes.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, tie_sizes)
}

pub fn mann_whitney(x: &[Option<f64>], y: &[Option<f64>], alternative: Alternative) -> RankSumTest {
    let (n1, n2) = (x.len(), y.len());
    assert!(n1 > 0 && n2 > 0, "rank-sum test needs two nonempty samples");
    let pooled: Vec<Option<f64>> = x.iter().chain(y).copied().collect();
    let n = pooled.len();
    let (ranks, ties) = doubled_ranks(&pooled);
    let w2: u64 = ranks[..n1].iter().sum();
    let u = w2 as f64 / 2.0 - (n1 * (n1 + 1)) as f64 / 2.0;
    if n <= EXACT_LIMIT {
        RankSumTest { u, p_value: exact_p(&ranks, n1, w2, alternative), method: Method::Exact }
    } else {
        RankSumTest { u, p_value: normal_p(u, n1, n2, &ties, alternative), method: Method::Normal }
    }
}

/// Permutation distribution of the doubled rank sum of `n1` items.
fn exact_p(ranks: &[u64], n1: usize, observed: u64, alternative: Alternative) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // ways[k * width + s]: subsets of size k with doubled-rank sum s
    let mut ways = vec![0.0f64; (n1 + 1) * width];
    ways[0] = 1.0;
    for &r in ranks {
        let r = r as usize;
        for k in (1..=n1).rev() {
            for s in (r..width).rev() {
                let add = ways[(k - 1) * width + s - r];
                if add != 0.0 {
                    ways[k * width + s] += add;
                }
            }
        }
    }
    let dist = &ways[n1 * width..];
    let total: f64 = dist.iter().sum();
    let n = ranks.len() as i64;
    let mean2 = n1 as i64 * (n + 1);
    let obs_dev = (observed as i64 - mean2).abs();
    let mass: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(s, &w)| {
            w != 0.0
                && match alternative {
                    Alternative::Less => s as u64 <= observed,
                    Alternative::Greater => s as u64 >= observed,
                    Alternative::TwoSided => (s as i64 - mean2).abs() >= obs_dev,
                }
        })
        .map(|(_, &w)| w)
        .sum();
    (mass / total).min(1.0)
}

fn normal_p(u: f64, n1: usize, n2: usize, ties: &[u64], alternative: Alternative) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mean = a * b / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = a * b / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = match alternative {
        Alternative::Less => std_normal.cdf((u - mean + 0.5) / sd),
        Alternative::Greater => 1.0 - std_normal.cdf((u - mean - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((u - mean).abs() - 0.5).max(0.0) / sd;
            2.0 * (1.0 - std_normal.cdf(z))
        }
    };
    p.clamp(0.0, 1.0)
}

/// Linear-interpolation quantile (type 7) treating `None` as +infinity.
/// Returns `None` when the quantile falls on or next to a censored value.
pub fn quantile(values: &[Option<f64>], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted: Vec<Option<f64>> = values.to_vec();
    sorted.sort_by(order);
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let (a, b) = (sorted[lo]?, sorted[hi]?);
    Some(a + (h - lo as f64) * (b - a))
}

pub fn median(values: &[Option<f64>]) -> Option<f64> {
    quantile(values, 0.5)
}

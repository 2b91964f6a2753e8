use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Result, SurvError};

/// Largest number of nonzero differences handled by the exact null
/// distribution; larger samples use the normal approximation.
pub const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero; nothing to test.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_nonzero: usize,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Average ranks of `|d|`, ties sharing the mean of their positions.
fn signed_ranks(diffs: &[f64]) -> Vec<f64> {
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && diffs[order[j]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

struct Prepared {
    diffs: Vec<f64>,
    ranks: Vec<f64>,
    w_plus: f64,
    w_minus: f64,
}

fn prepare(a: &[f64], b: &[f64]) -> Result<Prepared> {
    if a.len() != b.len() {
        return Err(SurvError::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(SurvError::NonFinite("paired scores".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let ranks = signed_ranks(&diffs);
    let w_plus = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = diffs.len() as f64 * (diffs.len() as f64 + 1.0) / 2.0;
    Ok(Prepared {
        w_minus: total - w_plus,
        diffs,
        ranks,
        w_plus,
    })
}

/// Two-sided p-value from the exact permutation distribution of W+ given
/// the observed (possibly tied) ranks. Doubled ranks are integers, so the
/// distribution is a subset-sum count.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (2.0 * w_plus).round() as usize;
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Two-sided normal approximation with tie-corrected variance and a
/// continuity correction of 1/2.
fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

fn finish(p: Prepared, method: WilcoxonMethod) -> WilcoxonResult {
    let p_value = match method {
        WilcoxonMethod::Exact => exact_p(&p.ranks, p.w_plus),
        WilcoxonMethod::Normal => normal_p(&p.ranks, p.w_plus),
        WilcoxonMethod::Degenerate => 1.0,
    };
    WilcoxonResult {
        statistic: p.w_plus.min(p.w_minus),
        w_plus: p.w_plus,
        w_minus: p.w_minus,
        n_nonzero: p.diffs.len(),
        p_value,
        method,
    }
}

/// Wilcoxon signed-rank test on paired scores `a - b`, two-sided. Zero
/// differences are dropped. Up to [`EXACT_LIMIT`] nonzero pairs use the
/// exact distribution, larger samples the normal approximation.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let p = prepare(a, b)?;
    let method = match p.diffs.len() {
        0 => WilcoxonMethod::Degenerate,
        n if n < 5 => {
            return Err(SurvError::invalid(format!(
                "signed-rank test needs at least 5 nonzero differences, got {n}"
            )))
        }
        n if n <= EXACT_LIMIT => WilcoxonMethod::Exact,
        _ => WilcoxonMethod::Normal,
    };
    Ok(finish(p, method))
}

/// The test with an explicit choice of null distribution.
pub fn wilcoxon_with(a: &[f64], b: &[f64], method: WilcoxonMethod) -> Result<WilcoxonResult> {
    let p = prepare(a, b)?;
    if p.diffs.is_empty() {
        return Ok(finish(p, WilcoxonMethod::Degenerate));
    }
    Ok(finish(p, method))
}

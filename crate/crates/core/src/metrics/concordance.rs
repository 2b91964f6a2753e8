use crate::dataio::SurvivalRecord;
use crate::error::{Result, SurvError};

/// Fenwick tree over counts.
struct Counts {
    tree: Vec<u64>,
}

impl Counts {
    fn new(n: usize) -> Self {
        Counts {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Pair counts behind Harrell's C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConcordanceCounts {
    pub concordant: u64,
    pub tied_risk: u64,
    pub comparable: u64,
}

impl ConcordanceCounts {
    pub fn c_index(&self) -> f64 {
        (self.concordant as f64 + 0.5 * self.tied_risk as f64) / self.comparable as f64
    }
}

/// Counts comparable pairs `(i, j)` with `time_i < time_j` and `event_i`,
/// scanning times downward and keeping later records' risk ranks in a
/// Fenwick tree.
pub fn concordance_counts(risks: &[f64], records: &[SurvivalRecord]) -> Result<ConcordanceCounts> {
    if risks.len() != records.len() {
        return Err(SurvError::LengthMismatch {
            expected: records.len(),
            found: risks.len(),
        });
    }
    if risks.iter().any(|r| r.is_nan()) {
        return Err(SurvError::NonFinite("risk scores".into()));
    }
    let mut levels: Vec<f64> = risks.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let rank = |r: f64| levels.partition_point(|&v| v < r);

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time));

    let mut later = Counts::new(levels.len());
    let mut inserted = 0u64;
    let mut counts = ConcordanceCounts::default();
    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].time;
        let mut end = start;
        while end < order.len() && records[order[end]].time == t {
            end += 1;
        }
        for &i in &order[start..end] {
            if records[i].event {
                let k = rank(risks[i]);
                let below = later.prefix(k);
                let at_or_below = later.prefix(k + 1);
                counts.concordant += below;
                counts.tied_risk += at_or_below - below;
                counts.comparable += inserted;
            }
        }
        for &i in &order[start..end] {
            later.add(rank(risks[i]));
            inserted += 1;
        }
        start = end;
    }
    Ok(counts)
}

/// Harrell's concordance index: higher risk should go with earlier events.
/// Risk ties earn half credit; pairs whose earlier time is censored, or
/// whose times tie, are not comparable.
pub fn concordance_index(risks: &[f64], records: &[SurvivalRecord]) -> Result<f64> {
    let counts = concordance_counts(risks, records)?;
    if counts.comparable == 0 {
        return Err(SurvError::NoComparablePairs);
    }
    Ok(counts.c_index())
}

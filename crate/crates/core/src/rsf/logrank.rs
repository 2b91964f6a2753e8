use crate::dataio::SurvivalRecord;
use crate::error::{Result, SurvError};

/// Absolute standardized two-sample log-rank statistic `|U| / sqrt(V)`
/// over the pooled event times. Zero when the variance vanishes.
pub fn logrank_split_statistic(left: &[SurvivalRecord], right: &[SurvivalRecord]) -> Result<f64> {
    if left.is_empty() || right.is_empty() {
        return Err(SurvError::Empty("log-rank group"));
    }
    let mut pooled: Vec<(f64, bool, bool)> = left
        .iter()
        .map(|r| (r.time, r.event, true))
        .chain(right.iter().map(|r| (r.time, r.event, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pooled.len();
    let mut y_left = left.len() as f64;
    let mut u = 0.0;
    let mut v = 0.0;
    let mut i = 0;
    while i < n {
        let t = pooled[i].0;
        let y = (n - i) as f64;
        let (mut d, mut d_left, mut leaving_left) = (0.0, 0.0, 0.0);
        let mut j = i;
        while j < n && pooled[j].0 == t {
            let (_, event, is_left) = pooled[j];
            if event {
                d += 1.0;
                if is_left {
                    d_left += 1.0;
                }
            }
            if is_left {
                leaving_left += 1.0;
            }
            j += 1;
        }
        if d > 0.0 {
            u += d_left - y_left * d / y;
            if y > 1.0 {
                v += d * (y_left / y) * (1.0 - y_left / y) * (y - d) / (y - 1.0);
            }
        }
        y_left -= leaving_left;
        i = j;
    }
    Ok(if v > 0.0 { u.abs() / v.sqrt() } else { 0.0 })
}

/// Binary indexed tree over `0..len` holding sums.
struct Fenwick(Vec<f64>);

impl Fenwick {
    fn new(len: usize) -> Self {
        Fenwick(vec![0.0; len + 1])
    }

    fn add(&mut self, i: usize, v: f64) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..i`.
    fn prefix(&self, i: usize) -> f64 {
        let mut i = i;
        let mut s = 0.0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Event-time summary of one node, shared by every candidate split of
/// that node.
///
/// With `K_r` the number of node event times `<= T_r`, a sample `r` is at
/// risk at exactly the event times `k < K_r`. Prefix sums over those times
/// give each sample's contribution to the observed-minus-expected count
/// and to the variance, so a sweep that moves samples left one at a time
/// updates the statistic in `O(log m)`.
pub(crate) struct NodeEvents {
    /// `K_r` per node sample, in node order.
    pub k: Vec<usize>,
    /// Nelson–Aalen prefix: `sum_{k < K} d_k / Y_k`.
    na: Vec<f64>,
    /// `sum_{k < K} c_k / Y_k`.
    a: Vec<f64>,
    /// `sum_{k < K} c_k / Y_k^2`.
    b: Vec<f64>,
    m: usize,
}

impl NodeEvents {
    pub fn new(times: &[f64], events: &[bool], samples: &[usize]) -> Self {
        let mut sorted: Vec<(f64, bool)> = samples.iter().map(|&s| (times[s], events[s])).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        let mut event_times = Vec::new();
        let (mut na, mut a, mut b) = (vec![0.0], vec![0.0], vec![0.0]);
        let mut i = 0;
        while i < n {
            let t = sorted[i].0;
            let y = (n - i) as f64;
            let mut j = i;
            let mut d = 0.0;
            while j < n && sorted[j].0 == t {
                d += f64::from(u8::from(sorted[j].1));
                j += 1;
            }
            if d > 0.0 {
                let c = if y > 1.0 { d * (y - d) / (y - 1.0) } else { 0.0 };
                event_times.push(t);
                na.push(na[na.len() - 1] + d / y);
                a.push(a[a.len() - 1] + c / y);
                b.push(b[b.len() - 1] + c / (y * y));
            }
            i = j;
        }
        let k = samples
            .iter()
            .map(|&s| event_times.partition_point(|&u| u <= times[s]))
            .collect();
        NodeEvents {
            k,
            na,
            a,
            b,
            m: event_times.len(),
        }
    }
}

/// Incremental log-rank statistic for a left group grown one sample at a
/// time from a node.
pub(crate) struct LogrankSweep<'a> {
    node: &'a NodeEvents,
    count: Fenwick,
    b_sum: Fenwick,
    n_left: f64,
    /// `D_L - sum NA(K_r)`.
    u: f64,
    /// `sum A(K_r)`.
    sa: f64,
    /// `sum_k b_k Y_Lk^2`.
    s2: f64,
}

impl<'a> LogrankSweep<'a> {
    pub fn new(node: &'a NodeEvents) -> Self {
        LogrankSweep {
            node,
            count: Fenwick::new(node.m + 1),
            b_sum: Fenwick::new(node.m + 1),
            n_left: 0.0,
            u: 0.0,
            sa: 0.0,
            s2: 0.0,
        }
    }

    /// Moves node sample `pos` (index into the node's sample list) left.
    pub fn push(&mut self, pos: usize, event: bool) {
        let node = self.node;
        let k = node.k[pos];
        let bk = node.b[k];
        // sum_{k' < K} b_k' Y_Lk' before the move
        let below = self.count.prefix(k);
        let cross = bk * (self.n_left - below) + self.b_sum.prefix(k);
        self.s2 += 2.0 * cross + bk;
        self.sa += node.a[k];
        self.u += f64::from(u8::from(event)) - node.na[k];
        self.n_left += 1.0;
        self.count.add(k, 1.0);
        self.b_sum.add(k, bk);
    }

    pub fn statistic(&self) -> f64 {
        let v = self.sa - self.s2;
        // cancellation leaves tiny positive variances on degenerate splits
        if v > 1e-12 * self.sa.max(1.0) {
            self.u.abs() / v.sqrt()
        } else {
            0.0
        }
    }
}

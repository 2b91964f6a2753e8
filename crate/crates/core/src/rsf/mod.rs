//! Random survival forest: bootstrap trees grown by exhaustive log-rank
//! split search over a random feature subset per node, Nelson–Aalen leaf
//! estimates, and ensemble-averaged cumulative hazards.

mod logrank;

pub use logrank::logrank_split_statistic;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::SurvivalRecord;
use crate::design::Matrix;
use crate::error::{Result, SurvError};
use crate::survcore::{nelson_aalen_on_grid, survival_from_chf, HazardCurve, SurvivalCurve};
use logrank::{LogrankSweep, NodeEvents};

/// Version tag written into serialized forests.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsfParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Each child of a split must hold at least this many events.
    pub min_leaf_events: usize,
    /// Nodes with at most this many samples are not split.
    pub min_node_size: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RsfParams {
    fn default() -> Self {
        RsfParams {
            n_trees: 1000,
            mtry: None,
            min_leaf_events: 5,
            min_node_size: 15,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl RsfParams {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(SurvError::invalid("n_trees must be positive"));
        }
        if self.min_leaf_events == 0 || self.min_node_size == 0 {
            return Err(SurvError::invalid("leaf and node sizes must be positive"));
        }
        if self.min_leaf_events > self.min_node_size {
            return Err(SurvError::invalid("min_leaf_events must not exceed min_node_size"));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(SurvError::invalid(format!("mtry {mtry} must lie in 1..={p}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Nelson–Aalen estimate of the in-node samples on their own event
    /// times. `mortality` is its sum over the forest's event-time grid.
    Leaf { chf: HazardCurve, mortality: f64 },
}

/// Nodes in creation order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf `row` lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    fn leaf(&self, row: &[f64]) -> (&HazardCurve, f64) {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { chf, mortality } => (chf, *mortality),
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsfModel {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    /// Distinct training event times; ensemble curves live on this grid.
    pub grid: Vec<f64>,
    pub params: RsfParams,
    pub trees: Vec<Tree>,
}

struct Training<'a> {
    x: &'a Matrix,
    times: Vec<f64>,
    events: Vec<bool>,
    grid: &'a [f64],
    params: &'a RsfParams,
    mtry: usize,
}

struct BestSplit {
    stat: f64,
    feature: usize,
    threshold: f64,
}

impl Training<'_> {
    fn leaf(&self, samples: &[usize]) -> Node {
        let pairs: Vec<(f64, bool)> = samples.iter().map(|&s| (self.times[s], self.events[s])).collect();
        let mut event_times: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
        event_times.sort_by(f64::total_cmp);
        event_times.dedup();
        let chf = if event_times.is_empty() {
            // zero hazard everywhere
            HazardCurve::new(vec![0.0], vec![0.0])
        } else {
            let values = nelson_aalen_on_grid(pairs, &event_times);
            HazardCurve::new(event_times, values)
        }
        .expect("Nelson–Aalen steps form a valid hazard curve");
        let mortality = self.grid.iter().map(|&t| chf.at(t)).sum();
        Node::Leaf { chf, mortality }
    }

    fn best_split(&self, samples: &[usize], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let node = NodeEvents::new(&self.times, &self.events, samples);
        let mut features = sample(rng, self.x.n_cols(), self.mtry).into_vec();
        features.sort_unstable();
        let total_events = samples.iter().filter(|&&s| self.events[s]).count();
        let min_events = self.params.min_leaf_events;
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for &f in &features {
            let value = |pos: usize| self.x.get(samples[pos], f);
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
            let mut sweep = LogrankSweep::new(&node);
            let mut left_events = 0;
            for w in 0..order.len() - 1 {
                let pos = order[w];
                let event = self.events[samples[pos]];
                sweep.push(pos, event);
                left_events += usize::from(event);
                let (lo, hi) = (value(pos), value(order[w + 1]));
                if lo == hi || left_events < min_events || total_events - left_events < min_events {
                    continue;
                }
                let stat = sweep.statistic();
                if best.as_ref().is_none_or(|b| stat > b.stat) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(BestSplit {
                        stat,
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                    });
                }
            }
        }
        best.filter(|b| b.stat > 0.0)
    }

    fn grow(&self, tree_index: usize) -> Tree {
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(tree_index as u64);
        let n = self.times.len();
        let root: Vec<usize> = if self.params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut nodes = vec![Node::Leaf {
            chf: HazardCurve::new(vec![0.0], vec![0.0]).expect("valid placeholder"),
            mortality: 0.0,
        }];
        let mut stack = vec![(0usize, root)];
        while let Some((id, samples)) = stack.pop() {
            let events = samples.iter().filter(|&&s| self.events[s]).count();
            let splittable = samples.len() > self.params.min_node_size
                && events >= 2 * self.params.min_leaf_events;
            let split = if splittable {
                self.best_split(&samples, &mut rng)
            } else {
                None
            };
            let Some(split) = split else {
                nodes[id] = self.leaf(&samples);
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = samples
                .iter()
                .partition(|&&s| self.x.get(s, split.feature) <= split.threshold);
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf {
                chf: HazardCurve::new(vec![0.0], vec![0.0]).expect("valid placeholder"),
                mortality: 0.0,
            });
            nodes.push(nodes[l].clone());
            nodes[id] = Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: l,
                right: r,
            };
            // right first so the left subtree is grown first
            stack.push((r, right));
            stack.push((l, left));
        }
        Tree { nodes }
    }
}

/// Fits a forest on the global rayon pool.
pub fn fit_rsf(x: &Matrix, records: &[SurvivalRecord], params: &RsfParams) -> Result<RsfModel> {
    fit_rsf_inner(x, records, params)
}

/// Fits a forest on a dedicated pool of `threads` workers. The result does
/// not depend on `threads`.
pub fn fit_rsf_with_threads(
    x: &Matrix,
    records: &[SurvivalRecord],
    params: &RsfParams,
    threads: usize,
) -> Result<RsfModel> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SurvError::invalid(format!("cannot start {threads} workers: {e}")))?;
    pool.install(|| fit_rsf_inner(x, records, params))
}

fn fit_rsf_inner(x: &Matrix, records: &[SurvivalRecord], params: &RsfParams) -> Result<RsfModel> {
    if x.n_rows() != records.len() {
        return Err(SurvError::RowMismatch {
            expected: records.len(),
            found: x.n_rows(),
        });
    }
    if records.is_empty() {
        return Err(SurvError::Empty("records"));
    }
    if !records.iter().any(|r| r.event) {
        return Err(SurvError::NoEvents);
    }
    params.validate(x.n_cols())?;
    let mut grid: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.time).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let training = Training {
        x,
        times: records.iter().map(|r| r.time).collect(),
        events: records.iter().map(|r| r.event).collect(),
        grid: &grid,
        params,
        mtry: params.resolved_mtry(x.n_cols()),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| training.grow(t))
        .collect();
    Ok(RsfModel {
        format_version: FORMAT_VERSION,
        feature_names: x.names().to_vec(),
        grid,
        params: params.clone(),
        trees,
    })
}

impl RsfModel {
    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.feature_names.len() {
            return Err(SurvError::LengthMismatch {
                expected: self.feature_names.len(),
                found: row.len(),
            });
        }
        Ok(())
    }

    /// Mean over trees of the routed leaf's cumulative hazard at each point
    /// of `grid`.
    pub fn predict_chf_on(&self, row: &[f64], grid: &[f64]) -> Result<HazardCurve> {
        self.check_row(row)?;
        let mut sum = vec![0.0; grid.len()];
        for tree in &self.trees {
            let (chf, _) = tree.leaf(row);
            let (times, values) = (chf.grid(), chf.values());
            let mut k = 0;
            for (s, &t) in sum.iter_mut().zip(grid) {
                while k < times.len() && times[k] <= t {
                    k += 1;
                }
                if k > 0 {
                    *s += values[k - 1];
                }
            }
        }
        let n = self.trees.len() as f64;
        HazardCurve::new(grid.to_vec(), sum.into_iter().map(|s| s / n).collect())
    }

    pub fn predict_chf(&self, row: &[f64]) -> Result<HazardCurve> {
        self.predict_chf_on(row, &self.grid)
    }

    pub fn predict_survival(&self, row: &[f64]) -> Result<SurvivalCurve> {
        Ok(survival_from_chf(&self.predict_chf(row)?))
    }

    pub fn predict_survival_on(&self, row: &[f64], grid: &[f64]) -> Result<SurvivalCurve> {
        Ok(survival_from_chf(&self.predict_chf_on(row, grid)?))
    }

    /// Ensemble mortality: the predicted cumulative hazard summed over the
    /// training event times. Larger means earlier expected events.
    pub fn predict_risk(&self, row: &[f64]) -> Result<f64> {
        self.check_row(row)?;
        let total: f64 = self.trees.iter().map(|t| t.leaf(row).1).sum();
        Ok(total / self.trees.len() as f64)
    }

    pub fn predict_risks(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.n_rows()).into_par_iter().map(|i| self.predict_risk(x.row(i))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: RsfModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(SurvError::ModelFormat(format!(
                "forest format version {} is not supported (expected {FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

pub fn predict_chf(model: &RsfModel, row: &[f64]) -> Result<HazardCurve> {
    model.predict_chf(row)
}

pub fn predict_survival(model: &RsfModel, row: &[f64]) -> Result<SurvivalCurve> {
    model.predict_survival(row)
}

use serde::{Deserialize, Serialize};

use super::standardize::Standardizer;
use crate::dataio::SurvivalRecord;
use crate::design::Matrix;
use crate::error::{Result, SurvError};
use crate::survcore::{HazardCurve, SurvivalCurve};

pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const DEFAULT_TOLERANCE: f64 = 1e-7;
const MIN_STEP: f64 = 1e-10;

fn check_inputs(x: &Matrix, records: &[SurvivalRecord]) -> Result<()> {
    if x.n_rows() != records.len() {
        return Err(SurvError::RowMismatch {
            expected: records.len(),
            found: x.n_rows(),
        });
    }
    if let Some(r) = records.iter().find(|r| !r.time.is_finite()) {
        return Err(SurvError::NonFinite(format!("time of {}", r.key())));
    }
    if !records.iter().any(|r| r.event) {
        return Err(SurvError::NoEvents);
    }
    Ok(())
}

/// Rows reordered by decreasing time, grouped by tied times, so every
/// risk-set sum is a running prefix sum.
#[derive(Debug, Clone)]
pub(crate) struct CoxProblem {
    /// Original row index of each sorted position.
    order: Vec<usize>,
    event: Vec<bool>,
    /// `(start, end, events)` over sorted positions.
    groups: Vec<(usize, usize, f64)>,
    /// Column-major, in sorted order.
    cols: Vec<Vec<f64>>,
}

impl CoxProblem {
    pub(crate) fn new(cols: Vec<Vec<f64>>, records: &[SurvivalRecord]) -> Self {
        let n = records.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| records[b].time.total_cmp(&records[a].time).then(a.cmp(&b)));
        let event: Vec<bool> = order.iter().map(|&i| records[i].event).collect();
        let mut groups = Vec::new();
        let mut start = 0;
        while start < n {
            let t = records[order[start]].time;
            let mut end = start;
            while end < n && records[order[end]].time == t {
                end += 1;
            }
            let d = event[start..end].iter().filter(|&&e| e).count() as f64;
            groups.push((start, end, d));
            start = end;
        }
        let cols = cols
            .into_iter()
            .map(|c| order.iter().map(|&i| c[i]).collect())
            .collect();
        CoxProblem {
            order,
            event,
            groups,
            cols,
        }
    }

    fn n(&self) -> usize {
        self.order.len()
    }

    fn p(&self) -> usize {
        self.cols.len()
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n()];
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                for (e, v) in eta.iter_mut().zip(col) {
                    *e += b * v;
                }
            }
        }
        eta
    }

    /// `exp(eta - max)` and the shift used.
    fn weights(eta: &[f64]) -> (Vec<f64>, f64) {
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = if m.is_finite() { m } else { 0.0 };
        (eta.iter().map(|e| (e - m).exp()).collect(), m)
    }

    /// Negative log partial likelihood (Breslow ties) from weights.
    fn nll_from(&self, eta: &[f64], w: &[f64], shift: f64) -> f64 {
        let mut s0 = 0.0;
        let mut logs = LogSum::default();
        let mut linear = 0.0;
        for &(start, end, d) in &self.groups {
            s0 += w[start..end].iter().sum::<f64>();
            if d > 0.0 {
                logs.add(s0, d);
                linear += d * shift;
                for k in start..end {
                    if self.event[k] {
                        linear -= eta[k];
                    }
                }
            }
        }
        logs.total() + linear
    }

    /// NLL at `eta + step * x_j`, writing the trial predictor and its
    /// weights (shifted by `shift`) into the buffers. One fused pass.
    fn trial_nll(
        &self,
        j: usize,
        step: f64,
        eta: &[f64],
        shift: f64,
        trial_eta: &mut [f64],
        trial_w: &mut [f64],
    ) -> f64 {
        let x = &self.cols[j];
        let mut s0 = 0.0;
        let mut logs = LogSum::default();
        let mut linear = 0.0;
        for &(start, end, d) in &self.groups {
            for k in start..end {
                let t = eta[k] + step * x[k];
                trial_eta[k] = t;
                let wk = (t - shift).exp();
                trial_w[k] = wk;
                s0 += wk;
                if self.event[k] {
                    linear -= t;
                }
            }
            if d > 0.0 {
                logs.add(s0, d);
                linear += d * shift;
            }
        }
        logs.total() + linear
    }

    fn nll_and_grad(&self, beta: &[f64]) -> (f64, Vec<f64>) {
        let eta = self.eta(beta);
        let (w, shift) = Self::weights(&eta);
        let value = self.nll_from(&eta, &w, shift);
        let grad = (0..self.p()).map(|j| self.coord_derivs(j, &w).0).collect();
        (value, grad)
    }

    /// First and second partial derivatives of the NLL along coordinate j.
    fn coord_derivs(&self, j: usize, w: &[f64]) -> (f64, f64) {
        let x = &self.cols[j];
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let (mut g, mut h) = (0.0, 0.0);
        for &(start, end, d) in &self.groups {
            for k in start..end {
                let wx = w[k] * x[k];
                s0 += w[k];
                s1 += wx;
                s2 += wx * x[k];
            }
            if d > 0.0 {
                let mean = s1 / s0;
                g += d * mean;
                h += d * (s2 / s0 - mean * mean);
                for k in start..end {
                    if self.event[k] {
                        g -= x[k];
                    }
                }
            }
        }
        (g, h.max(0.0))
    }

    /// Breslow cumulative baseline hazard at the distinct event times.
    fn breslow(&self, eta: &[f64], times_sorted_desc: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let mut s0 = 0.0;
        let mut jumps = Vec::new();
        for &(start, end, d) in &self.groups {
            s0 += w[start..end].iter().sum::<f64>();
            if d > 0.0 {
                jumps.push((times_sorted_desc[start], d / s0));
            }
        }
        jumps.reverse();
        let mut h = 0.0;
        jumps
            .into_iter()
            .map(|(t, dh)| {
                h += dh;
                (t, h)
            })
            .unzip()
    }
}

/// `sum(d * ln(s))` with one `ln` per run of well-scaled factors.
#[derive(Default)]
struct LogSum {
    product: f64,
    acc: f64,
    started: bool,
}

impl LogSum {
    #[inline]
    fn add(&mut self, s: f64, d: f64) {
        if !self.started {
            self.product = 1.0;
            self.started = true;
        }
        if d == 1.0 && (1e-100..=1e100).contains(&s) {
            self.product *= s;
            if !(1e-150..=1e150).contains(&self.product) {
                self.acc += self.product.ln();
                self.product = 1.0;
            }
        } else {
            self.acc += d * s.ln();
        }
    }

    fn total(&self) -> f64 {
        if self.started {
            self.acc + self.product.ln()
        } else {
            self.acc
        }
    }
}

#[inline]
fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Convergence record of one coordinate-descent solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub converged: bool,
    /// Penalized objective before the first sweep and after each sweep.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SolveOptions {
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

struct Solver<'a> {
    problem: &'a CoxProblem,
    lambda: f64,
    free: Vec<bool>,
    eta: Vec<f64>,
    w: Vec<f64>,
    shift: f64,
    nll: f64,
    trial_eta: Vec<f64>,
    trial_w: Vec<f64>,
}

impl Solver<'_> {
    fn objective(&self, beta: &[f64]) -> f64 {
        self.nll + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// One pass over `coords`; returns the largest coefficient change.
    fn sweep(&mut self, beta: &mut [f64], coords: &[usize]) -> f64 {
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let (g, h) = self.problem.coord_derivs(j, &self.w);
            if h <= 1e-300 {
                continue;
            }
            let target = soft_threshold(h * beta[j] - g, self.lambda) / h;
            let delta = target - beta[j];
            if delta == 0.0 {
                continue;
            }
            let before = self.nll + self.lambda * beta[j].abs();
            let mut step = 1.0;
            // steps this small only trade rounding noise in the objective
            while (step * delta).abs() > MIN_STEP {
                let b_new = beta[j] + step * delta;
                let mut nll = self.problem.trial_nll(
                    j,
                    step * delta,
                    &self.eta,
                    self.shift,
                    &mut self.trial_eta,
                    &mut self.trial_w,
                );
                if !nll.is_finite() {
                    // weights left the representable range; rescale
                    let (w, shift) = CoxProblem::weights(&self.trial_eta);
                    nll = self.problem.nll_from(&self.trial_eta, &w, shift);
                    if nll.is_finite() && nll + self.lambda * b_new.abs() <= before {
                        self.trial_w = w;
                        self.shift = shift;
                    } else {
                        step *= 0.5;
                        continue;
                    }
                }
                if nll + self.lambda * b_new.abs() <= before {
                    max_change = max_change.max((b_new - beta[j]).abs());
                    beta[j] = b_new;
                    std::mem::swap(&mut self.eta, &mut self.trial_eta);
                    std::mem::swap(&mut self.w, &mut self.trial_w);
                    self.nll = nll;
                    break;
                }
                step *= 0.5;
            }
        }
        max_change
    }
}

/// Penalized objective `NLL(beta) + lambda * |beta|_1`, minimized by cyclic
/// coordinate descent with soft-thresholded Newton steps along each
/// coordinate. Every accepted step lowers the objective. Full sweeps
/// alternate with sweeps over the nonzero coefficients until a full sweep
/// moves no coefficient by more than `tolerance`.
pub(crate) fn solve(
    problem: &CoxProblem,
    free: &[bool],
    lambda: f64,
    beta: &mut [f64],
    opts: SolveOptions,
) -> SolveReport {
    let eta = problem.eta(beta);
    let (w, shift) = CoxProblem::weights(&eta);
    let nll = problem.nll_from(&eta, &w, shift);
    let n = eta.len();
    let mut s = Solver {
        problem,
        lambda,
        free: free.to_vec(),
        eta,
        w,
        shift,
        nll,
        trial_eta: vec![0.0; n],
        trial_w: vec![0.0; n],
    };
    let all: Vec<usize> = (0..problem.p()).filter(|&j| s.free[j]).collect();
    let mut trace = vec![s.objective(beta)];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let change = s.sweep(beta, &all);
        sweeps += 1;
        trace.push(s.objective(beta));
        if change < opts.tolerance {
            converged = true;
            break;
        }
        while sweeps < opts.max_sweeps {
            let active: Vec<usize> = all.iter().copied().filter(|&j| beta[j] != 0.0).collect();
            let change = s.sweep(beta, &active);
            sweeps += 1;
            trace.push(s.objective(beta));
            if change < opts.tolerance {
                break;
            }
        }
    }
    SolveReport {
        sweeps,
        converged,
        objective_trace: trace,
    }
}

/// Negative log partial likelihood with Breslow tie handling, and its
/// gradient, evaluated on `x` as given (callers standardize first).
pub fn cox_neg_log_partial_likelihood(
    beta: &[f64],
    x: &Matrix,
    records: &[SurvivalRecord],
) -> Result<(f64, Vec<f64>)> {
    check_inputs(x, records)?;
    if beta.len() != x.n_cols() {
        return Err(SurvError::LengthMismatch {
            expected: x.n_cols(),
            found: beta.len(),
        });
    }
    let cols = (0..x.n_cols()).map(|j| x.column(j)).collect();
    Ok(CoxProblem::new(cols, records).nll_and_grad(beta))
}

/// Fitted L1-penalized Cox model. Coefficients live on the standardized
/// feature scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standardizer: Standardizer,
    /// Breslow estimate at the distinct training event times.
    pub baseline_chf: HazardCurve,
    pub lambda: f64,
}

impl CoxModel {
    pub fn feature_means(&self) -> &[f64] {
        &self.standardizer.means
    }

    pub fn feature_scales(&self) -> &[f64] {
        &self.standardizer.scales
    }

    pub fn predict_risk(&self, row: &[f64]) -> Result<f64> {
        self.standardizer.linear_predictor(&self.coefficients, row)
    }

    /// `S(t | x) = exp(-H0(t) * exp(x'beta))` on `grid`.
    pub fn predict_survival(&self, row: &[f64], grid: &[f64]) -> Result<SurvivalCurve> {
        let rel = self.predict_risk(row)?.exp();
        let values = grid
            .iter()
            .map(|&t| (-self.baseline_chf.at(t) * rel).exp())
            .collect();
        SurvivalCurve::new(grid.to_vec(), values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub model: CoxModel,
    pub report: SolveReport,
}

/// Internal state shared by single fits and warm-started lambda paths.
pub(crate) struct PreparedCox {
    pub problem: CoxProblem,
    pub standardizer: Standardizer,
    pub names: Vec<String>,
    times_desc: Vec<f64>,
}

impl PreparedCox {
    pub(crate) fn new(x: &Matrix, records: &[SurvivalRecord]) -> Result<Self> {
        check_inputs(x, records)?;
        let standardizer = Standardizer::fit(x);
        let problem = CoxProblem::new(standardizer.columns(x), records);
        let times_desc = problem.order.iter().map(|&i| records[i].time).collect();
        Ok(PreparedCox {
            problem,
            standardizer,
            names: x.names().to_vec(),
            times_desc,
        })
    }

    pub(crate) fn free(&self) -> Vec<bool> {
        self.standardizer.constant.iter().map(|c| !c).collect()
    }

    /// Smallest lambda with an all-zero solution: `max_j |dNLL/dbeta_j(0)|`.
    pub(crate) fn lambda_max(&self) -> f64 {
        let (w, _) = CoxProblem::weights(&vec![0.0; self.problem.n()]);
        (0..self.problem.p())
            .filter(|&j| !self.standardizer.constant[j])
            .map(|j| self.problem.coord_derivs(j, &w).0.abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn fit_from(
        &self,
        lambda: f64,
        beta: &mut Vec<f64>,
        opts: SolveOptions,
    ) -> Result<CoxFit> {
        let report = solve(&self.problem, &self.free(), lambda, beta, opts);
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(SurvError::NonFinite("cox coefficients".into()));
        }
        let eta = self.problem.eta(beta);
        let (times, values) = self.problem.breslow(&eta, &self.times_desc);
        let baseline_chf = HazardCurve::new(times, values)?;
        Ok(CoxFit {
            model: CoxModel {
                feature_names: self.names.clone(),
                coefficients: beta.clone(),
                standardizer: self.standardizer.clone(),
                baseline_chf,
                lambda,
            },
            report,
        })
    }
}

pub fn fit_lasso_cox(x: &Matrix, records: &[SurvivalRecord], lambda: f64) -> Result<CoxFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SurvError::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    let prepared = PreparedCox::new(x, records)?;
    let mut beta = vec![0.0; x.n_cols()];
    prepared.fit_from(lambda, &mut beta, SolveOptions::default())
}

/// Indices of coefficients with `|beta_j| > tolerance`.
pub fn select_features(model: &CoxModel, tolerance: f64) -> Vec<usize> {
    model
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > tolerance)
        .map(|(j, _)| j)
        .collect()
}

pub fn predict_risk(model: &CoxModel, row: &[f64]) -> Result<f64> {
    model.predict_risk(row)
}

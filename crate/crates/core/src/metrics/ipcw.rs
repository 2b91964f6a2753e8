//! Censoring-weighted time-dependent metrics: cumulative/dynamic AUC and
//! the Brier score with its integral over a grid.
//!
//! Weights come from the Kaplan–Meier estimate G of the censoring
//! distribution on the evaluation records. A record with an event at
//! `T <= t` is weighted by `1 / G(T-)`; a record still at risk after `t` by
//! `1 / G(t)`; a record censored at or before `t` carries no information.

use serde::{Deserialize, Serialize};

use crate::dataio::SurvivalRecord;
use crate::error::{Result, SurvError};
use crate::survcore::{ProductLimit, SurvivalCurve};

fn check_aligned(curves: &[SurvivalCurve], records: &[SurvivalRecord]) -> Result<()> {
    if curves.len() != records.len() {
        return Err(SurvError::LengthMismatch {
            expected: records.len(),
            found: curves.len(),
        });
    }
    if records.is_empty() {
        return Err(SurvError::Empty("records"));
    }
    Ok(())
}

fn check_within(curves: &[SurvivalCurve], t: f64) -> Result<()> {
    let grid = curves[0].grid();
    if t < grid[0] || t > grid[grid.len() - 1] {
        return Err(SurvError::invalid(format!(
            "evaluation time {t} lies outside the curve grid"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    /// `(time, AUC)` for each time with at least one case and one control.
    pub per_time: Vec<(f64, f64)>,
    /// Unweighted mean over `per_time`.
    pub mean: f64,
    /// Times skipped for lack of cases or controls.
    pub skipped_times: Vec<f64>,
    /// Case records dropped because their censoring weight was zero,
    /// summed over times.
    pub zero_weight_excluded: usize,
}

/// Cumulative/dynamic AUC at each of `times`, ranking by `1 - S_i(t)`.
/// Cases (event by `t`) carry inverse-censoring weights; controls (still
/// at risk after `t`) count once. Risk ties earn half credit.
pub fn cumulative_dynamic_auc(
    curves: &[SurvivalCurve],
    records: &[SurvivalRecord],
    times: &[f64],
) -> Result<AucResult> {
    check_aligned(curves, records)?;
    if times.is_empty() {
        return Err(SurvError::Empty("evaluation times"));
    }
    let g = ProductLimit::censoring(records);
    let mut per_time = Vec::new();
    let mut skipped = Vec::new();
    let mut excluded = 0;
    for &t in times {
        check_within(curves, t)?;
        let risk: Vec<f64> = curves.iter().map(|c| 1.0 - c.at(t)).collect();
        let mut controls: Vec<f64> = records
            .iter()
            .zip(&risk)
            .filter(|(r, _)| r.time > t)
            .map(|(_, &k)| k)
            .collect();
        controls.sort_by(f64::total_cmp);

        let mut num = 0.0;
        let mut case_weight = 0.0;
        for (r, &k) in records.iter().zip(&risk) {
            if !(r.event && r.time <= t) {
                continue;
            }
            let gw = g.before(r.time);
            if gw <= 0.0 {
                excluded += 1;
                continue;
            }
            let w = 1.0 / gw;
            let below = controls.partition_point(|&c| c < k);
            let at_or_below = controls.partition_point(|&c| c <= k);
            num += w * (below as f64 + 0.5 * (at_or_below - below) as f64);
            case_weight += w;
        }
        if controls.is_empty() || case_weight == 0.0 {
            skipped.push(t);
            continue;
        }
        per_time.push((t, num / (case_weight * controls.len() as f64)));
    }
    if per_time.is_empty() {
        return Err(SurvError::invalid(
            "AUC is undefined at every evaluation time (no cases or no controls)",
        ));
    }
    let mean = per_time.iter().map(|p| p.1).sum::<f64>() / per_time.len() as f64;
    Ok(AucResult {
        per_time,
        mean,
        skipped_times: skipped,
        zero_weight_excluded: excluded,
    })
}

/// Inverse-censoring-weighted Brier score at `t`, averaged over all
/// records.
pub fn brier_score(curves: &[SurvivalCurve], records: &[SurvivalRecord], t: f64) -> Result<f64> {
    check_aligned(curves, records)?;
    check_within(curves, t)?;
    let g = ProductLimit::censoring(records);
    brier_with(&g, curves, records, t)
}

fn brier_with(
    g: &ProductLimit,
    curves: &[SurvivalCurve],
    records: &[SurvivalRecord],
    t: f64,
) -> Result<f64> {
    let g_t = g.at(t);
    let mut total = 0.0;
    let mut any_weight = false;
    for (c, r) in curves.iter().zip(records) {
        let s = c.at(t);
        if r.time <= t && r.event {
            let gw = g.before(r.time);
            if gw > 0.0 {
                total += s * s / gw;
                any_weight = true;
            }
        } else if r.time > t && g_t > 0.0 {
            total += (1.0 - s) * (1.0 - s) / g_t;
            any_weight = true;
        }
    }
    if !any_weight {
        return Err(SurvError::invalid(format!(
            "every censoring weight is zero at t = {t}"
        )));
    }
    Ok(total / records.len() as f64)
}

/// Trapezoidal integral of `values` over `points`, divided by the span.
pub fn normalized_trapezoid(points: &[f64], values: &[f64]) -> Result<f64> {
    if points.len() < 2 || points.len() != values.len() {
        return Err(SurvError::invalid(
            "need at least two points with one value each",
        ));
    }
    let area: f64 = points
        .windows(2)
        .zip(values.windows(2))
        .map(|(p, v)| (p[1] - p[0]) * (v[0] + v[1]) / 2.0)
        .sum();
    Ok(area / (points[points.len() - 1] - points[0]))
}

/// Integrated Brier score: the Brier score at every grid point,
/// integrated by trapezoids and divided by the grid span.
pub fn integrated_brier(
    curves: &[SurvivalCurve],
    records: &[SurvivalRecord],
    grid: &[f64],
) -> Result<f64> {
    check_aligned(curves, records)?;
    if grid.len() < 2 {
        return Err(SurvError::invalid("integrated Brier score needs >= 2 grid points"));
    }
    let g = ProductLimit::censoring(records);
    let scores = grid
        .iter()
        .map(|&t| {
            check_within(curves, t)?;
            brier_with(&g, curves, records, t)
        })
        .collect::<Result<Vec<_>>>()?;
    normalized_trapezoid(grid, &scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::records_from;

    fn grid() -> Vec<f64> {
        (0..=9).map(f64::from).collect()
    }

    fn step_curve(event_time: f64) -> SurvivalCurve {
        let g = grid();
        let v = g.iter().map(|&t| if t < event_time { 1.0 } else { 0.0 }).collect();
        SurvivalCurve::new(g, v).unwrap()
    }

    fn flat(v: f64) -> SurvivalCurve {
        let g = grid();
        let mut vals = vec![v; g.len()];
        vals[0] = 1.0;
        SurvivalCurve::new(g, vals).unwrap()
    }

    #[test]
    fn separating_predictions_give_auc_one() {
        let t = [1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.0, 9.0];
        let e = [true, true, true, true, true, true, true, true, false, false];
        let recs = records_from(&t, &e);
        let curves: Vec<_> = t.iter().zip(&e).map(|(&t, &e)| if e { step_curve(t) } else { flat(1.0) }).collect();
        let times: Vec<f64> = (1..=9).map(f64::from).collect();
        let auc = cumulative_dynamic_auc(&curves, &recs, &times).unwrap();
        // no case by t=1; nobody beyond t=9
        assert_eq!(auc.skipped_times, vec![1.0, 9.0]);
        assert!(auc.per_time.iter().all(|&(_, a)| a == 1.0));
        assert_eq!(auc.mean, 1.0);
    }

    #[test]
    fn identical_curves_give_half() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let e = [true, false, true, true, false, true];
        let recs = records_from(&t, &e);
        let curves = vec![flat(0.7); 6];
        let auc = cumulative_dynamic_auc(&curves, &recs, &[1.0, 3.0, 5.0]).unwrap();
        assert!(auc.per_time.iter().all(|&(_, a)| a == 0.5));
    }

    #[test]
    fn brier_oracle_and_constant() {
        let t = [1.0, 2.0, 3.5, 7.0];
        let recs = records_from(&t, &[true; 4]);
        let curves: Vec<_> = t.iter().map(|&t| step_curve(t)).collect();
        for s in grid() {
            assert_eq!(brier_score(&curves, &recs, s).unwrap(), 0.0);
        }
        assert_eq!(integrated_brier(&curves, &recs, &grid()).unwrap(), 0.0);
        let half = vec![flat(0.5); 4];
        assert_eq!(brier_score(&half, &recs, 3.0).unwrap(), 0.25);
    }

    #[test]
    fn trapezoid_arithmetic() {
        let g = grid();
        let constant = vec![0.13; g.len()];
        assert!((normalized_trapezoid(&g, &constant).unwrap() - 0.13).abs() < 1e-15);
        let linear: Vec<f64> = g.iter().map(|t| 0.2 * t / 9.0).collect();
        assert!((normalized_trapezoid(&g, &linear).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn brier_rejects_all_zero_weights() {
        let recs = records_from(&[1.0, 1.0], &[false, false]);
        let curves = vec![flat(0.5); 2];
        assert!(brier_score(&curves, &recs, 2.0).is_err());
    }
}

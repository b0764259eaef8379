//! Knapsack-cover LP over a capacitated rectangle instance.
//!
//! The base relaxation has one variable per rectangle (in `[0, 1]`) and one
//! row per point: total chosen capacity covering the point must reach its
//! demand. That relaxation can be a factor of `demand` too weak, so the
//! solver strengthens it with knapsack-cover rows: committing to a set `S`
//! of coverers, the others must still supply `demand - capacity(S)`, and
//! each coefficient may be truncated to that residual. Rows are generated
//! lazily: after each solve, every point's threshold set (coverers with
//! `x >= beta`) is tried as the committed set, and new violated rows enter
//! the LP until none remain.
//!
//! Validity of every generated row needs only that taking all rectangles
//! covers everything, which is checked up front. Termination is enforced by
//! a generous round cap; the objective trace is monotone and both are
//! reported back to the caller.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::LinearProgram;
use crate::r2c::{verify_cover, Cover, R2cInstance};

/// A generated row is considered violated only beyond this slack.
pub const LP_EPS: f64 = 1e-7;

/// Coverers with `x` this close to `beta` still count as committed, so a
/// variable sitting numerically at the threshold lands in the set.
const THRESHOLD_SLOP: f64 = 1e-9;

/// The committed coverers of `point` at solution `x`: those with
/// `x_r >= beta`. Every stage after the LP derives its sets through here,
/// so the LP and the rounding agree on what "committed" means.
pub fn threshold_set(coverers: &[usize], x: &[f64], beta: f64) -> Vec<usize> {
    coverers.iter().copied().filter(|&r| x[r] >= beta - THRESHOLD_SLOP).collect()
}

/// Identity of a knapsack-cover row: a point and the committed coverers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KcCut {
    pub point: usize,
    /// Sorted rectangle indices.
    pub committed: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct KcLpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Number of solves performed (1 means the base LP already closed).
    pub rounds: usize,
    /// Cut rows added, in addition order.
    pub cuts: Vec<KcCut>,
    /// Objective after each solve; nondecreasing.
    pub value_trace: Vec<f64>,
}

/// Coefficients and right-hand side of a cut row; integral by construction.
fn materialize(r2c: &R2cInstance, coverers: &[usize], cut: &KcCut) -> Option<(Vec<(usize, u64)>, u64)> {
    let committed: BTreeSet<usize> = cut.committed.iter().copied().collect();
    let committed_cap: u64 = coverers
        .iter()
        .filter(|r| committed.contains(r))
        .map(|&r| r2c.rects[r].capacity)
        .sum();
    let demand = r2c.points[cut.point].demand;
    if committed_cap >= demand {
        return None;
    }
    let rhs = demand - committed_cap;
    let coeffs = coverers
        .iter()
        .filter(|r| !committed.contains(r))
        .map(|&r| (r, r2c.rects[r].capacity.min(rhs)))
        .collect();
    Some((coeffs, rhs))
}

pub fn solve_kc_lp(r2c: &R2cInstance, beta: f64) -> Result<KcLpSolution> {
    solve_with_cuts(r2c, beta, &[])
}

/// Runs the cut loop with extra rows forced in up front. The seeding hook
/// exists so callers (and tests) can study specific rows; `solve_kc_lp` is
/// the ordinary entry point.
pub fn solve_with_cuts(r2c: &R2cInstance, beta: f64, seeded: &[KcCut]) -> Result<KcLpSolution> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::BadParameter(format!("beta must lie in (0, 1), got {beta}")));
    }
    let all: Cover = (0..r2c.rects.len()).collect();
    let report = verify_cover(r2c, &all);
    if let Some(p) = report.first_violation {
        return Err(Error::InfeasibleCover { point: p, deficit: (-report.slacks[p]) as u64 });
    }

    let coverers: Vec<Vec<usize>> = (0..r2c.points.len()).map(|p| r2c.coverers(p)).collect();
    let mut lp = LinearProgram::new(
        r2c.rects.iter().map(|r| r.weight as f64).collect(),
        vec![1.0; r2c.rects.len()],
    );
    for (p, point) in r2c.points.iter().enumerate() {
        let coeffs = coverers[p].iter().map(|&r| (r, r2c.rects[r].capacity as f64)).collect();
        lp.add_row(coeffs, point.demand as f64);
    }

    let mut pool: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
    // strongest right-hand side seen per coefficient vector; weaker
    // duplicates of an existing row are implied and skipped
    let mut row_strength: HashMap<Vec<(usize, u64)>, u64> = HashMap::new();
    let mut cuts: Vec<KcCut> = Vec::new();
    fn add_cut(
        lp: &mut LinearProgram,
        cuts: &mut Vec<KcCut>,
        pool: &mut BTreeSet<(usize, Vec<usize>)>,
        row_strength: &mut HashMap<Vec<(usize, u64)>, u64>,
        cut: KcCut,
        coeffs: Vec<(usize, u64)>,
        rhs: u64,
    ) {
        if !pool.insert((cut.point, cut.committed.clone())) {
            return;
        }
        let strongest = row_strength.entry(coeffs.clone()).or_insert(0);
        if rhs > *strongest {
            *strongest = rhs;
            lp.add_row(coeffs.iter().map(|&(r, c)| (r, c as f64)).collect(), rhs as f64);
            cuts.push(cut);
        }
    }

    for cut in seeded {
        if let Some((coeffs, rhs)) = materialize(r2c, &coverers[cut.point], cut) {
            let mut sorted = cut.committed.clone();
            sorted.sort_unstable();
            add_cut(
                &mut lp,
                &mut cuts,
                &mut pool,
                &mut row_strength,
                KcCut { point: cut.point, committed: sorted },
                coeffs,
                rhs,
            );
        }
    }

    let max_rounds = 50 * r2c.points.len().max(1);
    let mut trace: Vec<f64> = Vec::new();
    loop {
        let sol = lp.solve()?;
        if let Some(&prev) = trace.last() {
            debug_assert!(sol.objective >= prev - 1e-6, "objective fell: {prev} -> {}", sol.objective);
        }
        trace.push(sol.objective);
        if trace.len() > max_rounds {
            return Err(Error::CutLoopStalled { rounds: trace.len() });
        }

        let scan = |p: usize| -> Option<(KcCut, Vec<(usize, u64)>, u64)> {
            let committed = threshold_set(&coverers[p], &sol.values, beta);
            let cut = KcCut { point: p, committed };
            if pool.contains(&(cut.point, cut.committed.clone())) {
                return None;
            }
            let (coeffs, rhs) = materialize(r2c, &coverers[p], &cut)?;
            let lhs: f64 = coeffs.iter().map(|&(r, c)| c as f64 * sol.values[r]).sum();
            (lhs < rhs as f64 - LP_EPS).then_some((cut, coeffs, rhs))
        };
        #[cfg(feature = "parallel")]
        let mut found: Vec<_> = (0..r2c.points.len()).into_par_iter().filter_map(scan).collect();
        #[cfg(not(feature = "parallel"))]
        let mut found: Vec<_> = (0..r2c.points.len()).filter_map(scan).collect();
        found.sort_by(|a, b| a.0.point.cmp(&b.0.point));

        if found.is_empty() {
            return Ok(KcLpSolution {
                x: sol.values,
                objective: sol.objective,
                rounds: trace.len(),
                cuts,
                value_trace: trace,
            });
        }
        for (cut, coeffs, rhs) in found {
            add_cut(&mut lp, &mut cuts, &mut pool, &mut row_strength, cut, coeffs, rhs);
        }
    }
}

/// Slack of every point's knapsack-cover row at its threshold set under
/// `x`. A committed set already meeting the demand yields a trivially
/// nonnegative slack; anything below `-1e-6` means the solution does not
/// support the rounding stage.
pub fn check_kc_residual(r2c: &R2cInstance, x: &[f64], beta: f64) -> Vec<f64> {
    (0..r2c.points.len())
        .map(|p| {
            let coverers = r2c.coverers(p);
            let committed = threshold_set(&coverers, x, beta);
            let cut = KcCut { point: p, committed };
            match materialize(r2c, &coverers, &cut) {
                Some((coeffs, rhs)) => {
                    let lhs: f64 = coeffs.iter().map(|&(r, c)| c as f64 * x[r]).sum();
                    lhs - rhs as f64
                }
                None => {
                    let committed_cap: u64 = cut
                        .committed
                        .iter()
                        .map(|&r| r2c.rects[r].capacity)
                        .sum();
                    (committed_cap - r2c.points[p].demand) as f64
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsp::{GspInstance, Job, WeightFunction};
    use crate::r2c::{reduce_to_r2c, R2cPoint, R2cRect};

    const BETA: f64 = 1.0 / 12.0;

    fn rect(id: &str, capacity: u64, weight: u128) -> R2cRect {
        R2cRect { id: id.into(), origin: None, xmax: 1, y_lo: 1, y_hi: 1, capacity, weight }
    }

    fn one_point(demand: u64, rects: Vec<R2cRect>) -> R2cInstance {
        R2cInstance {
            points: vec![R2cPoint { x: 1, y: 1, demand, window: (1, 1) }],
            rects,
        }
    }

    #[test]
    fn single_rect_is_bought_whole() {
        let r2c = one_point(1, vec![rect("r", 1, 5)]);
        let sol = solve_kc_lp(&r2c, BETA).unwrap();
        assert!((sol.objective - 5.0).abs() < 1e-9);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!(sol.cuts.is_empty());
    }

    #[test]
    fn fractional_split_with_no_useful_cut() {
        // demand 3 against two capacity-2 rectangles: x = (0.75, 0.75) costs
        // 1.5, and the threshold set holds 4 >= 3, so no row tightens it
        let r2c = one_point(3, vec![rect("r1", 2, 1), rect("r2", 2, 1)]);
        let sol = solve_kc_lp(&r2c, BETA).unwrap();
        assert!((sol.objective - 1.5).abs() < 1e-9);
        assert!(sol.cuts.is_empty());
        assert_eq!(sol.rounds, 1);
    }

    #[test]
    fn seeded_row_closes_the_integrality_gap() {
        // demand 2; A has capacity 2 at weight 10, B capacity 1 at weight 1.
        // The plain relaxation pays 6 (half of A plus all of B) while any
        // real cover pays 10. Committing to B leaves residual 1, and the
        // truncated row x_A >= 1 closes the gap.
        let r2c = one_point(2, vec![rect("A", 2, 10), rect("B", 1, 1)]);
        let plain = solve_kc_lp(&r2c, BETA).unwrap();
        assert!((plain.objective - 6.0).abs() < 1e-9);

        let seeded = solve_with_cuts(&r2c, BETA, &[KcCut { point: 0, committed: vec![1] }]).unwrap();
        assert!((seeded.objective - 10.0).abs() < 1e-9);
        assert!((seeded.x[0] - 1.0).abs() < 1e-9);
        assert_eq!(seeded.cuts.len(), 1);
        assert!(seeded.value_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn desk_instance_relaxation_value() {
        let inst = GspInstance::new(vec![
            Job { id: "a".into(), release: 1, size: 2, weight: WeightFunction::Constant { w: 1 } },
            Job { id: "b".into(), release: 2, size: 1, weight: WeightFunction::Constant { w: 2 } },
        ])
        .unwrap();
        let r2c = reduce_to_r2c(&inst).unwrap();
        let sol = solve_kc_lp(&r2c, BETA).unwrap();
        // forced singleton rows pin a:1 and b:2; half of a:2 finishes it
        assert!((sol.objective - 5.5).abs() < 1e-9);
        // never above the integral optimum of 7
        assert!(sol.objective <= 7.0 + 1e-9);
        let residuals = check_kc_residual(&r2c, &sol.x, BETA);
        assert!(residuals.iter().all(|&s| s >= -1e-6), "{residuals:?}");
    }

    #[test]
    fn uncoverable_point_is_rejected_up_front() {
        let r2c = one_point(5, vec![rect("r", 1, 1)]);
        assert!(matches!(
            solve_kc_lp(&r2c, BETA),
            Err(Error::InfeasibleCover { point: 0, deficit: 4 })
        ));
    }

    #[test]
    fn beta_is_validated() {
        let r2c = one_point(1, vec![rect("r", 1, 1)]);
        assert!(matches!(solve_kc_lp(&r2c, 0.0), Err(Error::BadParameter(_))));
        assert!(matches!(solve_kc_lp(&r2c, 1.0), Err(Error::BadParameter(_))));
    }

    #[test]
    fn residuals_flag_the_zero_vector() {
        let r2c = one_point(2, vec![rect("A", 2, 10), rect("B", 1, 1)]);
        let zero = check_kc_residual(&r2c, &[0.0, 0.0], BETA);
        assert!(zero[0] < -1.0); // empty threshold set leaves the demand bare
        let ones = check_kc_residual(&r2c, &[1.0, 1.0], BETA);
        assert!(ones.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn threshold_set_respects_slop() {
        let x = [BETA - 1e-12, BETA - 1e-3, 0.9];
        assert_eq!(threshold_set(&[0, 1, 2], &x, BETA), vec![0, 2]);
    }
}

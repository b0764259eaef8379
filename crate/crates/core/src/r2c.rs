//! Reduction from scheduling to capacitated rectangle covering, and back.
//!
//! For each job and cost class there is one axis-anchored rectangle
//! `[0, release] x classInterval`, with capacity equal to the job size and
//! weight `2^k - 1` for class `k`. Demand points come from time windows
//! `[t1, t2]` over the instance's breakpoints: a point sits at `(t1, t2+1)`
//! and demands the released work that provably cannot finish inside the
//! window. A rectangle covers a point when `x <= release` and the point's
//! `y` lies in the class interval — i.e. the job is released inside the
//! window and its chosen completion class ends past it.
//!
//! Windows are closed and the point's `y` is `t2 + 1`: a job helps a window
//! only if it completes strictly after it. That convention is what makes
//! cover feasibility equivalent to the earliest-deadline load condition, so
//! every feasible cover pulls back to a schedule (and vice versa) with the
//! factor-4 weight sandwich checked in the tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsp::{edf_schedule, GspInstance, Schedule, Time};
use crate::jsonio::int53;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct R2cPoint {
    pub x: Time,
    pub y: Time,
    pub demand: u64,
    /// The originating time window `[t1, t2]`.
    pub window: (Time, Time),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct R2cRect {
    pub id: String,
    /// Job index and class when the rectangle came out of a reduction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<(usize, u32)>,
    pub xmax: Time,
    pub y_lo: Time,
    pub y_hi: Time,
    pub capacity: u64,
    #[serde(with = "int53")]
    pub weight: u128,
}

impl R2cRect {
    pub fn covers(&self, p: &R2cPoint) -> bool {
        p.x <= self.xmax && self.y_lo <= p.y && p.y <= self.y_hi
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct R2cInstance {
    pub points: Vec<R2cPoint>,
    pub rects: Vec<R2cRect>,
}

impl R2cInstance {
    /// Indices of rectangles covering point `p`, in rectangle order.
    pub fn coverers(&self, p: usize) -> Vec<usize> {
        let point = &self.points[p];
        (0..self.rects.len()).filter(|&r| self.rects[r].covers(point)).collect()
    }

    pub fn rect_index(&self, id: &str) -> Result<usize> {
        self.rects
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| Error::Uncoverable(format!("no rectangle with id {id:?}")))
    }

    pub fn total_weight(&self, chosen: &BTreeSet<usize>) -> u128 {
        chosen.iter().map(|&r| self.rects[r].weight).sum()
    }
}

/// A selected set of rectangles, by index into the instance.
pub type Cover = BTreeSet<usize>;

/// Builds the covering instance for a scheduling instance.
///
/// Breakpoints are the releases, the endpoints of every nonempty class
/// interval, and those endpoints plus one, clipped to `[1, horizon]`. Every
/// pair `t1 <= t2` of breakpoints whose window holds more released work than
/// its width yields a demand point; the rest are dropped. Output order is
/// deterministic: points sorted by `(x, y)`, rectangles by job then class.
pub fn reduce_to_r2c(inst: &GspInstance) -> Result<R2cInstance> {
    let horizon = inst.horizon();
    let mut breaks: BTreeSet<Time> = BTreeSet::new();
    let mut rects = Vec::new();
    for (j, job) in inst.jobs().iter().enumerate() {
        breaks.insert(job.release);
        for k in 0..=inst.max_class(j)? {
            if let Some((lo, hi)) = inst.class_interval(j, k)? {
                for e in [lo, hi, lo + 1, hi + 1] {
                    if (1..=horizon).contains(&e) {
                        breaks.insert(e);
                    }
                }
                if k > 127 {
                    return Err(Error::CapExceeded(format!("class {k} weight overflows")));
                }
                rects.push(R2cRect {
                    id: format!("{}:{}", job.id, k),
                    origin: Some((j, k)),
                    xmax: job.release,
                    y_lo: lo,
                    y_hi: hi,
                    capacity: job.size,
                    weight: (1u128 << k) - 1,
                });
            }
        }
    }
    let breaks: Vec<Time> = breaks.into_iter().collect();
    let mut points = Vec::new();
    for (i, &t1) in breaks.iter().enumerate() {
        for &t2 in &breaks[i..] {
            let released: u64 = inst
                .jobs()
                .iter()
                .filter(|j| t1 <= j.release && j.release <= t2)
                .map(|j| j.size)
                .sum();
            if released > t2 - t1 {
                let demand = released - (t2 - t1);
                debug_assert!(t2 < horizon, "windows touching the horizon never have unmet work");
                points.push(R2cPoint { x: t1, y: t2 + 1, demand, window: (t1, t2) });
            }
        }
    }
    points.sort_by_key(|p| (p.x, p.y));
    Ok(R2cInstance { points, rects })
}

/// Per-point supply report for a candidate cover.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    #[serde(with = "int53")]
    pub total_weight: u128,
    /// `supply - demand` per point; negative means uncovered.
    pub slacks: Vec<i128>,
    pub first_violation: Option<usize>,
}

/// Checks capacity coverage of every point and totals the chosen weight.
pub fn verify_cover(r2c: &R2cInstance, chosen: &Cover) -> FeasibilityReport {
    let mut slacks = Vec::with_capacity(r2c.points.len());
    let mut first_violation = None;
    for (p, point) in r2c.points.iter().enumerate() {
        let supply: u128 = chosen
            .iter()
            .filter(|&&r| r2c.rects[r].covers(point))
            .map(|&r| r2c.rects[r].capacity as u128)
            .sum();
        let slack = supply as i128 - point.demand as i128;
        if slack < 0 && first_violation.is_none() {
            first_violation = Some(p);
        }
        slacks.push(slack);
    }
    FeasibilityReport {
        feasible: first_violation.is_none(),
        total_weight: r2c.total_weight(chosen),
        slacks,
        first_violation,
    }
}

/// The cover induced by a feasible schedule: for each job, all classes up to
/// the class of its completion cost (skipping empty intervals). Its weight
/// telescopes to at most four times the schedule cost.
pub fn cover_from_schedule(
    inst: &GspInstance,
    r2c: &R2cInstance,
    sched: &Schedule,
) -> Result<Cover> {
    sched.validate(inst)?;
    let by_origin: BTreeMap<(usize, u32), usize> = r2c
        .rects
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.origin.map(|o| (o, i)))
        .collect();
    let mut chosen = Cover::new();
    for (j, completion) in sched.completions(inst.jobs().len()).iter().enumerate() {
        let c = completion.ok_or_else(|| {
            Error::InfeasibleSchedule(format!("job index {j} never runs"))
        })?;
        let top = GspInstance::class_of_cost(inst.cumulative_cost(j, c)?);
        for k in 0..=top {
            if let Some(&r) = by_origin.get(&(j, k)) {
                chosen.insert(r);
            }
        }
    }
    Ok(chosen)
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub schedule: Schedule,
    pub deadlines: Vec<Time>,
    pub cover_weight: u128,
}

/// Pulls a feasible cover back to a schedule: each job's deadline is the
/// right endpoint of its highest chosen class interval, then EDF runs.
///
/// Any feasible cover of a reduction includes, for every job, a rectangle
/// whose interval contains the slot after the release (the width-zero
/// window at the release forces it), so every job gets a deadline; a
/// missing one on a feasible cover is an internal soundness failure. The
/// schedule's cost never exceeds the cover weight.
pub fn schedule_from_cover(
    inst: &GspInstance,
    r2c: &R2cInstance,
    chosen: &Cover,
) -> Result<Reconstruction> {
    let report = verify_cover(r2c, chosen);
    if let Some(p) = report.first_violation {
        return Err(Error::InfeasibleCover {
            point: p,
            deficit: (-report.slacks[p]) as u64,
        });
    }
    let mut top_class: Vec<Option<u32>> = vec![None; inst.jobs().len()];
    for &r in chosen {
        if let Some((j, k)) = r2c.rects[r].origin {
            top_class[j] = Some(top_class[j].map_or(k, |cur| cur.max(k)));
        }
    }
    let mut deadlines = Vec::with_capacity(inst.jobs().len());
    for (j, top) in top_class.iter().enumerate() {
        match top {
            Some(k) => {
                let (_, hi) = inst.class_interval(j, *k)?.ok_or_else(|| {
                    Error::Invariant(format!("chosen rectangle references empty class {k} of job {j}"))
                })?;
                deadlines.push(hi);
            }
            None => {
                // only harmless for jobs that can finish at zero cost
                if inst.cumulative_cost(j, inst.horizon())? > 0 {
                    return Err(Error::Invariant(format!(
                        "feasible cover chose no rectangle of cost-positive job {:?}",
                        inst.jobs()[j].id
                    )));
                }
                deadlines.push(inst.horizon());
            }
        }
    }
    let schedule = edf_schedule(inst, &deadlines).map_err(|e| match e {
        Error::DeadlinesInfeasible { start, end } => Error::Invariant(format!(
            "feasible cover produced infeasible deadlines (window [{start}, {end}] overloaded)"
        )),
        other => other,
    })?;
    Ok(Reconstruction { schedule, deadlines, cover_weight: report.total_weight })
}

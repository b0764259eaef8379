//! Preemptive single-machine scheduling with monotone completion costs.
//!
//! Time is integral. Slot `t` occupies the interval `(t-1, t]`, so a job
//! released at `r` may use slots `r+1, r+2, ...` and the cost of finishing
//! at slot `t` is the sum of the per-slot weight increments over
//! `(r, t]`. Increments are nonnegative, so completion cost is monotone in
//! the completion time; that monotonicity is what the class machinery below
//! binary-searches against.
//!
//! Within this module every quantity is an integer. Costs use `u128`, which
//! leaves ample headroom above the `2^53` magnitude cap enforced at the
//! JSON boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Time = u64;
pub type Cost = u128;

/// Per-slot cost increments of a job, as a function of absolute time.
///
/// All variants are nonnegative and therefore yield monotone cumulative
/// costs. `Table` is a step function over absolute times: the increment at
/// slot `s` is the value of the last breakpoint at or before `s`, and `0`
/// before the first breakpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    /// Weighted flow time: a constant increment per slot past release.
    Constant { w: u64 },
    /// Weighted tardiness: free through the deadline, `w` per slot after.
    Deadline { d: Time, w: u64 },
    /// Squared flow time: finishing at `t` costs `(t - r)^2` in total.
    SquaredFlow,
    /// Arbitrary step function given as `(time, increment)` breakpoints.
    Table { steps: Vec<(Time, u64)> },
}

impl WeightFunction {
    fn validate(&self) -> Result<()> {
        if let WeightFunction::Table { steps } = self {
            for w in steps.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::InvalidInstance(
                        "table breakpoints must have strictly increasing times".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Increment charged for slot `t` to a job released at `release`.
    /// Callers guarantee `t > release`.
    pub fn increment(&self, release: Time, t: Time) -> Cost {
        debug_assert!(t > release);
        match self {
            WeightFunction::Constant { w } => *w as Cost,
            WeightFunction::Deadline { d, w } => {
                if t > *d {
                    *w as Cost
                } else {
                    0
                }
            }
            WeightFunction::SquaredFlow => 2 * (t - release) as Cost - 1,
            WeightFunction::Table { steps } => steps
                .iter()
                .take_while(|(time, _)| *time <= t)
                .last()
                .map_or(0, |(_, v)| *v as Cost),
        }
    }

    /// Sum of increments over `(release, t]` in closed form (no per-slot loop).
    fn cumulative(&self, release: Time, t: Time) -> Cost {
        debug_assert!(t >= release);
        let elapsed = (t - release) as Cost;
        match self {
            WeightFunction::Constant { w } => *w as Cost * elapsed,
            WeightFunction::Deadline { d, w } => {
                let free_until = (*d).max(release);
                if t > free_until {
                    *w as Cost * (t - free_until) as Cost
                } else {
                    0
                }
            }
            WeightFunction::SquaredFlow => elapsed * elapsed,
            WeightFunction::Table { steps } => {
                // Each breakpoint value applies from its time up to the next
                // breakpoint; clip every such span to (release, t].
                let mut total: Cost = 0;
                for (i, (start, v)) in steps.iter().enumerate() {
                    let span_end = steps.get(i + 1).map_or(Time::MAX, |(next, _)| next - 1);
                    let lo = (*start).max(release + 1);
                    let hi = span_end.min(t);
                    if lo <= hi {
                        total += *v as Cost * (hi - lo + 1) as Cost;
                    }
                }
                total
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub release: Time,
    pub size: u64,
    pub weight: WeightFunction,
}

/// An immutable scheduling instance. The horizon is always
/// `max release + total size`: idling past it can never help, so no
/// completion beyond it need be considered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct GspInstance {
    jobs: Vec<Job>,
    horizon: Time,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    jobs: Vec<Job>,
}

impl TryFrom<RawInstance> for GspInstance {
    type Error = Error;
    fn try_from(raw: RawInstance) -> Result<Self> {
        GspInstance::new(raw.jobs)
    }
}

impl From<GspInstance> for RawInstance {
    fn from(inst: GspInstance) -> Self {
        RawInstance { jobs: inst.jobs }
    }
}

impl GspInstance {
    pub fn new(jobs: Vec<Job>) -> Result<Self> {
        if jobs.is_empty() {
            return Err(Error::InvalidInstance("instance has no jobs".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for job in &jobs {
            if job.release == 0 {
                return Err(Error::InvalidInstance(format!("job {:?}: release must be >= 1", job.id)));
            }
            if job.size == 0 {
                return Err(Error::InvalidInstance(format!("job {:?}: size must be >= 1", job.id)));
            }
            if !seen.insert(job.id.clone()) {
                return Err(Error::InvalidInstance(format!("duplicate job id {:?}", job.id)));
            }
            job.weight.validate()?;
        }
        let horizon = jobs.iter().map(|j| j.release).max().unwrap()
            + jobs.iter().map(|j| j.size).sum::<u64>();
        Ok(GspInstance { jobs, horizon })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    pub fn total_size(&self) -> u64 {
        self.jobs.iter().map(|j| j.size).sum()
    }

    pub fn job_index(&self, id: &str) -> Result<usize> {
        self.jobs
            .iter()
            .position(|j| j.id == id)
            .ok_or_else(|| Error::UnknownJob(id.to_string()))
    }

    /// Total cost charged to `job` if it completes at slot `t`.
    pub fn cumulative_cost(&self, job: usize, t: Time) -> Result<Cost> {
        let j = self.jobs.get(job).ok_or_else(|| Error::UnknownJob(job.to_string()))?;
        if t <= j.release {
            return Err(Error::TimeBeforeRelease { t, release: j.release });
        }
        Ok(j.weight.cumulative(j.release, t))
    }

    /// Class of a completion cost: `0` for cost zero, otherwise the unique
    /// `k >= 1` with `2^(k-1) <= cost <= 2^k - 1`.
    pub fn class_of_cost(cost: Cost) -> u32 {
        if cost == 0 {
            0
        } else {
            cost.ilog2() + 1
        }
    }

    /// Largest class any completion time of `job` can reach within the horizon.
    pub fn max_class(&self, job: usize) -> Result<u32> {
        Ok(Self::class_of_cost(self.cumulative_cost(job, self.horizon)?))
    }

    /// Maximal interval of completion times of `job` whose cost falls in
    /// class `k`, truncated to the horizon. `None` when no completion time
    /// attains the class.
    ///
    /// Found by binary search against the monotone cumulative cost; no
    /// per-slot scan.
    pub fn class_interval(&self, job: usize, k: u32) -> Result<Option<(Time, Time)>> {
        let j = self.jobs.get(job).ok_or_else(|| Error::UnknownJob(job.to_string()))?;
        if j.release >= self.horizon {
            return Ok(None);
        }
        if k > 127 {
            // cost is u128; class 128+ is unreachable
            return Ok(None);
        }
        let (lo_cost, hi_cost): (Cost, Cost) = if k == 0 {
            (0, 0)
        } else {
            (1 << (k - 1), (1 << k) - 1)
        };
        let cost = |t: Time| j.weight.cumulative(j.release, t);
        // first t in (release, horizon] with cost(t) >= lo_cost
        let mut lo = j.release + 1;
        let mut hi = self.horizon;
        if cost(hi) < lo_cost {
            return Ok(None);
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if cost(mid) >= lo_cost {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let first = lo;
        if cost(first) > hi_cost {
            return Ok(None);
        }
        // last t in [first, horizon] with cost(t) <= hi_cost
        let mut lo = first;
        let mut hi = self.horizon;
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if cost(mid) <= hi_cost {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Ok(Some((first, lo)))
    }
}

/// A preemptive schedule: an assignment of time slots to job indices.
/// At most one job per slot; slots run from 1 to the instance horizon.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schedule {
    slots: BTreeMap<Time, usize>,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn assign(&mut self, t: Time, job: usize) {
        self.slots.insert(t, job);
    }

    pub fn slots(&self) -> &BTreeMap<Time, usize> {
        &self.slots
    }

    /// Completion slot of each job (`None` if the job never runs).
    pub fn completions(&self, num_jobs: usize) -> Vec<Option<Time>> {
        let mut done = vec![None; num_jobs];
        for (&t, &j) in &self.slots {
            if j < num_jobs {
                done[j] = Some(t);
            }
        }
        done
    }

    /// Checks the schedule against the instance and reports the first
    /// violated requirement: slot bounds, release respect, and exact size.
    pub fn validate(&self, inst: &GspInstance) -> Result<()> {
        let mut used = vec![0u64; inst.jobs().len()];
        for (&t, &j) in &self.slots {
            if t == 0 || t > inst.horizon() {
                return Err(Error::InfeasibleSchedule(format!(
                    "slot {t} outside 1..={}",
                    inst.horizon()
                )));
            }
            let job = inst
                .jobs()
                .get(j)
                .ok_or_else(|| Error::InfeasibleSchedule(format!("slot {t} assigned to unknown job index {j}")))?;
            if t <= job.release {
                return Err(Error::InfeasibleSchedule(format!(
                    "job {:?} runs at slot {t} but is released at {}",
                    job.id, job.release
                )));
            }
            used[j] += 1;
        }
        for (j, job) in inst.jobs().iter().enumerate() {
            if used[j] != job.size {
                return Err(Error::InfeasibleSchedule(format!(
                    "job {:?} runs {} slots, size is {}",
                    job.id, used[j], job.size
                )));
            }
        }
        Ok(())
    }
}

/// Total completion cost of a feasible schedule.
pub fn schedule_cost(inst: &GspInstance, sched: &Schedule) -> Result<Cost> {
    sched.validate(inst)?;
    let mut total: Cost = 0;
    for (j, c) in sched.completions(inst.jobs().len()).iter().enumerate() {
        let c = c.ok_or_else(|| Error::InfeasibleSchedule(format!("job index {j} never runs")))?;
        total += inst.cumulative_cost(j, c)?;
    }
    Ok(total)
}

/// Earliest-deadline-first schedule for per-job deadlines, or a witness
/// window proving none exists.
///
/// Deadline semantics: job `j` must complete at a slot `<= deadlines[j]`.
/// Deadlines are clamped to the horizon (nothing can complete later anyway).
/// EDF is exact for this feasibility question, so failure always comes with
/// an overloaded window `[s, e]`: jobs released at or after `s` with
/// deadlines at or before `e` carry total size exceeding `e - s`.
pub fn edf_schedule(inst: &GspInstance, deadlines: &[Time]) -> Result<Schedule> {
    let jobs = inst.jobs();
    if deadlines.len() != jobs.len() {
        return Err(Error::BadParameter(format!(
            "expected {} deadlines, got {}",
            jobs.len(),
            deadlines.len()
        )));
    }
    let deadlines: Vec<Time> = deadlines.iter().map(|&d| d.min(inst.horizon())).collect();
    for (j, job) in jobs.iter().enumerate() {
        if deadlines[j] < job.release + job.size {
            return Err(hall_witness(inst, &deadlines));
        }
    }
    let mut remaining: Vec<u64> = jobs.iter().map(|j| j.size).collect();
    let mut sched = Schedule::new();
    for t in 1..=inst.horizon() {
        let pick = (0..jobs.len())
            .filter(|&j| remaining[j] > 0 && jobs[j].release < t)
            .min_by(|&a, &b| (deadlines[a], &jobs[a].id).cmp(&(deadlines[b], &jobs[b].id)));
        if let Some(j) = pick {
            sched.assign(t, j);
            remaining[j] -= 1;
        }
        // a job still unfinished at its deadline can never catch up
        for j in 0..jobs.len() {
            if remaining[j] > 0 && deadlines[j] <= t {
                return Err(hall_witness(inst, &deadlines));
            }
        }
    }
    debug_assert!(remaining.iter().all(|&r| r == 0));
    Ok(sched)
}

/// Finds an overloaded window over release/deadline endpoints. Callers
/// invoke this only when EDF has failed, where a witness must exist.
fn hall_witness(inst: &GspInstance, deadlines: &[Time]) -> Error {
    match hall_violation(inst, deadlines) {
        Some((start, end)) => Error::DeadlinesInfeasible { start, end },
        None => Error::Invariant("EDF failed but every window satisfies the load condition".into()),
    }
}

/// Checks the load condition over all windows with endpoints drawn from
/// releases, deadlines, and earliest completions; returns an overloaded
/// window if one exists. The earliest-completion endpoints make sure a
/// deadline falling inside a job's mandatory run (even before its release)
/// is always witnessed by the window `[r_j, r_j + p_j - 1]`.
pub fn hall_violation(inst: &GspInstance, deadlines: &[Time]) -> Option<(Time, Time)> {
    let jobs = inst.jobs();
    let deadlines: Vec<Time> = deadlines.iter().map(|&d| d.min(inst.horizon())).collect();
    let starts: std::collections::BTreeSet<Time> = jobs.iter().map(|j| j.release).collect();
    let ends: std::collections::BTreeSet<Time> = deadlines
        .iter()
        .copied()
        .chain(jobs.iter().map(|j| j.release + j.size - 1))
        .collect();
    for &s in &starts {
        for &e in &ends {
            if e < s {
                continue;
            }
            let load: u64 = jobs
                .iter()
                .enumerate()
                .filter(|(j, job)| job.release >= s && deadlines[*j] <= e)
                .map(|(_, job)| job.size)
                .sum();
            if load > e - s {
                return Some((s, e));
            }
        }
    }
    None
}

//! End-to-end pipeline driver and small-instance oracles.
//!
//! `brute_force_gsp` solves tiny scheduling instances exactly by memoized
//! search over (next slot, remaining work per job); it is deliberately
//! capped so it stays instant as test-time ground truth. `audit_pipeline`
//! runs the whole reduce → cut → round → cover → reconstruct chain on one
//! instance, re-checks every cross-stage guarantee it can afford, and emits
//! a [`RatioReport`] suitable for aggregation; `audit_batch` fans that out
//! over many instances with position-derived seeds, so parallel and
//! sequential runs produce identical results.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{exact_cover_bb, CoverProblem, MAX_SETS};
use crate::gsp::{schedule_cost, Cost, GspInstance, Schedule, Time};
use crate::heavy::{build_r3u, exact_heavy_cover, lp_greedy_cover};
use crate::jsonio::{int53, int53_opt};
use crate::kclp::solve_kc_lp;
use crate::light::solve_light;
use crate::r2c::{reduce_to_r2c, schedule_from_cover, verify_cover, Cover};
use crate::rounding::{preprocess, BETA_MAX};

/// Caps for [`brute_force_gsp`]; beyond these the state space is too large
/// for routine test-time use.
pub const ORACLE_MAX_JOBS: usize = 3;
pub const ORACLE_MAX_HORIZON: Time = 14;

/// Exact optimum of a tiny instance. Each slot either idles or runs one
/// released, unfinished job; a job pays its cumulative cost at the slot
/// running its last unit. Returns an optimal schedule and its cost.
pub fn brute_force_gsp(inst: &GspInstance) -> Result<(Schedule, Cost)> {
    if inst.jobs().len() > ORACLE_MAX_JOBS {
        return Err(Error::CapExceeded(format!(
            "scheduling oracle handles at most {ORACLE_MAX_JOBS} jobs, got {}",
            inst.jobs().len()
        )));
    }
    if inst.horizon() > ORACLE_MAX_HORIZON {
        return Err(Error::CapExceeded(format!(
            "scheduling oracle handles horizons up to {ORACLE_MAX_HORIZON}, got {}",
            inst.horizon()
        )));
    }
    let sizes: Vec<u64> = inst.jobs().iter().map(|j| j.size).collect();
    let mut memo = HashMap::new();
    let best = best_from(inst, 1, &sizes, &mut memo)?.ok_or_else(|| {
        Error::Invariant("the horizon leaves room for all work, yet no schedule was found".into())
    })?;

    // Replay the table, taking at every slot the first action that stays on
    // an optimal trajectory.
    let mut sched = Schedule::new();
    let mut rem = sizes;
    let mut owed = best;
    let mut t = 1;
    while rem.iter().any(|&r| r > 0) {
        let mut acted = false;
        for j in 0..rem.len() {
            if rem[j] == 0 || inst.jobs()[j].release >= t {
                continue;
            }
            rem[j] -= 1;
            let pay = if rem[j] == 0 { inst.cumulative_cost(j, t)? } else { 0 };
            match best_from(inst, t + 1, &rem, &mut memo)? {
                Some(rest) if pay + rest == owed => {
                    sched.assign(t, j);
                    owed -= pay;
                    acted = true;
                    break;
                }
                _ => rem[j] += 1,
            }
        }
        if !acted && best_from(inst, t + 1, &rem, &mut memo)? != Some(owed) {
            return Err(Error::Invariant("schedule replay diverged from the cost table".into()));
        }
        t += 1;
    }
    debug_assert_eq!(schedule_cost(inst, &sched)?, best);
    Ok((sched, best))
}

/// Cheapest completion cost from slot `t` onward given remaining work;
/// `None` when the horizon cannot absorb it.
fn best_from(
    inst: &GspInstance,
    t: Time,
    rem: &[u64],
    memo: &mut HashMap<(Time, Vec<u64>), Option<Cost>>,
) -> Result<Option<Cost>> {
    if rem.iter().all(|&r| r == 0) {
        return Ok(Some(0));
    }
    if t > inst.horizon() {
        return Ok(None);
    }
    if let Some(hit) = memo.get(&(t, rem.to_vec())) {
        return Ok(*hit);
    }
    let mut best = best_from(inst, t + 1, rem, memo)?; // idle
    let mut next = rem.to_vec();
    for j in 0..rem.len() {
        if rem[j] == 0 || inst.jobs()[j].release >= t {
            continue;
        }
        next[j] -= 1;
        let pay = if next[j] == 0 { inst.cumulative_cost(j, t)? } else { 0 };
        if let Some(rest) = best_from(inst, t + 1, &next, memo)? {
            if best.is_none_or(|b| pay + rest < b) {
                best = Some(pay + rest);
            }
        }
        next[j] += 1;
    }
    memo.insert((t, rem.to_vec()), best);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeavySolver {
    Greedy,
    Exact,
}

impl std::str::FromStr for HeavySolver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(HeavySolver::Greedy),
            "exact" => Ok(HeavySolver::Exact),
            other => Err(Error::BadParameter(format!(
                "unknown heavy solver {other:?} (expected greedy or exact)"
            ))),
        }
    }
}

impl std::fmt::Display for HeavySolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HeavySolver::Greedy => "greedy",
            HeavySolver::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AuditParams {
    pub beta: f64,
    pub seed: u64,
    pub heavy_solver: HeavySolver,
    /// Run the exact oracles when the instance fits their caps and include
    /// optimum-relative ratios in the report.
    pub oracles: bool,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams { beta: BETA_MAX, seed: 0, heavy_solver: HeavySolver::Greedy, oracles: true }
    }
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageMillis {
    pub reduce: f64,
    pub lp: f64,
    pub round: f64,
    pub cover: f64,
    pub schedule: f64,
    pub oracle: f64,
}

/// One audited run: instance and reduction sizes, stage outputs, stage
/// timings, and the ratios the pipeline is meant to keep small. Oracle
/// fields are `None` when the instance exceeds the oracle caps (or oracles
/// were disabled); ratio fields are `None` when their denominator is zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioReport {
    pub jobs: usize,
    pub horizon: Time,
    pub points: usize,
    pub rects: usize,
    pub beta: f64,
    pub seed: u64,
    pub heavy_solver: HeavySolver,
    pub lp_value: f64,
    pub lp_rounds: usize,
    pub lp_cuts: usize,
    /// Weight bought outright at the LP threshold.
    #[serde(with = "int53")]
    pub bought_weight: u128,
    #[serde(with = "int53")]
    pub heavy_weight: u128,
    #[serde(with = "int53")]
    pub light_weight: u128,
    /// Weight of the merged cover (overlaps between stages count once).
    #[serde(with = "int53")]
    pub cover_weight: u128,
    #[serde(with = "int53")]
    pub schedule_cost: u128,
    #[serde(with = "int53_opt")]
    pub opt_gsp: Option<u128>,
    #[serde(with = "int53_opt")]
    pub opt_r2c: Option<u128>,
    pub cover_over_lp: Option<f64>,
    pub sched_over_opt: Option<f64>,
    /// Exact cover optimum over exact scheduling optimum; the reduction
    /// keeps this at most 4.
    pub r2c_over_opt: Option<f64>,
    pub millis: StageMillis,
}

/// Full artifacts of one audited run, for callers that need more than the
/// report.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub report: RatioReport,
    pub cover: Cover,
    pub schedule: Schedule,
    pub deadlines: Vec<Time>,
}

/// Runs the full chain on one instance and cross-checks each stage.
///
/// Hard checks, always on: the merged cover is feasible for the original
/// demands, and the reconstructed schedule costs no more than the cover.
/// Oracle checks, when the caps allow: the schedule never beats the exact
/// optimum, the LP never exceeds the exact cover optimum, and the two
/// optima sandwich within a factor 4.
pub fn audit_pipeline(inst: &GspInstance, params: &AuditParams) -> Result<AuditOutcome> {
    let mut millis = StageMillis::default();

    let clock = Instant::now();
    let r2c = reduce_to_r2c(inst)?;
    millis.reduce = clock.elapsed().as_secs_f64() * 1e3;

    let clock = Instant::now();
    let sol = solve_kc_lp(&r2c, params.beta)?;
    millis.lp = clock.elapsed().as_secs_f64() * 1e3;

    let clock = Instant::now();
    let pre = preprocess(&r2c, &sol, params.beta)?;
    millis.round = clock.elapsed().as_secs_f64() * 1e3;

    let clock = Instant::now();
    let r3u = build_r3u(&r2c, &pre)?;
    let (heavy_chosen, _) = match params.heavy_solver {
        HeavySolver::Greedy => lp_greedy_cover(&r3u)?,
        HeavySolver::Exact => exact_heavy_cover(&r3u)?,
    };
    let heavy_rects: BTreeSet<usize> =
        heavy_chosen.iter().map(|&c| r3u.cuboids[c].rect).collect();
    let light = solve_light(&r2c, &pre, params.seed)?;
    millis.cover = clock.elapsed().as_secs_f64() * 1e3;

    let mut cover: Cover = pre.picked.clone();
    cover.extend(heavy_rects.iter().copied());
    cover.extend(light.chosen.iter().copied());

    let check = verify_cover(&r2c, &cover);
    if !check.feasible {
        let p = check.first_violation.unwrap_or(0);
        return Err(Error::Invariant(format!(
            "rounding stages left point {p} uncovered (slack {})",
            check.slacks[p]
        )));
    }

    let clock = Instant::now();
    let rec = schedule_from_cover(inst, &r2c, &cover)?;
    millis.schedule = clock.elapsed().as_secs_f64() * 1e3;
    let cost = schedule_cost(inst, &rec.schedule)?;
    if cost > check.total_weight {
        return Err(Error::Invariant(format!(
            "schedule cost {cost} exceeds its cover weight {}",
            check.total_weight
        )));
    }

    let clock = Instant::now();
    let mut opt_gsp = None;
    let mut opt_r2c = None;
    if params.oracles {
        if inst.jobs().len() <= ORACLE_MAX_JOBS && inst.horizon() <= ORACLE_MAX_HORIZON {
            opt_gsp = Some(brute_force_gsp(inst)?.1);
        }
        if r2c.rects.len() <= MAX_SETS {
            opt_r2c = Some(exact_cover_bb(&CoverProblem::from_r2c(&r2c))?.1);
        }
    }
    millis.oracle = clock.elapsed().as_secs_f64() * 1e3;

    if let Some(og) = opt_gsp {
        if cost < og {
            return Err(Error::Invariant(format!(
                "schedule cost {cost} beats the exact optimum {og}"
            )));
        }
        if let Some(oc) = opt_r2c {
            if og > oc || oc > 4 * og {
                return Err(Error::Invariant(format!(
                    "optima fail the sandwich: scheduling {og}, covering {oc}"
                )));
            }
        }
    }
    if let Some(oc) = opt_r2c {
        if sol.objective > oc as f64 + 1e-6 {
            return Err(Error::Invariant(format!(
                "LP value {} exceeds the exact cover optimum {oc}",
                sol.objective
            )));
        }
        if check.total_weight < oc {
            return Err(Error::Invariant(format!(
                "cover weight {} undercuts the exact optimum {oc}",
                check.total_weight
            )));
        }
    }

    let ratio = |num: u128, den: f64| (den > 1e-9).then(|| num as f64 / den);
    let report = RatioReport {
        jobs: inst.jobs().len(),
        horizon: inst.horizon(),
        points: r2c.points.len(),
        rects: r2c.rects.len(),
        beta: params.beta,
        seed: params.seed,
        heavy_solver: params.heavy_solver,
        lp_value: sol.objective,
        lp_rounds: sol.rounds,
        lp_cuts: sol.cuts.len(),
        bought_weight: pre.picked_weight,
        heavy_weight: r2c.total_weight(&heavy_rects),
        light_weight: light.weight,
        cover_weight: check.total_weight,
        schedule_cost: cost,
        opt_gsp,
        opt_r2c,
        cover_over_lp: ratio(check.total_weight, sol.objective),
        sched_over_opt: opt_gsp.and_then(|o| ratio(cost, o as f64)),
        r2c_over_opt: opt_gsp
            .zip(opt_r2c)
            .and_then(|(og, oc)| ratio(oc, og as f64)),
        millis,
    };
    Ok(AuditOutcome { report, cover, schedule: rec.schedule, deadlines: rec.deadlines })
}

// Entry `i` of a batch always runs with the same derived seed, no matter
// how the batch is executed.
fn batch_params(params: &AuditParams, i: usize) -> AuditParams {
    let mut p = *params;
    p.seed = params.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    p
}

/// Audits many instances in input order.
#[cfg(feature = "parallel")]
pub fn audit_batch(instances: &[GspInstance], params: &AuditParams) -> Result<Vec<AuditOutcome>> {
    instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| audit_pipeline(inst, &batch_params(params, i)))
        .collect()
}

/// Audits many instances in input order.
#[cfg(not(feature = "parallel"))]
pub fn audit_batch(instances: &[GspInstance], params: &AuditParams) -> Result<Vec<AuditOutcome>> {
    audit_batch_seq(instances, params)
}

/// Sequential twin of [`audit_batch`]; produces identical results.
pub fn audit_batch_seq(
    instances: &[GspInstance],
    params: &AuditParams,
) -> Result<Vec<AuditOutcome>> {
    instances
        .iter()
        .enumerate()
        .map(|(i, inst)| audit_pipeline(inst, &batch_params(params, i)))
        .collect()
}

/// Flattens reports to CSV (header plus one row each). Empty cells stand
/// for oracle or ratio fields that were unavailable.
pub fn reports_to_csv(reports: &[RatioReport]) -> String {
    use std::fmt::Write;
    let mut out = String::from(
        "jobs,horizon,points,rects,beta,seed,heavy_solver,lp_value,lp_rounds,lp_cuts,\
         bought_weight,heavy_weight,light_weight,cover_weight,schedule_cost,\
         opt_gsp,opt_r2c,cover_over_lp,sched_over_opt,r2c_over_opt,\
         reduce_ms,lp_ms,round_ms,cover_ms,schedule_ms,oracle_ms\n",
    );
    for r in reports {
        let opt = |v: Option<u128>| v.map_or(String::new(), |v| v.to_string());
        let ratio = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{:.6},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}",
            r.jobs,
            r.horizon,
            r.points,
            r.rects,
            r.beta,
            r.seed,
            r.heavy_solver,
            r.lp_value,
            r.lp_rounds,
            r.lp_cuts,
            r.bought_weight,
            r.heavy_weight,
            r.light_weight,
            r.cover_weight,
            r.schedule_cost,
            opt(r.opt_gsp),
            opt(r.opt_r2c),
            ratio(r.cover_over_lp),
            ratio(r.sched_over_opt),
            ratio(r.r2c_over_opt),
            r.millis.reduce,
            r.millis.lp,
            r.millis.round,
            r.millis.cover,
            r.millis.schedule,
            r.millis.oracle,
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, GeneratorConfig};
    use crate::gsp::{hall_violation, Job, WeightFunction};

    fn desk1() -> GspInstance {
        GspInstance::new(vec![
            Job { id: "a".into(), release: 1, size: 2, weight: WeightFunction::Constant { w: 1 } },
            Job { id: "b".into(), release: 2, size: 1, weight: WeightFunction::Constant { w: 2 } },
        ])
        .unwrap()
    }

    #[test]
    fn single_unit_job_pays_one_flow_step() {
        let inst = GspInstance::new(vec![Job {
            id: "a".into(),
            release: 1,
            size: 1,
            weight: WeightFunction::Constant { w: 1 },
        }])
        .unwrap();
        let (sched, cost) = brute_force_gsp(&inst).unwrap();
        assert_eq!(cost, 1);
        assert_eq!(sched.completions(1), vec![Some(2)]);
    }

    #[test]
    fn oracle_reproduces_the_desk_optimum() {
        let inst = desk1();
        let (sched, cost) = brute_force_gsp(&inst).unwrap();
        assert_eq!(cost, 5);
        assert_eq!(schedule_cost(&inst, &sched).unwrap(), 5);
    }

    #[test]
    fn met_deadline_costs_nothing() {
        let inst = GspInstance::new(vec![Job {
            id: "a".into(),
            release: 1,
            size: 2,
            weight: WeightFunction::Deadline { d: 3, w: 9 },
        }])
        .unwrap();
        let (_, cost) = brute_force_gsp(&inst).unwrap();
        assert_eq!(cost, 0);
    }

    #[test]
    fn oracle_enforces_its_caps() {
        let wide = GspInstance::new(
            (0..4)
                .map(|i| Job {
                    id: format!("j{i}"),
                    release: 1,
                    size: 1,
                    weight: WeightFunction::Constant { w: 1 },
                })
                .collect(),
        )
        .unwrap();
        assert!(matches!(brute_force_gsp(&wide), Err(Error::CapExceeded(_))));

        let long = GspInstance::new(vec![Job {
            id: "a".into(),
            release: 1,
            size: 14,
            weight: WeightFunction::Constant { w: 1 },
        }])
        .unwrap();
        assert!(matches!(brute_force_gsp(&long), Err(Error::CapExceeded(_))));
    }

    // Independent reference: a completion-time vector is achievable exactly
    // when every release/deadline window has room, and since costs are
    // monotone the optimum equals the cheapest feasible vector.
    fn cheapest_feasible_vector(inst: &GspInstance) -> Cost {
        let jobs = inst.jobs();
        let mut v: Vec<Time> = jobs.iter().map(|j| j.release + j.size).collect();
        let mut best: Option<Cost> = None;
        loop {
            if hall_violation(inst, &v).is_none() {
                let cost = v
                    .iter()
                    .enumerate()
                    .map(|(j, &t)| inst.cumulative_cost(j, t).unwrap())
                    .sum();
                if best.is_none_or(|b| cost < b) {
                    best = Some(cost);
                }
            }
            let mut j = 0;
            loop {
                if j == v.len() {
                    return best.expect("finishing every job as late as possible is feasible");
                }
                if v[j] < inst.horizon() {
                    v[j] += 1;
                    break;
                }
                v[j] = jobs[j].release + jobs[j].size;
                j += 1;
            }
        }
    }

    #[test]
    fn oracle_matches_completion_vector_enumeration() {
        for trial in 0..40u64 {
            let cfg = GeneratorConfig {
                jobs: 1 + (trial % 3) as usize,
                max_release: 3,
                max_size: 3,
                max_weight: 4,
                allow_degenerate: true,
                ..GeneratorConfig::default()
            };
            let inst = generate(&cfg, 500 + trial).unwrap();
            let (_, dp) = brute_force_gsp(&inst).unwrap();
            assert_eq!(dp, cheapest_feasible_vector(&inst), "trial {trial}");
        }
    }

    #[test]
    fn desk_audit_reconstructs_the_optimum() {
        let out = audit_pipeline(&desk1(), &AuditParams::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.opt_gsp, Some(5));
        assert_eq!(r.opt_r2c, Some(7));
        assert_eq!(r.bought_weight, 7);
        assert_eq!(r.heavy_weight, 0);
        assert_eq!(r.light_weight, 0);
        assert_eq!(r.cover_weight, 7);
        assert_eq!(r.schedule_cost, 5);
        assert!((r.lp_value - 5.5).abs() < 1e-9);
        assert_eq!(r.sched_over_opt, Some(1.0));
        assert_eq!(r.r2c_over_opt, Some(1.4));
        assert_eq!(out.cover.len(), 3);
        assert_eq!(out.deadlines, vec![4, 3]);
    }

    #[test]
    fn met_deadlines_yield_a_free_cover() {
        let inst = GspInstance::new(vec![Job {
            id: "a".into(),
            release: 1,
            size: 2,
            weight: WeightFunction::Deadline { d: 3, w: 9 },
        }])
        .unwrap();
        let out = audit_pipeline(&inst, &AuditParams::default()).unwrap();
        assert_eq!(out.report.opt_gsp, Some(0));
        assert_eq!(out.report.cover_weight, 0);
        assert_eq!(out.report.schedule_cost, 0);
        assert!(out.report.cover_over_lp.is_none());
        assert!(out.report.sched_over_opt.is_none());
    }

    #[test]
    fn batch_runs_match_sequential_runs() {
        let cfg =
            GeneratorConfig { jobs: 3, max_release: 3, max_size: 3, ..GeneratorConfig::default() };
        let instances: Vec<GspInstance> =
            (0..6).map(|seed| generate(&cfg, seed).unwrap()).collect();
        let params = AuditParams::default();
        let par = audit_batch(&instances, &params).unwrap();
        let seq = audit_batch_seq(&instances, &params).unwrap();
        assert_eq!(par.len(), 6);
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.cover, b.cover);
            assert_eq!(a.report.cover_weight, b.report.cover_weight);
            assert_eq!(a.report.schedule_cost, b.report.schedule_cost);
            assert_eq!(a.schedule.slots(), b.schedule.slots());
            assert!(
                a.report.cover_weight
                    <= a.report.bought_weight + a.report.heavy_weight + a.report.light_weight
            );
        }
    }

    #[test]
    fn exact_heavy_solver_runs_the_same_chain() {
        let params = AuditParams { heavy_solver: HeavySolver::Exact, ..AuditParams::default() };
        let out = audit_pipeline(&desk1(), &params).unwrap();
        assert_eq!(out.report.cover_weight, 7);
        assert_eq!(out.report.schedule_cost, 5);
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let out = audit_pipeline(&desk1(), &AuditParams::default()).unwrap();
        let csv = reports_to_csv(&[out.report.clone(), out.report]);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("jobs,horizon,points,rects,beta,seed,heavy_solver"));
        assert!(lines[1].contains(",greedy,"));
        assert!(lines[1].contains(",1.400000,"));
    }

    #[test]
    fn report_round_trips_through_json() {
        let out = audit_pipeline(&desk1(), &AuditParams::default()).unwrap();
        let json = serde_json::to_string(&out.report).unwrap();
        let back: RatioReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.opt_gsp, Some(5));
        assert_eq!(back.cover_weight, out.report.cover_weight);
        assert_eq!(back.heavy_solver, HeavySolver::Greedy);
    }
}

//! Light residual points: per-capacity-class multi-cover.
//!
//! A light point's rounded residual `2^i` is carried by coverers of
//! strictly lower rounded capacity, whose scaled LP supply is at least
//! `2 * 2^i`. Grouping those coverers by capacity class `2^l` gives, per
//! class, a plain multi-cover instance: the point needs `floor(class mass)`
//! distinct class-`l` sets, and summing `2^l * floor(mass_l)` over `l < i`
//! still clears `2^i` because the floors lose less than `2^i` in total.
//!
//! Each class is solved in three steps:
//!
//! 1. sampling: every set joins with probability `min(1, 2x)`; points
//!    demanding at least `8 ln m` sets must be fully covered by the sample
//!    (almost surely true, retried a few times, loud failure otherwise),
//!    so surviving residual demands are logarithmic;
//! 2. rounds: while any demand remains, the points at the current maximum
//!    demand `D` still have fractional supply `D` on untouched sets, so
//!    `x / D` fractionally unit-covers them and one local-ratio pass buys
//!    an integral unit cover at most twice that cost;
//! 3. the per-class picks merge across classes, and the combined supply is
//!    checked against every light point's rounded residual.
//!
//! The local ratio works right to left: the rightmost uncovered point's
//! coverers all contain its `y` in their span, so a minimal cover keeps at
//! most two of them (the spans reaching lowest and highest), which is where
//! the factor 2 comes from. Minimality is restored while unwinding by
//! greedy deletion in reverse pick order against each level's alive set.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gsp::Time;
use crate::r2c::R2cInstance;
use crate::rounding::{PointState, Preprocessed, X_EPS};

/// Floors of fractional masses get this much grace so a mass sitting
/// numerically at an integer is not knocked down a level.
const FLOOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R2mPoint {
    pub x: Time,
    pub y: Time,
    /// Distinct sets of this class the point must receive.
    pub demand: u64,
    /// Index of the originating point in the flat instance.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R2mSet {
    pub id: String,
    /// Index of the originating rectangle.
    pub rect: usize,
    pub xmax: Time,
    pub y_lo: Time,
    pub y_hi: Time,
    pub weight: u128,
}

impl R2mSet {
    pub fn covers(&self, p: &R2mPoint) -> bool {
        p.x <= self.xmax && self.y_lo <= p.y && p.y <= self.y_hi
    }
}

/// One capacity class of the light stage: unit-contribution sets against
/// integral demands, plus the scaled LP mass that certifies feasibility.
#[derive(Debug, Clone, Default)]
pub struct R2mInstance {
    pub points: Vec<R2mPoint>,
    pub sets: Vec<R2mSet>,
    pub x_frac: Vec<f64>,
}

impl R2mInstance {
    pub fn fractional_weight(&self) -> f64 {
        self.sets.iter().zip(&self.x_frac).map(|(s, &x)| s.weight as f64 * x).sum()
    }
}

/// Collects class-`class` coverers and the light points that need them.
/// Demands are floored class masses; zero-demand points and sets covering
/// no retained point are dropped.
pub fn build_r2m(r2c: &R2cInstance, pre: &Preprocessed, class: u32) -> R2mInstance {
    let candidates: Vec<(R2mSet, f64)> = r2c
        .rects
        .iter()
        .enumerate()
        .filter(|&(r, _)| {
            !pre.picked.contains(&r) && pre.x_scaled[r] > X_EPS && pre.rect_class[r] == class
        })
        .map(|(r, rect)| {
            (
                R2mSet {
                    id: rect.id.clone(),
                    rect: r,
                    xmax: rect.xmax,
                    y_lo: rect.y_lo,
                    y_hi: rect.y_hi,
                    weight: rect.weight,
                },
                pre.x_scaled[r],
            )
        })
        .collect();

    let mut points = Vec::new();
    for p in pre.light_points() {
        let PointState::Surviving { class: point_class, .. } = pre.points[p] else {
            unreachable!("light_points only lists survivors");
        };
        if class >= point_class {
            continue; // only strictly lower capacities carry a light point
        }
        let src = &r2c.points[p];
        let probe = R2mPoint { x: src.x, y: src.y, demand: 0, origin: p };
        let mass: f64 =
            candidates.iter().filter(|(s, _)| s.covers(&probe)).map(|&(_, x)| x).sum();
        let demand = (mass + FLOOR_EPS).floor() as u64;
        if demand >= 1 {
            points.push(R2mPoint { demand, ..probe });
        }
    }

    let (sets, x_frac): (Vec<R2mSet>, Vec<f64>) = candidates
        .into_iter()
        .filter(|(s, _)| points.iter().any(|p| s.covers(p)))
        .unzip();
    R2mInstance { points, sets, x_frac }
}

#[derive(Debug, Clone)]
pub struct Capped {
    pub sampled: BTreeSet<usize>,
    /// Demand left per point after the sampled sets.
    pub residual: Vec<u64>,
    /// Sampling passes used (1 unless a high-demand point got unlucky).
    pub trials: u32,
}

/// Samples each set with probability `min(1, 2x)`. Points demanding at
/// least `8 ln m` sets must come out fully covered, so every surviving
/// residual is below that threshold; a handful of retries covers the tiny
/// failure probability and anything beyond that is reported as an error.
pub fn cap_demands(inst: &R2mInstance, rng: &mut ChaCha8Rng) -> Result<Capped> {
    const TRIALS: u32 = 20;
    let m = inst.points.len().max(1);
    let full_threshold = 8.0 * (m as f64).ln();
    let mut last_failure = None;
    for trial in 1..=TRIALS {
        let sampled: BTreeSet<usize> = (0..inst.sets.len())
            .filter(|&s| rng.gen_bool((2.0 * inst.x_frac[s]).clamp(0.0, 1.0)))
            .collect();
        let coverage = |p: &R2mPoint| -> u64 {
            sampled.iter().filter(|&&s| inst.sets[s].covers(p)).count() as u64
        };
        let unlucky = inst.points.iter().find(|p| {
            p.demand as f64 >= full_threshold - 1e-9 && coverage(p) < p.demand
        });
        if let Some(p) = unlucky {
            last_failure = Some(Error::InfeasibleCover {
                point: p.origin,
                deficit: p.demand - coverage(p),
            });
            continue;
        }
        let residual: Vec<u64> =
            inst.points.iter().map(|p| p.demand.saturating_sub(coverage(p))).collect();
        for (i, p) in inst.points.iter().enumerate() {
            // each sampled coverer took one unit of demand and at most one
            // unit of mass, so the leftover mass still pays for the rest
            let left: f64 = (0..inst.sets.len())
                .filter(|s| !sampled.contains(s) && inst.sets[*s].covers(p))
                .map(|s| inst.x_frac[s])
                .sum();
            if left < residual[i] as f64 - 1e-6 {
                return Err(Error::Invariant(format!(
                    "point {} keeps demand {} but only {left} unsampled mass",
                    p.origin, residual[i]
                )));
            }
        }
        return Ok(Capped { sampled, residual, trials: trial });
    }
    Err(Error::resample(TRIALS as usize, last_failure.unwrap_or_else(|| {
        Error::Invariant("sampling loop ended without a failure to report".into())
    })))
}

#[derive(Debug, Clone)]
pub struct Rounds {
    pub chosen: BTreeSet<usize>,
    pub rounds: usize,
}

/// Clears the residual demands with distinct sets drawn from `available`.
/// Every round unit-covers the points at the current maximum demand `D`;
/// their untouched supply is at least `D`, giving the round a feasible
/// fractional cover of cost `cost(x) / D` and the local ratio twice that.
/// Summed over rounds the total stays within `2 H_D cost(x)`.
pub fn multi_cover_rounds(
    inst: &R2mInstance,
    residual: &[u64],
    available: &[usize],
) -> Result<Rounds> {
    let mut demand = residual.to_vec();
    let mut avail: Vec<usize> = available.to_vec();
    let mut chosen = BTreeSet::new();
    let mut rounds = 0;
    while let Some(&top) = demand.iter().filter(|&&d| d > 0).max() {
        rounds += 1;
        let targets: Vec<usize> =
            (0..inst.points.len()).filter(|&p| demand[p] == top).collect();
        for &p in &targets {
            let mass: f64 = avail
                .iter()
                .filter(|&&s| inst.sets[s].covers(&inst.points[p]))
                .map(|&s| inst.x_frac[s])
                .sum();
            if mass < top as f64 - 1e-6 {
                return Err(Error::Invariant(format!(
                    "point {} demands {top} more sets but has mass {mass} left",
                    inst.points[p].origin
                )));
            }
        }
        let picked = local_ratio_cover(inst, &targets, &avail)?;
        for &s in &picked {
            chosen.insert(s);
            avail.retain(|&t| t != s);
            for (p, d) in demand.iter_mut().enumerate() {
                if *d > 0 && inst.sets[s].covers(&inst.points[p]) {
                    *d -= 1;
                }
            }
        }
    }
    Ok(Rounds { chosen, rounds })
}

/// Minimum-weight unit cover of `targets` from `available`, within twice
/// any feasible fractional cover. Weights are subtracted exactly in `u128`.
pub fn local_ratio_cover(
    inst: &R2mInstance,
    targets: &[usize],
    available: &[usize],
) -> Result<Vec<usize>> {
    let mut weight: BTreeMap<usize, u128> =
        available.iter().map(|&s| (s, inst.sets[s].weight)).collect();
    let mut picked: BTreeSet<usize> = BTreeSet::new();
    let mut pick_order: Vec<usize> = Vec::new();
    let mut alive: Vec<usize> = targets.to_vec();
    let mut levels: Vec<(Vec<usize>, Vec<usize>)> = Vec::new(); // (alive, newly zero)

    while !alive.is_empty() {
        let &p = alive
            .iter()
            .max_by_key(|&&p| (inst.points[p].x, inst.points[p].y, p))
            .unwrap();
        let coverers: Vec<usize> = available
            .iter()
            .copied()
            .filter(|s| !picked.contains(s) && inst.sets[*s].covers(&inst.points[p]))
            .collect();
        if coverers.is_empty() {
            return Err(Error::Uncoverable(format!(
                "point {} at ({}, {}) has no remaining coverer",
                inst.points[p].origin, inst.points[p].x, inst.points[p].y
            )));
        }
        let z = coverers.iter().map(|s| weight[s]).min().unwrap();
        let mut newly_zero = Vec::new();
        for &s in &coverers {
            let w = weight.get_mut(&s).unwrap();
            *w -= z;
            if *w == 0 {
                newly_zero.push(s);
                picked.insert(s);
                pick_order.push(s);
            }
        }
        debug_assert!(!newly_zero.is_empty());
        let snapshot = alive.clone();
        alive.retain(|&q| !newly_zero.iter().any(|&s| inst.sets[s].covers(&inst.points[q])));
        levels.push((snapshot, newly_zero));
    }

    // unwind: add each level's picks at its own step, then delete in
    // reverse pick order anything the level's alive points can spare
    let rank: HashMap<usize, usize> =
        pick_order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut cover: BTreeSet<usize> = BTreeSet::new();
    for (snapshot, newly_zero) in levels.iter().rev() {
        cover.extend(newly_zero);
        let mut order: Vec<usize> = cover.iter().copied().collect();
        order.sort_by_key(|s| std::cmp::Reverse(rank[s]));
        for s in order {
            let spare = snapshot.iter().all(|&q| {
                cover
                    .iter()
                    .any(|&t| t != s && inst.sets[t].covers(&inst.points[q]))
            });
            if spare {
                cover.remove(&s);
            }
        }
    }
    Ok(cover.into_iter().collect())
}

#[derive(Debug, Clone)]
pub struct ClassOutcome {
    pub class: u32,
    pub points: usize,
    pub sampled_sets: usize,
    pub round_sets: usize,
    pub sampling_trials: u32,
    pub fractional_weight: f64,
    pub chosen_weight: u128,
}

#[derive(Debug, Clone, Default)]
pub struct LightCover {
    /// Chosen rectangles, as indices into the flat instance.
    pub chosen: BTreeSet<usize>,
    pub weight: u128,
    pub classes: Vec<ClassOutcome>,
}

/// Runs the per-class pipeline for every capacity class and merges the
/// picks, checking that each light point ends up with combined rounded
/// supply at least its rounded residual. Classes use independent streams
/// of `seed`, so results do not depend on execution order.
pub fn solve_light(r2c: &R2cInstance, pre: &Preprocessed, seed: u64) -> Result<LightCover> {
    let max_class = r2c
        .rects
        .iter()
        .enumerate()
        .filter(|&(r, _)| !pre.picked.contains(&r) && pre.x_scaled[r] > X_EPS)
        .map(|(r, _)| pre.rect_class[r])
        .max();
    let Some(max_class) = max_class else {
        return finish_light(r2c, pre, Vec::new());
    };
    let classes: Vec<u32> = (0..=max_class).collect();
    let run = |&class: &u32| -> Result<Option<(ClassOutcome, BTreeSet<usize>)>> {
        let inst = build_r2m(r2c, pre, class);
        if inst.points.is_empty() {
            return Ok(None);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64 + 1);
        let capped = cap_demands(&inst, &mut rng)?;
        let available: Vec<usize> =
            (0..inst.sets.len()).filter(|s| !capped.sampled.contains(s)).collect();
        let rounds = multi_cover_rounds(&inst, &capped.residual, &available)?;
        let local: BTreeSet<usize> = capped.sampled.union(&rounds.chosen).copied().collect();
        let rects: BTreeSet<usize> = local.iter().map(|&s| inst.sets[s].rect).collect();
        let outcome = ClassOutcome {
            class,
            points: inst.points.len(),
            sampled_sets: capped.sampled.len(),
            round_sets: rounds.chosen.len(),
            sampling_trials: capped.trials,
            fractional_weight: inst.fractional_weight(),
            chosen_weight: local.iter().map(|&s| inst.sets[s].weight).sum(),
        };
        Ok(Some((outcome, rects)))
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = classes.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = classes.iter().map(run).collect::<Result<Vec<_>>>()?;
    finish_light(r2c, pre, outcomes.into_iter().flatten().collect())
}

fn finish_light(
    r2c: &R2cInstance,
    pre: &Preprocessed,
    outcomes: Vec<(ClassOutcome, BTreeSet<usize>)>,
) -> Result<LightCover> {
    let mut chosen: BTreeSet<usize> = BTreeSet::new();
    let mut classes = Vec::with_capacity(outcomes.len());
    for (outcome, rects) in outcomes {
        chosen.extend(rects);
        classes.push(outcome);
    }
    for p in pre.light_points() {
        let PointState::Surviving { rounded, .. } = pre.points[p] else { unreachable!() };
        let point = &r2c.points[p];
        let supply: u64 = chosen
            .iter()
            .filter(|&&r| r2c.rects[r].covers(point))
            .map(|&r| 1u64 << pre.rect_class[r])
            .sum();
        if supply < rounded {
            return Err(Error::Invariant(format!(
                "light point {p} gathered rounded supply {supply} of {rounded}"
            )));
        }
    }
    let weight = chosen.iter().map(|&r| r2c.rects[r].weight).sum();
    Ok(LightCover { chosen, weight, classes })
}

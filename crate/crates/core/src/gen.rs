//! Seeded random instances for experiments and stress tests.
//!
//! Everything here is deterministic in the seed (ChaCha8 keyed streams), so
//! a reported run can be replayed byte for byte. Besides scheduling
//! instances the module offers the small covering shapes the test suites
//! lean on: unit covers, multi-covers with per-point demands, and caching
//! instances, each constructed so feasibility is guaranteed by design.

use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gencache::{CacheInterval, CachingInstance};
use crate::gsp::{GspInstance, Job, Time, WeightFunction};
use crate::light::{R2mInstance, R2mPoint, R2mSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Constant per-slot weights (weighted flow time).
    Wflow,
    /// Squared flow time.
    Flow2,
    /// Weighted tardiness against a per-job deadline.
    Tardiness,
    /// Every job draws its own shape, including step tables.
    Mixed,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wflow" => Ok(Family::Wflow),
            "flow2" => Ok(Family::Flow2),
            "tardiness" => Ok(Family::Tardiness),
            "mixed" => Ok(Family::Mixed),
            other => Err(Error::BadParameter(format!(
                "unknown family {other:?} (expected wflow, flow2, tardiness or mixed)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Wflow => "wflow",
            Family::Flow2 => "flow2",
            Family::Tardiness => "tardiness",
            Family::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: Family,
    pub jobs: usize,
    pub max_release: Time,
    pub max_size: u64,
    pub max_weight: u64,
    /// Allow tardiness deadlines before the release (still well defined:
    /// charging starts at the release).
    pub allow_degenerate: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            family: Family::Mixed,
            jobs: 4,
            max_release: 6,
            max_size: 4,
            max_weight: 5,
            allow_degenerate: false,
        }
    }
}

pub fn generate(cfg: &GeneratorConfig, seed: u64) -> Result<GspInstance> {
    if cfg.jobs == 0 || cfg.max_release == 0 || cfg.max_size == 0 || cfg.max_weight == 0 {
        return Err(Error::BadParameter(
            "generator needs at least one job and positive bounds".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deadline_span = cfg.max_size * cfg.jobs as u64;
    let mut jobs = Vec::with_capacity(cfg.jobs);
    for i in 0..cfg.jobs {
        let release = rng.gen_range(1..=cfg.max_release);
        let size = rng.gen_range(1..=cfg.max_size);
        let shape = match cfg.family {
            Family::Mixed => rng.gen_range(0..4),
            Family::Wflow => 0,
            Family::Flow2 => 1,
            Family::Tardiness => 2,
        };
        let weight = match shape {
            0 => WeightFunction::Constant { w: rng.gen_range(1..=cfg.max_weight) },
            1 => WeightFunction::SquaredFlow,
            2 => {
                let d = if cfg.allow_degenerate {
                    rng.gen_range(1..=cfg.max_release + deadline_span)
                } else {
                    rng.gen_range(release..=release + deadline_span)
                };
                WeightFunction::Deadline { d, w: rng.gen_range(1..=cfg.max_weight) }
            }
            _ => {
                let mut t = rng.gen_range(1..=4);
                let mut steps = Vec::new();
                for _ in 0..rng.gen_range(1..=3) {
                    steps.push((t, rng.gen_range(0..=cfg.max_weight)));
                    t += rng.gen_range(1..=3);
                }
                WeightFunction::Table { steps }
            }
        };
        jobs.push(Job { id: format!("j{i}"), release, size, weight });
    }
    GspInstance::new(jobs)
}

/// Random unit-demand cover over left-anchored boxes. Each point gets a
/// dedicated fallback set, so the instance is always coverable; `x_frac`
/// is all ones, a trivially feasible fractional cover.
pub fn random_unit_cover(rng: &mut ChaCha8Rng, max_points: usize, max_sets: usize) -> R2mInstance {
    let n = rng.gen_range(1..=max_points.max(1));
    let k = rng.gen_range(1..=max_sets.max(1));
    let mut points = Vec::with_capacity(n);
    for p in 0..n {
        points.push(R2mPoint {
            x: rng.gen_range(1..=6),
            y: rng.gen_range(1..=8),
            demand: 1,
            origin: p,
        });
    }
    let mut sets = Vec::with_capacity(k + n);
    for s in 0..k {
        let y_lo = rng.gen_range(1..=8);
        sets.push(R2mSet {
            id: format!("s{s}"),
            rect: s,
            xmax: rng.gen_range(1..=6),
            y_lo,
            y_hi: rng.gen_range(y_lo..=8),
            weight: rng.gen_range(0..=9),
        });
    }
    for (i, p) in points.iter().enumerate() {
        sets.push(R2mSet {
            id: format!("f{i}"),
            rect: k + i,
            xmax: p.x,
            y_lo: p.y,
            y_hi: p.y,
            weight: rng.gen_range(1..=6),
        });
    }
    let x_frac = vec![1.0; sets.len()];
    R2mInstance { points, sets, x_frac }
}

/// Random multi-cover: each point demands up to `max_demand` distinct sets
/// and owns twice that many dedicated singletons at mass 0.55, so both the
/// sampling stage and the rounds stay feasible. A few shared spans are
/// sprinkled on top.
pub fn random_multi_cover(rng: &mut ChaCha8Rng, max_points: usize, max_demand: u64) -> R2mInstance {
    let n = rng.gen_range(1..=max_points.max(1));
    let mut points = Vec::with_capacity(n);
    let mut sets = Vec::new();
    let mut x_frac = Vec::new();
    for p in 0..n {
        let demand = rng.gen_range(1..=max_demand.max(1));
        let y = p as Time + 1;
        points.push(R2mPoint { x: rng.gen_range(1..=4), y, demand, origin: p });
        for s in 0..2 * demand {
            sets.push(R2mSet {
                id: format!("p{p}s{s}"),
                rect: sets.len(),
                xmax: 4,
                y_lo: y,
                y_hi: y,
                weight: rng.gen_range(1..=5),
            });
            x_frac.push(0.55);
        }
    }
    for s in 0..rng.gen_range(0..=3usize) {
        let y_lo = rng.gen_range(1..=n as Time);
        sets.push(R2mSet {
            id: format!("span{s}"),
            rect: sets.len(),
            xmax: 4,
            y_lo,
            y_hi: rng.gen_range(y_lo..=n as Time),
            weight: rng.gen_range(1..=9),
        });
        x_frac.push(rng.gen_range(0.05..0.4));
    }
    R2mInstance { points, sets, x_frac }
}

/// Random caching instance with a blanket interval for guaranteed
/// feasibility.
pub fn random_caching(rng: &mut ChaCha8Rng, max_times: u64, max_intervals: usize) -> CachingInstance {
    let times = rng.gen_range(1..=max_times.max(1));
    let k = rng.gen_range(1..=max_intervals.max(2) - 1);
    let mut intervals = Vec::with_capacity(k + 1);
    for i in 0..k {
        let start = rng.gen_range(1..=times);
        intervals.push(CacheInterval {
            id: format!("i{i}"),
            start,
            end: rng.gen_range(start..=times),
            size: rng.gen_range(1..=3),
            weight: rng.gen_range(0..=9),
        });
    }
    intervals.push(CacheInterval {
        id: "blanket".into(),
        start: 1,
        end: times,
        size: 4,
        weight: rng.gen_range(4..=9),
    });
    let demands: Vec<u64> = (0..times).map(|_| rng.gen_range(0..=4)).collect();
    CachingInstance { demands, intervals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let cfg = GeneratorConfig::default();
        let a = generate(&cfg, 99).unwrap();
        let b = generate(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = generate(&cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bounds_are_respected() {
        let cfg = GeneratorConfig {
            family: Family::Wflow,
            jobs: 30,
            max_release: 3,
            max_size: 2,
            max_weight: 4,
            allow_degenerate: false,
        };
        let inst = generate(&cfg, 1).unwrap();
        assert_eq!(inst.jobs().len(), 30);
        for job in inst.jobs() {
            assert!((1..=3).contains(&job.release));
            assert!((1..=2).contains(&job.size));
            match &job.weight {
                WeightFunction::Constant { w } => assert!((1..=4).contains(w)),
                other => panic!("wflow drew {other:?}"),
            }
        }
    }

    #[test]
    fn tardiness_deadlines_respect_releases_by_default() {
        let cfg = GeneratorConfig {
            family: Family::Tardiness,
            jobs: 40,
            max_release: 9,
            max_size: 3,
            max_weight: 5,
            allow_degenerate: false,
        };
        let inst = generate(&cfg, 5).unwrap();
        for job in inst.jobs() {
            match &job.weight {
                WeightFunction::Deadline { d, .. } => assert!(*d >= job.release),
                other => panic!("tardiness drew {other:?}"),
            }
        }
    }

    #[test]
    fn family_names_round_trip() {
        for name in ["wflow", "flow2", "tardiness", "mixed"] {
            assert_eq!(Family::from_str(name).unwrap().to_string(), name);
        }
        assert!(Family::from_str("bogus").is_err());
    }

    #[test]
    fn mixed_family_draws_every_shape_eventually() {
        let cfg = GeneratorConfig { jobs: 60, ..GeneratorConfig::default() };
        let inst = generate(&cfg, 7).unwrap();
        let mut seen = [false; 4];
        for job in inst.jobs() {
            let idx = match &job.weight {
                WeightFunction::Constant { .. } => 0,
                WeightFunction::SquaredFlow => 1,
                WeightFunction::Deadline { .. } => 2,
                WeightFunction::Table { .. } => 3,
            };
            seen[idx] = true;
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn covering_generators_are_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let unit = random_unit_cover(&mut rng, 6, 8);
            for p in &unit.points {
                assert!(unit.sets.iter().any(|s| s.covers(p)));
            }
            let multi = random_multi_cover(&mut rng, 5, 4);
            for p in &multi.points {
                let mass: f64 = multi
                    .sets
                    .iter()
                    .zip(&multi.x_frac)
                    .filter(|(s, _)| s.covers(p))
                    .map(|(_, &x)| x)
                    .sum();
                assert!(mass >= p.demand as f64, "mass {mass} under {}", p.demand);
            }
            let cache = random_caching(&mut rng, 6, 8);
            let all = (0..cache.intervals.len()).collect();
            assert!(cache.is_feasible(&all));
        }
    }
}

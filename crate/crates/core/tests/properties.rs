//! Randomized structural invariants. Each property states a fact that must
//! hold for *every* instance, so proptest's shrinking turns any regression
//! into a minimal counterexample.

use proptest::prelude::*;

use geosched_core::gsp::{
    edf_schedule, hall_violation, schedule_cost, GspInstance, Job, Schedule, WeightFunction,
};
use geosched_core::heavy::{union_complexity_2d, union_complexity_3d};
use geosched_core::r2c::{cover_from_schedule, reduce_to_r2c, verify_cover};
use geosched_core::Error;

fn weight_fn() -> impl Strategy<Value = WeightFunction> {
    prop_oneof![
        (1u64..=4).prop_map(|w| WeightFunction::Constant { w }),
        (1u64..=8, 1u64..=4).prop_map(|(d, w)| WeightFunction::Deadline { d, w }),
        Just(WeightFunction::SquaredFlow),
        proptest::collection::vec((1u64..=3, 0u64..=4), 1..=3).prop_map(|deltas| {
            let mut t = 0;
            let steps = deltas
                .into_iter()
                .map(|(dt, w)| {
                    t += dt;
                    (t, w)
                })
                .collect();
            WeightFunction::Table { steps }
        }),
    ]
}

fn tiny_instance() -> impl Strategy<Value = GspInstance> {
    proptest::collection::vec((1u64..=3, 1u64..=3, weight_fn()), 1..=3).prop_map(|specs| {
        let jobs = specs
            .into_iter()
            .enumerate()
            .map(|(i, (release, size, weight))| Job {
                id: format!("j{i}"),
                release,
                size,
                weight,
            })
            .collect();
        GspInstance::new(jobs).unwrap()
    })
}

/// Runs jobs back to back in release order; always valid, never optimal.
fn first_fit(inst: &GspInstance) -> Schedule {
    let mut order: Vec<usize> = (0..inst.jobs().len()).collect();
    order.sort_by_key(|&j| (inst.jobs()[j].release, j));
    let mut sched = Schedule::new();
    let mut last = 0;
    for j in order {
        let job = &inst.jobs()[j];
        let mut t = job.release.max(last);
        for _ in 0..job.size {
            t += 1;
            sched.assign(t, j);
        }
        last = t;
    }
    sched
}

proptest! {
    #[test]
    fn cumulative_cost_sums_the_per_slot_increments(inst in tiny_instance()) {
        for (j, job) in inst.jobs().iter().enumerate() {
            let mut running = 0;
            for t in job.release + 1..=inst.horizon() {
                running += job.weight.increment(job.release, t);
                prop_assert_eq!(inst.cumulative_cost(j, t)?, running);
            }
        }
    }

    #[test]
    fn class_intervals_tile_the_slots_after_release(inst in tiny_instance()) {
        for (j, job) in inst.jobs().iter().enumerate() {
            let mut next = job.release + 1;
            for k in 0..=inst.max_class(j)? {
                let Some((lo, hi)) = inst.class_interval(j, k)? else { continue };
                prop_assert_eq!(lo, next, "class {} of job {}", k, j);
                prop_assert!(hi >= lo && hi <= inst.horizon());
                for t in [lo, hi] {
                    let c = inst.cumulative_cost(j, t)?;
                    prop_assert_eq!(GspInstance::class_of_cost(c), k);
                }
                next = hi + 1;
            }
            prop_assert_eq!(next, inst.horizon() + 1, "job {} leaves uncovered slots", j);
        }
    }

    #[test]
    fn edf_succeeds_exactly_when_no_window_is_overloaded(
        inst in tiny_instance(),
        raw in proptest::collection::vec(1u64..=12, 3),
    ) {
        let deadlines = &raw[..inst.jobs().len()];
        match (hall_violation(&inst, deadlines), edf_schedule(&inst, deadlines)) {
            (None, Ok(sched)) => {
                sched.validate(&inst)?;
                for (j, c) in sched.completions(inst.jobs().len()).iter().enumerate() {
                    let c = c.expect("EDF finishes every job");
                    prop_assert!(c <= deadlines[j].min(inst.horizon()));
                }
            }
            (Some((s, e)), Err(Error::DeadlinesInfeasible { start, end })) => {
                // both witnesses must name genuinely overloaded windows
                for (s, e) in [(s, e), (start, end)] {
                    let load: u64 = inst
                        .jobs()
                        .iter()
                        .enumerate()
                        .filter(|(j, job)| {
                            job.release >= s && deadlines[*j].min(inst.horizon()) <= e
                        })
                        .map(|(_, job)| job.size)
                        .sum();
                    prop_assert!(load > e - s, "window [{}, {}] carries only {}", s, e, load);
                }
            }
            (hall, edf) => prop_assert!(false, "hall {:?} disagrees with edf {:?}", hall, edf),
        }
    }

    #[test]
    fn any_schedule_yields_a_cover_within_four_times_its_cost(inst in tiny_instance()) {
        let sched = first_fit(&inst);
        let cost = schedule_cost(&inst, &sched)?;
        let r2c = reduce_to_r2c(&inst)?;
        let cover = cover_from_schedule(&inst, &r2c, &sched)?;
        let report = verify_cover(&r2c, &cover);
        prop_assert!(report.feasible, "first shortfall at point {:?}", report.first_violation);
        prop_assert!(report.total_weight <= 4 * cost);
    }

    #[test]
    fn rectangle_unions_expose_few_vertical_faces(
        rects in proptest::collection::vec((1u64..=30, 1u64..=30, 0u64..=8, 0u32..=3), 1..=40),
    ) {
        let flat: Vec<(u64, u64, u64)> =
            rects.iter().map(|&(x, lo, span, _)| (x, lo, lo + span)).collect();
        prop_assert!(union_complexity_2d(&flat) <= 2 * flat.len() - 1);

        let boxes: Vec<(u64, u64, u64, u64)> =
            rects.iter().map(|&(x, lo, span, h)| (x, lo, lo + span, 1 << h)).collect();
        let heights = boxes.iter().map(|b| b.3).collect::<std::collections::BTreeSet<_>>().len();
        prop_assert!(union_complexity_3d(&boxes) <= (2 * boxes.len() - 1) * heights);
    }

    #[test]
    fn instances_round_trip_through_json(inst in tiny_instance()) {
        let text = serde_json::to_string(&inst).unwrap();
        let back: GspInstance = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn costs_fall_inside_their_class_bracket(c in any::<u128>()) {
        let k = GspInstance::class_of_cost(c);
        if c == 0 {
            prop_assert_eq!(k, 0);
        } else {
            prop_assert!(c >= 1 << (k - 1));
            prop_assert!(k == 128 || c <= (1 << k) - 1);
        }
    }
}

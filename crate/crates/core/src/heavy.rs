//! Heavy residual points: unit-demand covering in three dimensions.
//!
//! A heavy point has scaled LP mass at least 1 on coverers whose rounded
//! capacity alone meets its rounded residual, so a single such rectangle
//! finishes it. Lifting capacity to a third axis turns the task into hitting
//! each point `(x, y, level)` with one cuboid `[0, xmax] x [y_lo, y_hi] x
//! [0, height]` that dominates it. The greedy here buys cuboids by best
//! weight-per-newly-hit-point; against any fractional solution of total
//! weight `F` it pays at most `(ln m + 1) * F` on `m` points.
//!
//! The module also measures union complexity — the count of vertical faces
//! on the boundary of a union of left-anchored rectangles, and its slicewise
//! sum for cuboids. Left-anchored unions are staircases, so `k` rectangles
//! show at most `2k - 1` faces; the cuboid count is bounded by that times
//! the number of distinct heights. These counts are what makes greedy-style
//! covering of this geometry cheap, and the tests hold the sweep to the
//! bound exactly.

use std::collections::BTreeSet;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{exact_cover_bb, CoverProblem};
use crate::gsp::Time;
use crate::r2c::R2cInstance;
use crate::rounding::{PointState, Preprocessed, X_EPS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R3uPoint {
    pub x: Time,
    pub y: Time,
    /// Rounded residual demand; a cuboid must reach this height.
    pub level: u64,
    /// Index of the originating point in the flat instance.
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct R3uCuboid {
    pub id: String,
    /// Index of the originating rectangle.
    pub rect: usize,
    pub xmax: Time,
    pub y_lo: Time,
    pub y_hi: Time,
    /// Capacity rounded down to a power of two.
    pub height: u64,
    pub weight: u128,
}

impl R3uCuboid {
    pub fn covers(&self, p: &R3uPoint) -> bool {
        p.x <= self.xmax && self.y_lo <= p.y && p.y <= self.y_hi && self.height >= p.level
    }
}

#[derive(Debug, Clone, Default)]
pub struct R3uInstance {
    pub points: Vec<R3uPoint>,
    pub cuboids: Vec<R3uCuboid>,
    /// Scaled LP mass per cuboid; a feasible fractional cover.
    pub x_frac: Vec<f64>,
}

impl R3uInstance {
    /// Total fractional weight, the yardstick for the greedy.
    pub fn fractional_weight(&self) -> f64 {
        self.cuboids.iter().zip(&self.x_frac).map(|(c, &x)| c.weight as f64 * x).sum()
    }
}

/// Lifts the heavy survivors and the unbought positive-mass rectangles into
/// the three-dimensional instance. Fails if some heavy point lacks unit
/// fractional mass on dominating cuboids — the classification promised it.
pub fn build_r3u(r2c: &R2cInstance, pre: &Preprocessed) -> Result<R3uInstance> {
    let mut cuboids = Vec::new();
    let mut x_frac = Vec::new();
    for (r, rect) in r2c.rects.iter().enumerate() {
        if pre.picked.contains(&r) || pre.x_scaled[r] <= X_EPS {
            continue;
        }
        cuboids.push(R3uCuboid {
            id: rect.id.clone(),
            rect: r,
            xmax: rect.xmax,
            y_lo: rect.y_lo,
            y_hi: rect.y_hi,
            height: 1 << pre.rect_class[r],
            weight: rect.weight,
        });
        x_frac.push(pre.x_scaled[r]);
    }
    let mut points = Vec::new();
    for p in pre.heavy_points() {
        let PointState::Surviving { rounded, .. } = pre.points[p] else {
            unreachable!("heavy_points only lists survivors");
        };
        let src = &r2c.points[p];
        let point = R3uPoint { x: src.x, y: src.y, level: rounded, origin: p };
        let mass: f64 = cuboids
            .iter()
            .zip(&x_frac)
            .filter(|(c, _)| c.covers(&point))
            .map(|(_, &x)| x)
            .sum();
        if mass < 1.0 - 1e-9 {
            return Err(Error::Invariant(format!(
                "heavy point {p} carries dominating mass {mass} < 1"
            )));
        }
        points.push(point);
    }
    Ok(R3uInstance { points, cuboids, x_frac })
}

/// Greedy unit cover: repeatedly buy the cuboid minimizing weight per newly
/// hit point. Ties go to the lower weight, then the lexicographically
/// smaller id; the ratio comparison cross-multiplies in `u128`, so the
/// choice is exact and deterministic.
pub fn lp_greedy_cover(r3u: &R3uInstance) -> Result<(BTreeSet<usize>, u128)> {
    let mut uncovered: BTreeSet<usize> = (0..r3u.points.len()).collect();
    let mut chosen = BTreeSet::new();
    let mut weight: u128 = 0;
    while !uncovered.is_empty() {
        let mut best: Option<(usize, u128)> = None; // cuboid, newly hit
        for (c, cuboid) in r3u.cuboids.iter().enumerate() {
            if chosen.contains(&c) {
                continue;
            }
            let hits = uncovered.iter().filter(|&&p| cuboid.covers(&r3u.points[p])).count() as u128;
            if hits == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, b_hits)) => {
                    let (bw, cw) = (r3u.cuboids[b].weight, cuboid.weight);
                    // cw/hits < bw/b_hits, exactly
                    (cw * b_hits).cmp(&(bw * hits)).then(cw.cmp(&bw)).then(
                        cuboid.id.cmp(&r3u.cuboids[b].id),
                    ) == std::cmp::Ordering::Less
                }
            };
            if better {
                best = Some((c, hits));
            }
        }
        let (c, _) = best.ok_or_else(|| {
            Error::Uncoverable(format!("{} points dominated by no cuboid", uncovered.len()))
        })?;
        chosen.insert(c);
        weight += r3u.cuboids[c].weight;
        uncovered.retain(|&p| !r3u.cuboids[c].covers(&r3u.points[p]));
    }
    Ok((chosen, weight))
}

/// Exact counterpart of the greedy, for small instances.
pub fn exact_heavy_cover(r3u: &R3uInstance) -> Result<(BTreeSet<usize>, u128)> {
    let contributions = r3u
        .cuboids
        .iter()
        .map(|c| {
            r3u.points
                .iter()
                .enumerate()
                .filter(|(_, p)| c.covers(p))
                .map(|(i, _)| (i, 1))
                .collect()
        })
        .collect();
    let prob = CoverProblem::new(
        r3u.cuboids.iter().map(|c| c.weight).collect(),
        contributions,
        vec![1; r3u.points.len()],
    );
    exact_cover_bb(&prob)
}

/// Vertical faces on the union boundary of left-anchored rectangles
/// `[0, xmax] x [y_lo, y_hi]`, given as `(xmax, y_lo, y_hi)` triples.
///
/// The union covers `[0, env(y)]` where `env` is the pointwise maximum of
/// interval-constant functions, so counting faces means counting maximal
/// runs of equal positive envelope value across the elementary strips
/// between breakpoints.
pub fn union_complexity_2d(rects: &[(Time, Time, Time)]) -> usize {
    let mut breaks = BTreeSet::new();
    for &(_, y_lo, y_hi) in rects {
        debug_assert!(y_lo <= y_hi);
        breaks.insert(y_lo);
        breaks.insert(y_hi + 1);
    }
    let breaks: Vec<Time> = breaks.into_iter().collect();
    let mut faces = 0;
    let mut prev_env: Time = 0;
    for w in breaks.windows(2) {
        // every rectangle either contains the whole strip [w[0], w[1]) or none of it
        let env = rects
            .iter()
            .filter(|&&(_, y_lo, y_hi)| y_lo <= w[0] && w[1] <= y_hi + 1)
            .map(|&(xmax, _, _)| xmax)
            .max()
            .unwrap_or(0);
        if env > 0 && env != prev_env {
            faces += 1;
        }
        prev_env = env;
    }
    faces
}

/// Slicewise union complexity of cuboids `[0, xmax] x [y_lo, y_hi] x
/// [0, height]`: between consecutive distinct heights the horizontal cross
/// section is constant, and each slice contributes the face count of the
/// cuboids reaching it.
pub fn union_complexity_3d(cuboids: &[(Time, Time, Time, u64)]) -> usize {
    let heights = distinct_heights(cuboids);
    #[cfg(feature = "parallel")]
    return heights.par_iter().map(|&h| slice_faces(cuboids, h)).sum();
    #[cfg(not(feature = "parallel"))]
    heights.iter().map(|&h| slice_faces(cuboids, h)).sum()
}

/// Sequential twin of [`union_complexity_3d`]; same result, one thread.
pub fn union_complexity_3d_seq(cuboids: &[(Time, Time, Time, u64)]) -> usize {
    distinct_heights(cuboids).iter().map(|&h| slice_faces(cuboids, h)).sum()
}

fn distinct_heights(cuboids: &[(Time, Time, Time, u64)]) -> Vec<u64> {
    cuboids.iter().map(|&(_, _, _, h)| h).collect::<BTreeSet<_>>().into_iter().collect()
}

fn slice_faces(cuboids: &[(Time, Time, Time, u64)], h: u64) -> usize {
    let slice: Vec<(Time, Time, Time)> = cuboids
        .iter()
        .filter(|&&(_, _, _, height)| height >= h)
        .map(|&(xmax, y_lo, y_hi, _)| (xmax, y_lo, y_hi))
        .collect();
    union_complexity_2d(&slice)
}

//! Threshold rounding of an LP solution and the heavy/light point split.
//!
//! Every rectangle whose LP value reaches `beta` is bought outright; that
//! costs at most `1/beta` times the LP objective. For each point the bought
//! set may leave a residual demand, which is rounded up to a power of two
//! while capacities round down to powers of two; the remaining LP mass,
//! scaled by `1/beta`, still supplies at least `1/(4*beta)` times the
//! rounded residual (the factor absorbs both roundings). With
//! `beta <= 1/12` that is at least `3x`, enough to split points two ways:
//!
//! * heavy: scaled mass at least 1 on coverers whose rounded capacity meets
//!   the rounded residual — one such rectangle suffices, so a unit-demand
//!   greedy finishes the job;
//! * light: the strictly-lower-capacity coverers alone carry scaled supply
//!   of at least twice the rounded residual, which the per-class multi-cover
//!   stage needs.
//!
//! Both facts are consequences of the LP rows, so this module checks them
//! and fails loudly instead of assuming.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kclp::{threshold_set, KcLpSolution};
use crate::r2c::R2cInstance;

/// Largest admissible threshold; beyond it the light-point supply bound
/// `(1 - 4*beta) / (4*beta) >= 2` no longer holds.
pub const BETA_MAX: f64 = 1.0 / 12.0;

/// Scaled LP values at or below this count as zero mass downstream.
pub const X_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointState {
    /// The bought rectangles alone meet the demand.
    Satisfied,
    Surviving {
        /// Demand left after the bought coverers.
        residual: u64,
        /// `residual` rounded up to a power of two.
        rounded: u64,
        /// `log2(rounded)`.
        class: u32,
        heavy: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub beta: f64,
    /// Rectangles bought outright (LP value at least `beta`).
    pub picked: BTreeSet<usize>,
    pub picked_weight: u128,
    /// `x / beta`, clamped to `[0, 1]`.
    pub x_scaled: Vec<f64>,
    /// Per rectangle: `log2` of its capacity rounded down to a power of two.
    pub rect_class: Vec<u32>,
    pub points: Vec<PointState>,
}

impl Preprocessed {
    pub fn heavy_points(&self) -> Vec<usize> {
        self.survivors(true)
    }

    pub fn light_points(&self) -> Vec<usize> {
        self.survivors(false)
    }

    fn survivors(&self, want_heavy: bool) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, PointState::Surviving { heavy, .. } if *heavy == want_heavy))
            .map(|(p, _)| p)
            .collect()
    }
}

pub fn preprocess(r2c: &R2cInstance, sol: &KcLpSolution, beta: f64) -> Result<Preprocessed> {
    if !(beta > 0.0 && beta <= BETA_MAX + 1e-12) {
        return Err(Error::BadParameter(format!(
            "threshold must lie in (0, 1/12], got {beta}"
        )));
    }
    if sol.x.len() != r2c.rects.len() {
        return Err(Error::BadParameter(format!(
            "solution has {} values for {} rectangles",
            sol.x.len(),
            r2c.rects.len()
        )));
    }
    for rect in &r2c.rects {
        if rect.capacity == 0 {
            return Err(Error::InvalidInstance(format!("rectangle {:?} has zero capacity", rect.id)));
        }
    }

    let all: Vec<usize> = (0..r2c.rects.len()).collect();
    let picked: BTreeSet<usize> = threshold_set(&all, &sol.x, beta).into_iter().collect();
    let picked_weight: u128 = picked.iter().map(|&r| r2c.rects[r].weight).sum();
    if picked_weight as f64 > sol.objective / beta * (1.0 + 1e-9) + 1e-6 {
        return Err(Error::Invariant(format!(
            "bought weight {picked_weight} exceeds objective/beta = {}",
            sol.objective / beta
        )));
    }

    let x_scaled: Vec<f64> = sol.x.iter().map(|&v| (v / beta).clamp(0.0, 1.0)).collect();
    let rect_class: Vec<u32> = r2c.rects.iter().map(|r| r.capacity.ilog2()).collect();

    let mut points = Vec::with_capacity(r2c.points.len());
    for (p, point) in r2c.points.iter().enumerate() {
        let coverers = r2c.coverers(p);
        let committed: u64 = coverers
            .iter()
            .filter(|r| picked.contains(r))
            .map(|&r| r2c.rects[r].capacity)
            .sum();
        if committed >= point.demand {
            points.push(PointState::Satisfied);
            continue;
        }
        let residual = point.demand - committed;
        let rounded = residual.next_power_of_two();
        let class = rounded.trailing_zeros();

        let loose: Vec<usize> =
            coverers.iter().copied().filter(|r| !picked.contains(r)).collect();
        let supply: f64 = loose
            .iter()
            .map(|&r| (1u64 << rect_class[r]).min(rounded) as f64 * x_scaled[r])
            .sum();
        let needed = rounded as f64 / (4.0 * beta);
        if supply < needed * (1.0 - 1e-9) - 1e-6 {
            return Err(Error::Invariant(format!(
                "point {p}: rounded supply {supply} below {needed}; the solution does not satisfy its cover rows"
            )));
        }

        let full_mass: f64 = loose
            .iter()
            .filter(|&&r| 1u64 << rect_class[r] >= rounded)
            .map(|&r| x_scaled[r])
            .sum();
        let heavy = full_mass >= 1.0 - 1e-9;
        if !heavy {
            let low_supply: f64 = loose
                .iter()
                .filter(|&&r| (1u64 << rect_class[r]) < rounded)
                .map(|&r| (1u64 << rect_class[r]) as f64 * x_scaled[r])
                .sum();
            let bound = (1.0 - 4.0 * beta) / (4.0 * beta) * rounded as f64;
            if low_supply < bound * (1.0 - 1e-9) - 1e-6 {
                return Err(Error::Invariant(format!(
                    "light point {p}: low-capacity supply {low_supply} below {bound}"
                )));
            }
        }
        points.push(PointState::Surviving { residual, rounded, class, heavy });
    }

    Ok(Preprocessed { beta, picked, picked_weight, x_scaled, rect_class, points })
}

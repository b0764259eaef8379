//! Exact minimum-weight capacitated covering, by branch and bound.
//!
//! This is the reference solver the approximation stages are measured
//! against. It is deliberately desk-scale: at most [`MAX_SETS`] sets, DFS
//! over include/exclude decisions, a greedy incumbent up front, and an LP
//! relaxation bound at every node. Weights are integers, so a node whose
//! relaxation bound comes within 0.5 of the incumbent cannot lead to a
//! strict improvement and is cut.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lp::LinearProgram;
use crate::r2c::R2cInstance;

/// Hard size cap; beyond this the solver refuses rather than stalls.
pub const MAX_SETS: usize = 24;

/// A covering problem over abstract sets: picking set `s` supplies
/// `amount` units toward each listed point, and every point must end up
/// with supply at least its demand.
#[derive(Debug, Clone)]
pub struct CoverProblem {
    pub weights: Vec<u128>,
    /// `contributions[s]` lists `(point, amount)` pairs supplied by set `s`.
    pub contributions: Vec<Vec<(usize, u64)>>,
    pub demands: Vec<u64>,
}

impl CoverProblem {
    pub fn new(
        weights: Vec<u128>,
        contributions: Vec<Vec<(usize, u64)>>,
        demands: Vec<u64>,
    ) -> Self {
        debug_assert_eq!(weights.len(), contributions.len());
        CoverProblem { weights, contributions, demands }
    }

    pub fn from_r2c(r2c: &R2cInstance) -> Self {
        let contributions = r2c
            .rects
            .iter()
            .map(|rect| {
                r2c.points
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| rect.covers(p))
                    .map(|(i, _)| (i, rect.capacity))
                    .collect()
            })
            .collect();
        CoverProblem {
            weights: r2c.rects.iter().map(|r| r.weight).collect(),
            contributions,
            demands: r2c.points.iter().map(|p| p.demand).collect(),
        }
    }

    fn num_sets(&self) -> usize {
        self.weights.len()
    }

    /// Supply toward currently-unmet demand if `s` were added now.
    fn useful_supply(&self, s: usize, residual: &[u64]) -> u64 {
        self.contributions[s]
            .iter()
            .map(|&(p, a)| a.min(residual[p]))
            .sum()
    }

    fn subtract(&self, s: usize, residual: &mut [u64]) {
        for &(p, a) in &self.contributions[s] {
            residual[p] = residual[p].saturating_sub(a);
        }
    }
}

/// Any minimum-weight choice of sets meeting all demands, with its weight.
pub fn exact_cover_bb(prob: &CoverProblem) -> Result<(BTreeSet<usize>, u128)> {
    let m = prob.num_sets();
    if m > MAX_SETS {
        return Err(Error::CapExceeded(format!(
            "exact solver handles at most {MAX_SETS} sets, got {m}"
        )));
    }
    // feasibility at the outset: everything together must suffice
    let mut residual = prob.demands.clone();
    for s in 0..m {
        prob.subtract(s, &mut residual);
    }
    if let Some(p) = residual.iter().position(|&d| d > 0) {
        return Err(Error::InfeasibleCover { point: p, deficit: residual[p] });
    }

    let (mut best_set, mut best) = greedy_incumbent(prob);
    let mut search = Search { prob, best: &mut best, best_set: &mut best_set, chosen: Vec::new() };
    search.dfs(0, 0, &mut prob.demands.clone());
    Ok((best_set, best))
}

/// Cheapest-per-unit greedy; only used to seed the incumbent, so the
/// ratio comparison may be approximate as long as the result is feasible.
fn greedy_incumbent(prob: &CoverProblem) -> (BTreeSet<usize>, u128) {
    let mut residual = prob.demands.clone();
    let mut chosen = BTreeSet::new();
    let mut weight: u128 = 0;
    while residual.iter().any(|&d| d > 0) {
        let pick = (0..prob.num_sets())
            .filter(|s| !chosen.contains(s))
            .filter_map(|s| {
                let gain = prob.useful_supply(s, &residual);
                (gain > 0).then(|| (prob.weights[s] as f64 / gain as f64, prob.weights[s], s))
            })
            .min_by(|a, b| a.partial_cmp(b).unwrap())
            .map(|(_, _, s)| s)
            .expect("coverable problem ran out of useful sets");
        chosen.insert(pick);
        weight += prob.weights[pick];
        prob.subtract(pick, &mut residual);
    }
    (chosen, weight)
}

struct Search<'a> {
    prob: &'a CoverProblem,
    best: &'a mut u128,
    best_set: &'a mut BTreeSet<usize>,
    chosen: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, next: usize, weight: u128, residual: &mut Vec<u64>) {
        if residual.iter().all(|&d| d == 0) {
            if weight < *self.best {
                *self.best = weight;
                *self.best_set = self.chosen.iter().copied().collect();
            }
            return;
        }
        if next == self.prob.num_sets() || weight >= *self.best {
            return;
        }
        match self.relaxation_bound(next, residual) {
            Some(bound) if weight as f64 + bound >= *self.best as f64 - 0.5 => return,
            None => return, // remaining sets cannot meet the residual
            _ => {}
        }
        // include `next` (skipped when it adds nothing now: demands only
        // shrink, so a useless set stays useless deeper in this branch)
        if self.prob.useful_supply(next, residual) > 0
            && weight + self.prob.weights[next] < *self.best
        {
            let saved = residual.clone();
            self.prob.subtract(next, residual);
            self.chosen.push(next);
            self.dfs(next + 1, weight + self.prob.weights[next], residual);
            self.chosen.pop();
            *residual = saved;
        }
        self.dfs(next + 1, weight, residual);
    }

    /// LP relaxation over the undecided sets, or `None` when even taking
    /// them all cannot meet the residual demand.
    fn relaxation_bound(&self, next: usize, residual: &[u64]) -> Option<f64> {
        let avail: Vec<usize> = (next..self.prob.num_sets()).collect();
        let objective: Vec<f64> = avail.iter().map(|&s| self.prob.weights[s] as f64).collect();
        let mut lp = LinearProgram::new(objective, vec![1.0; avail.len()]);
        for (p, &d) in residual.iter().enumerate() {
            if d == 0 {
                continue;
            }
            let coeffs: Vec<(usize, f64)> = avail
                .iter()
                .enumerate()
                .filter_map(|(i, &s)| {
                    let a: u64 = self.prob.contributions[s]
                        .iter()
                        .filter(|&&(q, _)| q == p)
                        .map(|&(_, a)| a)
                        .sum();
                    (a > 0).then_some((i, a as f64))
                })
                .collect();
            lp.add_row(coeffs, d as f64);
        }
        match lp.solve() {
            Ok(sol) => Some(sol.objective),
            // rows unsatisfiable even at upper bounds: branch is dead
            Err(Error::Lp(msg)) if msg.contains("unsatisfiable") => None,
            // any other solver hiccup: fall back to no pruning, stay exact
            Err(_) => Some(0.0),
        }
    }
}

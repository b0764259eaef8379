//! Preemptive single-machine scheduling with monotone completion costs,
//! attacked through a capacitated geometric covering lens.
//!
//! The pipeline: an instance's completion-cost structure is bucketed into
//! geometric cost classes ([`gsp`]), turned into a two-dimensional
//! capacitated point-cover problem ([`r2c`]), relaxed with knapsack-cover
//! inequalities and solved by cutting planes ([`kclp`]), rounded in stages —
//! a threshold pick ([`rounding`]), a three-dimensional unit cover for heavy
//! points ([`heavy`]), and per-class multi-covers for light points
//! ([`light`]) — and finally pulled back to a schedule via deadlines and EDF.
//! Exact desk-scale oracles ([`exact`], [`audit`]) keep every stage honest,
//! and [`gencache`] houses a primal-dual solver for the interval-cover
//! problem that identical-release instances collapse to.
//!
//! With the default `parallel` feature, batch entry points (seed sweeps,
//! per-class solves, slice sums) fan out through rayon; every API also has a
//! sequential form and the outputs are identical either way.

pub mod audit;
pub mod error;
pub mod exact;
pub mod gen;
pub mod gencache;
pub mod gsp;
pub mod heavy;
pub mod jsonio;
pub mod kclp;
pub mod light;
pub mod lp;
pub mod r2c;
pub mod rounding;

pub use error::{Error, Result};
pub use gsp::{GspInstance, Job, Schedule, Time, WeightFunction};

use crate::gsp::Time;

/// Unified error type for the whole pipeline.
///
/// Feasibility failures carry enough context to act on (witness windows,
/// offending ids); internal invariant violations are loud on purpose — they
/// mean a stage produced output that contradicts a guarantee the next stage
/// relies on, and must never be swallowed.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("unknown job id {0:?}")]
    UnknownJob(String),

    #[error("time {t} is not after release {release}")]
    TimeBeforeRelease { t: Time, release: Time },

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    /// No preemptive schedule meets the deadlines: jobs released at or after
    /// `start` with deadlines at or before `end` carry more work than the
    /// window holds.
    #[error("deadlines infeasible: window [{start}, {end}] is overloaded")]
    DeadlinesInfeasible { start: Time, end: Time },

    #[error("cover is infeasible: point {point} short by {deficit}")]
    InfeasibleCover { point: usize, deficit: u64 },

    #[error("uncoverable: {0}")]
    Uncoverable(String),

    #[error("LP error: {0}")]
    Lp(String),

    #[error("cutting-plane loop did not settle within {rounds} rounds")]
    CutLoopStalled { rounds: usize },

    #[error("parameter out of range: {0}")]
    BadParameter(String),

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("resampling failed after {trials} trials: {source}")]
    ResampleFailed { trials: usize, #[source] source: Box<Error> },

    /// A stage produced output violating a guarantee of the construction.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn resample(trials: usize, source: Error) -> Self {
        Error::ResampleFailed { trials, source: Box::new(source) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

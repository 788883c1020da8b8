use alloc::boxed::Box;
use alloc::string::String;

use crate::reach::PlanResult;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("time {t} lies outside the field's window [{start}, {end}]")]
    TimeWindow { t: f64, start: f64, end: f64 },

    /// The observable has run out of derivative orders (each lift consumes one).
    #[error("defect exhausted: {needed} derivative orders needed, {available} available")]
    DefectExhausted { needed: u32, available: u32 },

    #[error("non-finite coordinate in input")]
    NonFinite,

    /// State left the finite region during integration.
    #[error("flow blew up at step {step} (t = {t}){}", segment.map(|s| alloc::format!(" in schedule segment {s}")).unwrap_or_default())]
    BlowUp { step: usize, t: f64, segment: Option<usize> },

    #[error("field index {index} out of range for {len} fields")]
    Index { index: usize, len: usize },

    #[error("order probe is degenerate: no sample above the numerical-zero floor")]
    DegenerateProbe,

    #[error("planner precondition failed: bracket rank {rank} < dimension {dim}")]
    PlannerPrecondition { rank: usize, dim: usize },

    /// No improvement after repeated step halvings; carries the best result found.
    #[error("planner stalled with residual {}", .0.residual)]
    Stalled(Box<PlanResult>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics (blow-up, stall) rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::BlowUp { .. } | Error::Stalled(_) | Error::DegenerateProbe)
    }
}

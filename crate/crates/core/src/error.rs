use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite input samples")]
    NonFinite,
    #[error("degenerate resample: output length {0} < 1")]
    DegenerateResample(usize),
    #[error("degenerate filterbank: mel bin {0} has no frequency support")]
    DegenerateFilterbank(usize),
    #[error("target/patch misalignment: {frames} mel frames < {patches} patches")]
    TargetPatchMisalignment { frames: usize, patches: usize },
    #[error("infeasible mask: {0}")]
    InfeasibleMask(String),
    #[error("no pretext signal: mask selects no patch")]
    NoPretextSignal,
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("class {class} has {count} members, fewer than {k} folds")]
    ClassTooSmall {
        class: usize,
        count: usize,
        k: usize,
    },
    #[error("{groups} distinct groups, fewer than {k} folds")]
    TooFewGroups { groups: usize, k: usize },
    #[error("infeasible regime: {0}")]
    InfeasibleRegime(String),
    #[error("degenerate runs: {0}")]
    DegenerateRuns(String),
    #[error("no evidence: all paired differences are zero")]
    NoEvidence,
    #[error("empty input: {0}")]
    Empty(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

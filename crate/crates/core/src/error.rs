use thiserror::Error;

use crate::covering::Section;

/// Every failure mode surfaced by the library.
///
/// Variants that would contradict a structural claim about the critical
/// locus (`NotConcurrent` out of `phi`, `NotAPencil`, `MultipleArcs`, ...)
/// are treated as hard failures by the verification report.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum AtlasError {
    #[error("argument is zero (|z| = {0:e})")]
    ZeroInput(f64),
    #[error("points coincide projectively")]
    CoincidentPoints,
    #[error("lines are not concurrent (sigma3/sigma1 = {0:e})")]
    NotConcurrent(f64),
    #[error("all three lines coincide; intersection is indeterminate")]
    Indeterminate,
    #[error("rank deficient system: {0}")]
    RankDeficient(String),
    #[error("conics are identical")]
    IdenticalConics,
    #[error("points are collinear")]
    CollinearPoints,
    #[error("point is off the torus (min |z_j| = {0:e})")]
    OffTorus(f64),
    #[error("finite-difference step crosses an argument branch (min |z_j| = {0:e})")]
    BranchJump(f64),
    #[error("finite-difference step {0:e} outside [1e-7, 1e-4]")]
    BadStep(f64),
    #[error("only {found} of {wanted} sign changes found")]
    InsufficientHits { found: usize, wanted: usize },
    #[error("value is not regular")]
    NotRegular,
    #[error("value is not critical")]
    NotCritical,
    #[error("fiber line is degenerate: a coordinate vanishes identically")]
    DegenerateFiber,
    #[error("point is within the exclusion radius of base point {0}")]
    NearBasePoint(&'static str),
    #[error("base point {0} has no well-defined critical value without a direction")]
    BasePointIndeterminate(&'static str),
    #[error("first-order limit at base point {q} disagrees by {gap:e} rad")]
    LimitInconsistent { q: &'static str, gap: f64 },
    #[error("level-set tracing failed: {0}")]
    TraceFailed(String),
    #[error("fitted conics do not span a pencil (sigma3/sigma1 = {0:e})")]
    NotAPencil(f64),
    #[error("no solution found: {0}")]
    NoSolution(String),
    #[error("{0} candidate solutions survived filtering")]
    MultipleSolutions(usize),
    #[error("argument tuple is not attained")]
    NotAttained,
    #[error("{0} arcs carry the same argument label")]
    MultipleArcs(usize),
    #[error("traced locus {0:?} does not close up")]
    OpenCurve((Section, Section)),
    #[error("no traced locus for pair {0:?}")]
    MissingPair((Section, Section)),
    #[error("transport step underflow near loop parameter {0}")]
    AmbiguousTransport(f64),
    #[error("loop does not return to its base point (gap {0:e})")]
    OpenLoop(f64),
    #[error("configuration is not generic: {0}")]
    NotGeneric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, AtlasError>;

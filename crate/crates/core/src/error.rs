use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    SuperstableDegenerate { period: u32 },
    PeriodCapExceeded { p_max: u32 },
    NotRenormalizable { level: usize },
    PrecisionExhausted { level: usize, lambda: f64 },
    BracketInvalid { lo: f64, hi: f64 },
    LevelMissing { level: usize },
    InsufficientJets { needed: usize, available: usize },
    CriticalPoint { x: f64, y: f64 },
    DegenerateSamples,
    OrbitEscaped { step: usize },
    StencilOutsideDomain,
    OutsideDomain { x: f64, y: f64 },
    OnSlit { x: f64 },
    NonPositiveArgument { value: f64 },
    RadiusTooLarge { r: f64, limit: f64 },
    NotDiffeo { x: f64, y: f64 },
    PullbackEscaped { step: usize },
    WindingMismatch { expected: i64, found: i64 },
    DomainsTouch { margin: f64 },
    NoConvergence { iterations: usize },
    OrbitHitRealAxis { step: usize },
    InvalidN0 { n0: u32 },
    ChainInvalid { chain: usize, step: usize },
    BranchAmbiguity,
    TraceStalled { step: usize },
    OrbitLeftInterval { index: usize },
    InvalidArgument(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            SuperstableDegenerate { period } => {
                write!(f, "superstable: f^{period}(0) = 0, rescaling undefined")
            }
            PeriodCapExceeded { p_max } => write!(f, "period exceeds cap p_max = {p_max}"),
            NotRenormalizable { level } => write!(f, "map is not renormalizable at level {level}"),
            PrecisionExhausted { level, lambda } => {
                write!(f, "precision exhausted at level {level} (|lambda| = {lambda:e})")
            }
            BracketInvalid { lo, hi } => {
                write!(f, "bracket [{lo}, {hi}] does not straddle the target combinatorics")
            }
            LevelMissing { level } => write!(f, "tower level {level} missing"),
            InsufficientJets { needed, available } => {
                write!(f, "need derivatives up to order {needed}, have {available}")
            }
            CriticalPoint { x, y } => write!(f, "dF vanishes at {x}+{y}i"),
            DegenerateSamples => write!(f, "all sampled |mu| vanish"),
            OrbitEscaped { step } => write!(f, "orbit escaped the domain at step {step}"),
            StencilOutsideDomain => write!(f, "finite-difference stencil leaves the domain"),
            OutsideDomain { x, y } => write!(f, "point {x}+{y}i outside the domain"),
            OnSlit { x } => write!(f, "point {x} lies on the slit"),
            NonPositiveArgument { value } => write!(f, "argument {value} must be positive"),
            RadiusTooLarge { r, limit } => write!(f, "radius {r} must be below {limit}"),
            NotDiffeo { x, y } => write!(f, "det DF <= 0 at {x}+{y}i"),
            PullbackEscaped { step } => write!(f, "pullback left V at step {step}"),
            WindingMismatch { expected, found } => {
                write!(f, "winding number {found}, expected {expected}")
            }
            DomainsTouch { margin } => write!(f, "U not compactly inside V (margin {margin:e})"),
            NoConvergence { iterations } => write!(f, "no convergence after {iterations} iterations"),
            OrbitHitRealAxis { step } => write!(f, "orbit hit the real axis at step {step}"),
            InvalidN0 { n0 } => write!(f, "n0 = {n0} must be at least 2"),
            ChainInvalid { chain, step } => write!(f, "chain {chain} invalid at step {step}"),
            BranchAmbiguity => write!(f, "branch tracking failed near a critical value"),
            TraceStalled { step } => write!(f, "trace stalled at step {step}"),
            OrbitLeftInterval { index } => write!(f, "orbit left the interval at index {index}"),
            InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

use thiserror::Error;

/// Errors raised by the calculus, the hierarchy machinery and the quadrature solver.
///
/// Every variant names the precondition that failed so that callers (in particular
/// the CLI) can surface it without further context.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("point {point:?} lies outside the field's domain box")]
    OutOfDomain { point: Vec<f64> },

    #[error("operator is not gl-regular at this point (no cyclic vector found)")]
    NotGlRegular,

    #[error("operators do not commute: |LM - ML| = {residual:e} exceeds {tolerance:e}")]
    DoesNotCommute { residual: f64, tolerance: f64 },

    #[error("Cayley-Hamilton closure violated: |L A_(n-1) - sigma_n Id| = {residual:e}")]
    CayleyHamiltonViolated { residual: f64 },

    #[error("jet order {got} is insufficient, {needed} required")]
    InsufficientJetOrder { needed: usize, got: usize },

    #[error("operator field is not a symmetry (residual {residual:e})")]
    NotASymmetry { residual: f64 },

    #[error("function is not a conservation law (residual {residual:e})")]
    NotAConservationLaw { residual: f64 },

    #[error("1-forms do not form a hierarchy: |L* w_i - w_(i+1)| = {residual:e}")]
    NotAHierarchy { residual: f64 },

    #[error("1-form is not closed: residual {residual:e} exceeds {tolerance:e}")]
    NotClosed { residual: f64, tolerance: f64 },

    #[error("adaptive quadrature failed to reach tolerance {tolerance:e} (estimate {estimate:e})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("differentials are not linearly independent at the base point")]
    NotRegular,

    #[error("hierarchy matrix is singular at the curve point (regular hierarchy required)")]
    SingularHierarchyMatrix,

    #[error("velocity gamma'({x}) is not a cyclic vector of L(gamma({x}))")]
    NotCyclicVelocity { x: f64 },

    #[error("eigenvalue coordinate of block {block} is not strictly monotone along the curve")]
    NonMonotoneEigenvalueCoordinate { block: usize },

    #[error("smoothness deficit: {0}")]
    SmoothnessDeficit(String),

    #[error("eigenvalue coordinate {value} outside sampled range [{lo}, {hi}]")]
    OutOfSampledRange { value: f64, lo: f64, hi: f64 },

    #[error("Newton iteration diverged (residual {residual:e} at {iterate:?})")]
    NewtonDiverged { iterate: Vec<f64>, residual: f64 },

    #[error("grid too coarse: axis {axis} has {count} nodes (at least 3 required)")]
    GridTooCoarse { axis: usize, count: usize },

    #[error("{check} fails along the initial curve (residual {residual:e})")]
    CurveConsistency { check: String, residual: f64 },

    #[error("no closed-form hierarchy for block {block}: {reason}")]
    UnsupportedBlock { block: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

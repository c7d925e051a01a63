use thiserror::Error;

/// Failures of a CLI run, each tied to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A declared expectation did not hold, a self-test item failed, or the pipeline
    /// could not produce a solution.
    #[error("{0}")]
    Failed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Failed(_) | CliError::Io { .. } => 1,
        }
    }

    /// A pipeline error with the stage that raised it.
    pub fn pipeline(stage: &str, e: nijhydro::Error) -> Self {
        CliError::Failed(format!("{stage}: {e}{}", hint(&e)))
    }
}

/// Names the hypothesis behind the common pipeline failures.
fn hint(e: &nijhydro::Error) -> &'static str {
    use nijhydro::Error::*;
    match e {
        NotCyclicVelocity { .. } => " — the initial curve's velocity must be a cyclic vector of L along the curve",
        SingularHierarchyMatrix | NotRegular => " — the conservation-law hierarchy must be regular (independent differentials)",
        NonMonotoneEigenvalueCoordinate { .. } => " — block eigenvalues must be strictly monotone along the curve",
        NotASymmetry { .. } => " — the reconstructed operator must be a symmetry of L",
        NotClosed { .. } => " — the forms M*dfᵢ must be closed to be integrated",
        NotAConservationLaw { .. } => " — the hierarchy seed must be a conservation law of L",
        NewtonDiverged { .. } => " — the target lies outside the region where the implicit system is solvable",
        SmoothnessDeficit(_) => " — block functions are sampled with cubic splines (jets up to order 3)",
        _ => "",
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

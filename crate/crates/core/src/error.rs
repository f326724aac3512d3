use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("coincident placement: {what} {index} and target {target} are at zero distance")]
    ZeroDistance {
        what: &'static str,
        index: usize,
        target: usize,
    },

    #[error("layout rejected after {attempts} draws (minimum separation {min_separation} m)")]
    LayoutRejected { attempts: usize, min_separation: f64 },

    #[error("singular geometry{}: CRLB denominator below numerical floor", fmt_target(*.target))]
    SingularGeometry { target: Option<usize> },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("linearization point has non-positive entry at index {index}")]
    InvalidPoint { index: usize },

    #[error("convex subproblem infeasible (phase-I optimum {phase1_value:.3e} after {iterations} Newton steps)")]
    Infeasible { phase1_value: f64, iterations: usize },

    #[error("barrier method stalled after {iterations} Newton steps (duality gap {gap:.3e})")]
    NumericalStall { iterations: usize, gap: f64 },

    #[error("uniform allocation does not yield a finite cost for every target")]
    InfeasibleStart,

    #[error("degenerate canonical solution (sum {sum:.3e})")]
    DegenerateSolution { sum: f64 },

    #[error("single-target relaxation for target {target} has no valid KKT candidate")]
    InfeasibleRelaxation { target: usize },

    #[error("support enumeration limited to {max} transmitters, got {got}")]
    TooManyTransmitters { got: usize, max: usize },

    #[error("rank-deficient multilateration geometry for target {target}")]
    RankDeficient { target: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn fmt_target(target: Option<usize>) -> String {
    match target {
        Some(q) => format!(" at target {q}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a target index to a `SingularGeometry` error.
    pub(crate) fn at_target(self, q: usize) -> Self {
        match self {
            Error::SingularGeometry { .. } => Error::SingularGeometry { target: Some(q) },
            other => other,
        }
    }

    /// True for errors caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::InvalidScenario(_)
                | Error::InvalidArgument(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::TooManyTransmitters { .. }
        )
    }
}

use thiserror::Error;

/// Everything that can go wrong across the crate, grouped so the
/// command-line front end can map failures onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Ill-formed urn function parameters (family constraints violated).
    #[error("invalid urn function: {0}")]
    InvalidSpec(String),

    /// Ill-formed arguments other than the urn function itself.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A share-like quantity left the unit interval.
    #[error("{what} outside [0, 1]: {value}")]
    Domain { what: &'static str, value: f64 },

    /// pi(x) - x vanishes identically on an interval, so fixed points and
    /// the transformed urn function are undefined there.
    #[error("degenerate family: pi(x) - x vanishes on [{lo}, {hi}]")]
    DegenerateFamily { lo: f64, hi: f64 },

    /// The integrand 1/(pi(a) - a) has a zero of its denominator inside the
    /// requested interval.
    #[error("fixed point near {at} lies inside ({lo}, {hi}); transformed urn function is singular there")]
    SingularTransform { lo: f64, hi: f64, at: f64 },

    /// A trajectory cannot be read as a function tau(psi).
    #[error("trajectory not invertible: {0}")]
    NotInvertible(String),

    /// No admissible path satisfies the event constraints.
    #[error("infeasible event: {0}")]
    InfeasibleEvent(String),

    /// The request exceeds the configured work budget.
    #[error("work budget exceeded for {what}: needs {needed}, budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u64,
        budget: u64,
    },

    /// An iterative scheme failed to deliver its accuracy contract.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The moment generating function solver could not invert pi at the
    /// level the functional equation asked for.
    #[error("urn function not invertible at beta = {beta}: {detail}")]
    MgfInversion { beta: f64, detail: String },

    /// A curve handed to the Legendre transform is not convex.
    #[error("curve not convex: second difference {value:.3e} at grid index {index}")]
    NotConvex { index: usize, value: f64 },
}

/// Coarse failure category; the binary turns this into an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: exit code 2.
    Validation,
    /// Structurally impossible request (degenerate family, singular
    /// interval, non-invertible trajectory, empty event): exit code 3.
    Infeasible,
    /// Work budget exceeded: exit code 4.
    Budget,
    /// Numerical failure: exit code 5.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Domain { .. } => {
                ErrorKind::Validation
            }
            Error::DegenerateFamily { .. }
            | Error::SingularTransform { .. }
            | Error::NotInvertible(_)
            | Error::InfeasibleEvent(_) => ErrorKind::Infeasible,
            Error::BudgetExceeded { .. } => ErrorKind::Budget,
            Error::Numerical(_) | Error::MgfInversion { .. } | Error::NotConvex { .. } => {
                ErrorKind::Numerical
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

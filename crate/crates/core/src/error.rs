use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("{name} = {value} outside {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// `C_mu(at) > C_nu(at)`, or unequal means/masses (witness at +/-inf).
    #[error("convex_order violated_at {at}")]
    ConvexOrder { at: f64 },

    /// Some of `(nu - mu)^+` lies strictly inside the interval hull of `(mu - nu)^+`.
    #[error("dispersion assumption violated on [{lo}, {hi}]")]
    Dispersion { lo: f64, hi: f64 },

    #[error("strengthened dispersion assumption violated: {0}")]
    Strengthened(String),

    #[error("slope {theta} outside the attainable range of the conjugate")]
    SlopeRange { theta: f64 },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("linear program infeasible ({family} constraints); try a larger martingale slack")]
    Infeasible { family: &'static str },

    #[error("linear program did not converge within {0} pivots")]
    PivotLimit(usize),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the structural assumptions on the marginals
    /// (as opposed to bad input or numerical failures).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::ConvexOrder { .. } | Error::Dispersion { .. } | Error::Strengthened(_) => true,
            Error::Step { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

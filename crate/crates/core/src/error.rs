use thiserror::Error;

/// Errors produced by the analysis, evaluation and verification layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid exponent matrix: {0}")]
    InvalidMatrix(String),

    #[error("malformed index set: {0}")]
    MalformedIndex(String),

    #[error("invalid test form: {0}")]
    InvalidTestForm(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("structural assumption violated for I = {subset}: {detail}")]
    StructuralAssumption { subset: String, detail: String },

    #[error("Gamma factor has a pole on the integration contour: {0}")]
    ContourPole(String),

    #[error("contour integral did not converge: {0}")]
    Nonconvergent(String),

    #[error("radial quadrature did not converge: {0}")]
    QuadratureNonconvergent(String),

    #[error("Mellin integral is not absolutely convergent at these parameters: {0}")]
    NonintegrableParameters(String),

    #[error("torus radii leave the test form support: {0}")]
    RadiiOutsideSupport(String),

    #[error("extrapolation fit did not converge: {0}")]
    NonconvergentFit(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::ContourPole(_)
                | Error::Nonconvergent(_)
                | Error::QuadratureNonconvergent(_)
                | Error::NonintegrableParameters(_)
                | Error::RadiiOutsideSupport(_)
                | Error::NonconvergentFit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

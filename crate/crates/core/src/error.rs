use thiserror::Error;

/// Errors raised by the expansion, integration and harness routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular flow Jacobian at t = {t}, theta = {theta}")]
    SingularJacobian { t: f64, theta: f64 },

    #[error("quadrature did not converge at {nodes} nodes (last two estimates {previous:?} and {last:?})")]
    QuadratureNotConverged {
        nodes: usize,
        previous: Vec<f64>,
        last: Vec<f64>,
    },

    #[error("order {order} is not supported by {what} (max_order {max_order})")]
    UnsupportedOrder {
        what: String,
        order: usize,
        max_order: usize,
    },

    #[error("state at distance {radius:e} from the magnetic axis (minimum {min:e})")]
    AxisProximity { radius: f64, min: f64 },

    #[error("integration blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("trajectory grids do not match ({left} vs {right} samples)")]
    GridMismatch { left: usize, right: usize },
}

impl Error {
    /// True for failures of the numerics themselves (blow-up, axis, quadrature),
    /// as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularJacobian { .. }
                | Error::QuadratureNotConverged { .. }
                | Error::AxisProximity { .. }
                | Error::BlowUp { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

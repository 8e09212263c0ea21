use thiserror::Error;

/// Failures raised by the simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid has {grid} dimension(s) but the model has {modes} mode(s)")]
    DimensionMismatch { grid: usize, modes: usize },
    #[error("stability guard: dt * max frequency = {0:.4} (must stay below 0.5)")]
    StabilityGuard(f64),
    #[error("edge density {density:.3e} at t = {time} exceeds 1e-10")]
    EdgeDensity { density: f64, time: f64 },
    #[error("norm drift {drift:.3e} at t = {time}")]
    NormDrift { drift: f64, time: f64 },
    #[error("photon cutoff too small: {population:.3e} population in the two highest levels")]
    CutoffTooSmall { population: f64 },
    #[error("integrator step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error(
        "frame spacing too coarse: eps_gd changes by {0:.3e} (relative) when the stride is halved"
    )]
    FrameSpacing(f64),
    #[error("{0}")]
    Undefined(String),
}

impl Error {
    /// True for violations of a conservation law or numerical guard raised
    /// during a run, as opposed to bad input.
    pub fn is_physics_violation(&self) -> bool {
        matches!(
            self,
            Error::EdgeDensity { .. }
                | Error::NormDrift { .. }
                | Error::CutoffTooSmall { .. }
                | Error::StepUnderflow(_)
                | Error::FrameSpacing(_)
                | Error::Undefined(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

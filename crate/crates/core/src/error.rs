//! Crate-wide error type.

/// Errors produced by the dynamics, reduction, averaging, and correction layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("elliptic integral parameter m = {m} outside the domain of {integral}")]
    EllipticDomain { integral: &'static str, m: f64 },

    #[error("non-finite input {value} passed to {context}")]
    NonFinite { context: &'static str, value: f64 },

    #[error("model parameters must be positive (mu = {mu}, omega = {omega})")]
    InvalidParams { mu: f64, omega: f64 },

    #[error("distance to origin r = {r} fell below the close-approach floor {floor}")]
    CloseApproach { r: f64, floor: f64 },

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("dense output was not recorded for this solution")]
    DenseOutputUnavailable,

    #[error("sample time t = {t} outside the integrated span [{t0}, {t1}]")]
    SampleOutOfRange { t: f64, t0: f64, t1: f64 },

    #[error("zero-action ellipse: phase angle undefined")]
    DegenerateEllipse,

    #[error("closed-form 1/rho series is tabulated through S5; order {order} requested")]
    SeriesOrder { order: usize },

    #[error("short-period corrections are computed through order 9; order {order} requested")]
    CorrectionOrder { order: usize },

    #[error("correction order {order} is not one of 0, 6, 8, 9")]
    SolutionCorrectionOrder { order: usize },

    #[error("quadrature averaging needs at least 64 nodes ({nodes} requested)")]
    QuadratureNodes { nodes: usize },

    #[error("averaging integrand singular: rho = {rho} at phi = {phi} (close-encounter configuration)")]
    AveragingSingular { phi: f64, rho: f64 },

    #[error("libration period not found within {t_max} time units")]
    PeriodNotFound { t_max: f64 },

    #[error("differential corrector stalled after {iterations} iterations (eps = {eps})")]
    CorrectorStalled { iterations: usize, eps: f64 },

    #[error("singular bordered system in the differential corrector")]
    SingularCorrector,

    #[error("periodicity error undefined: initial {which} norm is zero")]
    ZeroNormSeed { which: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;

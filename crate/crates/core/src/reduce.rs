//! Complete reduction of the quadratic part of the motion.
//!
//! The canonical map (x, y, px, py) <-> (phi, q, Phi, Q) turns the linearized
//! dynamics into a drifting 2:1 reference ellipse: Phi sets the ellipse size,
//! phi is the phase along it, q is the ordinate of its center and Q (through
//! 2Q/omega) its abscissa. The perturbation enters only through the scaled
//! distance rho(phi, chi, sigma).

use crate::dynamics::CartesianState;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::specfun;

/// Canonical variables (phi, q, Phi, Q) of the completely reduced problem.
///
/// The same variable set serves both osculating (original) and mean (prime)
/// element sets; which one a value represents is contextual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    /// Phase angle along the reference ellipse; `None` for the degenerate
    /// zero-action ellipse, where the phase is undefined.
    pub phi: Option<f64>,
    /// Ordinate of the ellipse center.
    pub q: f64,
    /// Action Phi >= 0 fixing the ellipse size, B = sqrt(2 Phi / omega).
    pub action: f64,
    /// Momentum Q conjugate to q; the center abscissa is 2 Q / omega.
    pub momentum: f64,
}

impl ReducedState {
    pub fn new(phi: f64, q: f64, action: f64, momentum: f64) -> Self {
        ReducedState { phi: Some(phi), q, action, momentum }
    }

    pub fn phase_defined(&self) -> bool {
        self.phi.is_some()
    }

    /// Phase angle, or the degeneracy error for a zero-action ellipse.
    pub fn phase(&self) -> Result<f64> {
        self.phi.ok_or(Error::DegenerateEllipse)
    }
}

/// Geometry of the instantaneous reference ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseFrame {
    /// Semi-major axis, along y.
    pub a: f64,
    /// Semi-minor axis; a = 2 b identically.
    pub b: f64,
    /// Center abscissa 2 Q / omega.
    pub x_c: f64,
    /// Center ordinate q.
    pub y_c: f64,
}

/// Center coordinates scaled by the ellipse axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    /// chi = q / A.
    pub chi: f64,
    /// sigma = (Q / omega) / B.
    pub sigma: f64,
}

/// Semi-minor axis B = sqrt(2 Phi / omega).
pub fn semi_minor(action: f64, params: &ModelParams) -> f64 {
    (2.0 * action / params.omega).sqrt()
}

impl EllipseFrame {
    pub fn from_reduced(state: &ReducedState, params: &ModelParams) -> Self {
        let b = semi_minor(state.action, params);
        EllipseFrame {
            a: 2.0 * b,
            b,
            x_c: 2.0 * state.momentum / params.omega,
            y_c: state.q,
        }
    }
}

impl ShapeParams {
    /// Requires a non-degenerate ellipse (Phi > 0).
    pub fn from_reduced(state: &ReducedState, params: &ModelParams) -> Result<Self> {
        if !(state.action > 0.0) {
            return Err(Error::DegenerateEllipse);
        }
        let b = semi_minor(state.action, params);
        Ok(ShapeParams {
            chi: state.q / (2.0 * b),
            sigma: state.momentum / (params.omega * b),
        })
    }
}

/// Forward canonical map to reduced variables.
///
/// Q = py + w x, q = -y - 2 px / w, Phi = ((w y + px)^2 + (w x + 2 py)^2) / 2w,
/// phi = atan2(-(w x + 2 py), w y + px). The phase is reported as undefined
/// when the action vanishes.
pub fn to_reduced(state: &CartesianState, params: &ModelParams) -> ReducedState {
    let w = params.omega;
    let cos_amp = w * state.y + state.px; // sqrt(2 w Phi) cos phi
    let sin_amp = -(w * state.x + 2.0 * state.py); // sqrt(2 w Phi) sin phi
    let action = (cos_amp * cos_amp + sin_amp * sin_amp) / (2.0 * w);
    let phi = if action > 0.0 { Some(sin_amp.atan2(cos_amp)) } else { None };
    ReducedState {
        phi,
        q: -state.y - 2.0 * state.px / w,
        action,
        momentum: state.py + w * state.x,
    }
}

/// Linear integrals (K1, K2) of the unperturbed flow,
/// K1 = -x - 2 py / w, K2 = y + px / w.
pub fn linear_invariants(state: &CartesianState, params: &ModelParams) -> (f64, f64) {
    let w = params.omega;
    (-state.x - 2.0 * state.py / w, state.y + state.px / w)
}

/// Inverse canonical map:
/// w x = 2 Q + sqrt(2 w Phi) sin phi, w y = w q + 2 sqrt(2 w Phi) cos phi,
/// px = -w q - sqrt(2 w Phi) cos phi, py = -Q - sqrt(2 w Phi) sin phi.
pub fn from_reduced(state: &ReducedState, t: f64, params: &ModelParams) -> CartesianState {
    let w = params.omega;
    let amp = (2.0 * w * state.action.max(0.0)).sqrt();
    let (s, c) = match state.phi {
        Some(phi) => phi.sin_cos(),
        None => (0.0, 0.0), // amplitude is zero; the phase never enters
    };
    CartesianState {
        t,
        x: (2.0 * state.momentum + amp * s) / w,
        y: state.q + 2.0 * amp * c / w,
        px: -w * state.q - amp * c,
        py: -state.momentum - amp * s,
    }
}

/// Exact solution of the unperturbed flow: phi(t) = phi* + w t,
/// q(t) = q* - 3 Q t, with Phi and Q constant, mapped back to Cartesian.
pub fn linear_solution(
    initial: &ReducedState,
    t: f64,
    params: &ModelParams,
) -> CartesianState {
    let drifted = ReducedState {
        phi: initial.phi.map(|p| p + params.omega * t),
        q: initial.q - 3.0 * initial.momentum * t,
        action: initial.action,
        momentum: initial.momentum,
    };
    from_reduced(&drifted, t, params)
}

/// Scaled distance rho = r / B as a function of the phase and shape:
/// sqrt(1 + 3 cos^2 phi + 4 sigma sin phi + 8 chi cos phi + 4 sigma^2 + 4 chi^2).
pub fn rho(phi: f64, chi: f64, sigma: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let u = s + 2.0 * sigma;
    let v = 2.0 * c + 2.0 * chi;
    // Identical to the expanded radicand but manifestly non-negative.
    (u * u + v * v).sqrt()
}

/// Tabulated coefficients S_0..S_5 of the expansion 1/rho = sum S_n / Delta^(2n+1).
pub fn series_coefficient(n: usize, phi: f64, chi: f64, sigma: f64) -> Result<f64> {
    let c = phi.cos();
    let s = phi.sin();
    Ok(match n {
        0 => 1.0,
        1 => -4.0 * chi * c,
        2 => {
            -3.5 * sigma * s - 1.5 * sigma * (3.0 * phi).sin()
                + 7.0 * chi * chi
                + 9.0 * chi * chi * (2.0 * phi).cos()
        }
        3 => {
            30.0 * sigma * chi * (2.0 * phi).sin() + 9.0 * sigma * chi * (4.0 * phi).sin()
                - 42.0 * chi.powi(3) * c
                - 22.0 * chi.powi(3) * (3.0 * phi).cos()
        }
        4 => {
            let chi4 = chi.powi(4);
            let sig2 = sigma * sigma;
            74.25 * chi4 - 37.25 * sig2
                + (125.0 * chi4 - 501.0 / 8.0 * sig2) * (2.0 * phi).cos()
                + (56.75 * chi4 - 24.75 * sig2) * (4.0 * phi).cos()
                - 27.0 / 8.0 * sig2 * (6.0 * phi).cos()
                - 106.5 * sigma * chi * chi * s
                - 156.75 * sigma * chi * chi * (3.0 * phi).sin()
                - 38.25 * sigma * chi * chi * (5.0 * phi).sin()
        }
        5 => {
            let chi5 = chi.powi(5);
            let s2c = sigma * sigma * chi;
            (741.0 * s2c - 495.0 * chi5) * c
                + (561.0 * s2c - 377.5 * chi5) * (3.0 * phi).cos()
                + (207.0 * s2c - 151.5 * chi5) * (5.0 * phi).cos()
                + 27.0 * s2c * (7.0 * phi).cos()
                + 792.5 * sigma * chi.powi(3) * (2.0 * phi).sin()
                + 670.0 * sigma * chi.powi(3) * (4.0 * phi).sin()
                + 142.5 * sigma * chi.powi(3) * (6.0 * phi).sin()
        }
        _ => return Err(Error::SeriesOrder { order: n }),
    })
}

/// Truncated expansion of 1/rho through S_n, n <= 5.
pub fn rho_series(phi: f64, chi: f64, sigma: f64, order: usize) -> Result<f64> {
    if order > 5 {
        return Err(Error::SeriesOrder { order });
    }
    let d = specfun::delta(phi);
    let d2 = d * d;
    let mut acc = 0.0;
    let mut dpow = d; // Delta^(2n+1)
    for n in 0..=order {
        acc += series_coefficient(n, phi, chi, sigma)? / dpow;
        dpow *= d2;
    }
    Ok(acc)
}

/// Perturbation energy -mu / r written in reduced variables, -(mu / B) / rho.
pub fn kepler_term(state: &ReducedState, params: &ModelParams) -> Result<f64> {
    let shape = ShapeParams::from_reduced(state, params)?;
    let b = semi_minor(state.action, params);
    Ok(-(params.mu / b) / rho(state.phase()?, shape.chi, shape.sigma))
}

/// Quadratic-part energy in reduced variables, w Phi - (3/2) Q^2.
pub fn quadratic_energy(state: &ReducedState, params: &ModelParams) -> f64 {
    params.omega * state.action - 1.5 * state.momentum * state.momentum
}

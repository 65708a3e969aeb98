//! Averaged (normalized) dynamics of the ellipse center.
//!
//! Once the fast phase is removed, the action Phi is a formal integral and
//! the center coordinates (q, Q) obey a one-degree-of-freedom flow. Three
//! right-hand sides are provided: the order-6 harmonic form with its explicit
//! solution, the order-8 form with its first-order Lindstedt refinement, and
//! an augmented form that averages the exact perturbation by quadrature.

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, OdeSolution};
use crate::params::ModelParams;
use crate::reduce::{semi_minor, ReducedState};
use crate::specfun;
use std::f64::consts::{PI, TAU};

/// Mean (prime) canonical variables; the action is a formal integral here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularState {
    pub phi: f64,
    pub q: f64,
    pub action: f64,
    pub momentum: f64,
}

impl SecularState {
    pub fn new(phi: f64, q: f64, action: f64, momentum: f64) -> Self {
        SecularState { phi, q, action, momentum }
    }

    pub fn to_reduced(&self) -> ReducedState {
        ReducedState::new(self.phi, self.q, self.action, self.momentum)
    }

    pub fn from_reduced(state: &ReducedState) -> Result<Self> {
        Ok(SecularState {
            phi: state.phase()?,
            q: state.q,
            action: state.action,
            momentum: state.momentum,
        })
    }
}

/// Which averaged right-hand side to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMode {
    /// Harmonic order-6 flow; admits the closed-form solution.
    Closed6,
    /// Order-8 flow with the quartic restoring term.
    Series8,
    /// All orders of the perturbation at once, averaged by periodic
    /// trapezoid quadrature of the exact 1/rho.
    QuadratureAugmented,
}

/// Averaging mode, short-period correction order, and quadrature resolution.
#[derive(Debug, Clone, Copy)]
pub struct SecularConfig {
    pub mode: AveragingMode,
    /// Order of the short-period corrections applied outside this module:
    /// 0 (none), 6, 8, or 9.
    pub correction_order: usize,
    /// Starting node count for quadrature averaging; doubled until the
    /// averages stabilize.
    pub nodes: usize,
}

impl Default for SecularConfig {
    fn default() -> Self {
        SecularConfig { mode: AveragingMode::Closed6, correction_order: 0, nodes: 256 }
    }
}

impl SecularConfig {
    pub fn with_mode(mode: AveragingMode) -> Self {
        SecularConfig { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == AveragingMode::QuadratureAugmented && self.nodes < 64 {
            return Err(Error::QuadratureNodes { nodes: self.nodes });
        }
        match self.correction_order {
            0 | 6 | 8 | 9 => Ok(()),
            order => Err(Error::SolutionCorrectionOrder { order }),
        }
    }
}

/// Frequency and shape coefficients of the averaged Hamiltonians at fixed action.
#[derive(Debug, Clone, Copy)]
pub struct SecularCoefficients {
    /// Libration frequency Omega.
    pub omega_lib: f64,
    /// Perturbation ratio nu = Omega^2 / omega^2.
    pub nu: f64,
    /// K(3/4) / pi.
    pub k_tilde: f64,
    /// E(3/4) / pi.
    pub e_tilde: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub e1: f64,
    pub e2: f64,
    /// Semi-minor axis at this action.
    pub b_axis: f64,
}

impl SecularCoefficients {
    pub fn new(action: f64, params: &ModelParams) -> Result<Self> {
        if !(action > 0.0) {
            return Err(Error::DegenerateEllipse);
        }
        let ec = specfun::constants();
        let b_axis = semi_minor(action, params);
        let omega_lib = (ec.k_minus_e * params.mu / b_axis.powi(3)).sqrt();
        let nu = (omega_lib / params.omega).powi(2);
        let e1 = 4.0 / 9.0 * (4.0 * ec.e_tilde - ec.k_tilde) / ec.k_minus_e;
        let e2 = (11.0 * ec.k_tilde - 14.0 * ec.e_tilde) / (24.0 * ec.k_minus_e);
        Ok(SecularCoefficients {
            omega_lib,
            nu,
            k_tilde: ec.k_tilde,
            e_tilde: ec.e_tilde,
            b1: 1.0
                - 2.0 / ec.k_minus_e
                    * (ec.k_tilde
                        + (ec.k_tilde * ec.k_tilde - 0.5) / ec.k_minus_e * nu)
                    * nu,
            b2: 3.0 * (1.0 + e1 * nu),
            b3: 2.0 / 3.0 * nu,
            b4: 8.0 / 3.0 * e2 * nu,
            e1,
            e2,
            b_axis,
        })
    }

    /// 3 Q / Omega, the momentum expressed on the q scale.
    pub fn p_star(&self, momentum: f64) -> f64 {
        3.0 * momentum / self.omega_lib
    }
}

/// Libration frequency Omega = sqrt((K~ - E~) mu / B^3).
pub fn libration_frequency(action: f64, params: &ModelParams) -> Result<f64> {
    Ok(SecularCoefficients::new(action, params)?.omega_lib)
}

fn shape(q: f64, momentum: f64, action: f64, params: &ModelParams) -> Result<(f64, f64, f64)> {
    if !(action > 0.0) {
        return Err(Error::DegenerateEllipse);
    }
    let b = semi_minor(action, params);
    Ok((q / (2.0 * b), momentum / (params.omega * b), b))
}

/// Order-6 averaged Hamiltonian,
/// w Phi [1 - 3 sigma^2 - nu (2 K~/(K~-E~) + (4/3) chi^2)].
pub fn hamiltonian6(q: f64, momentum: f64, action: f64, params: &ModelParams) -> Result<f64> {
    let co = SecularCoefficients::new(action, params)?;
    let (chi, sigma, _) = shape(q, momentum, action, params)?;
    Ok(params.omega
        * action
        * (1.0
            - 3.0 * sigma * sigma
            - co.nu
                * (2.0 * co.k_tilde / (co.k_tilde - co.e_tilde)
                    + 4.0 / 3.0 * chi * chi)))
}

/// Order-8 averaged Hamiltonian, w Phi (b1 - b2 sigma^2 - 2 b3 chi^2 - b4 chi^4).
pub fn hamiltonian8(q: f64, momentum: f64, action: f64, params: &ModelParams) -> Result<f64> {
    let co = SecularCoefficients::new(action, params)?;
    let (chi, sigma, _) = shape(q, momentum, action, params)?;
    let chi2 = chi * chi;
    Ok(params.omega
        * action
        * (co.b1 - co.b2 * sigma * sigma - 2.0 * co.b3 * chi2 - co.b4 * chi2 * chi2))
}

/// Orbit-frequency correction delta of the order-6 solution,
/// nu [K~/(K~-E~) + (q*^2 + p*^2)/(4 B^2)].
pub fn frequency_correction6(initial: &SecularState, params: &ModelParams) -> Result<f64> {
    let co = SecularCoefficients::new(initial.action, params)?;
    let p = co.p_star(initial.momentum);
    Ok(co.nu
        * (co.k_tilde / (co.k_tilde - co.e_tilde)
            + (initial.q * initial.q + p * p) / (4.0 * co.b_axis * co.b_axis)))
}

/// Explicit order-6 solution at time t.
pub fn solution6(initial: &SecularState, t: f64, params: &ModelParams) -> Result<SecularState> {
    let co = SecularCoefficients::new(initial.action, params)?;
    let om = co.omega_lib;
    let w = params.omega;
    let p = co.p_star(initial.momentum);
    let (s, c) = (om * t).sin_cos();
    let (s2, c2) = (2.0 * om * t).sin_cos();
    let delta = frequency_correction6(initial, params)?;
    let b2 = co.b_axis * co.b_axis;
    let q = initial.q * c - p * s;
    let momentum = initial.momentum * c + initial.q * om / 3.0 * s;
    let phi = initial.phi
        + w * (1.0 + delta) * t
        + om / w * (initial.q * initial.q - p * p) / (8.0 * b2) * s2
        + om / w * (initial.q * p) / (4.0 * b2) * (c2 - 1.0);
    Ok(SecularState { phi, q, action: initial.action, momentum })
}

/// Orbit and libration periods (T, T*) of the order-6 solution.
pub fn periods6(initial: &SecularState, params: &ModelParams) -> Result<(f64, f64)> {
    let co = SecularCoefficients::new(initial.action, params)?;
    let delta = frequency_correction6(initial, params)?;
    Ok((TAU / (params.omega * (1.0 + delta)), TAU / co.omega_lib))
}

/// First-order Lindstedt solution of the order-8 flow.
#[derive(Debug, Clone)]
pub struct LindstedtSolution {
    initial: SecularState,
    params: ModelParams,
    co: SecularCoefficients,
    p_star: f64,
    n1: f64,
}

impl LindstedtSolution {
    pub fn new(initial: &SecularState, params: &ModelParams) -> Result<Self> {
        let co = SecularCoefficients::new(initial.action, params)?;
        let p_star = co.p_star(initial.momentum);
        let b2 = co.b_axis * co.b_axis;
        let n1 = 0.5 * co.e1 * co.nu
            + 3.0 / 8.0 * co.e2 * (initial.q * initial.q + p_star * p_star) / b2;
        Ok(LindstedtSolution { initial: *initial, params: *params, co, p_star, n1 })
    }

    /// Frequency correction n1 of the rescaled time tau = (1 + n1) t.
    pub fn n1(&self) -> f64 {
        self.n1
    }

    /// Refined libration period 2 pi / ((1 + n1) Omega).
    pub fn refined_libration_period(&self) -> f64 {
        TAU / ((1.0 + self.n1) * self.co.omega_lib)
    }

    /// Center coordinates (q, Q) at time t.
    pub fn center_at(&self, t: f64) -> (f64, f64) {
        let tau = (1.0 + self.n1) * t;
        let om = self.co.omega_lib;
        let (qs, ps, qqs) = (self.initial.q, self.p_star, self.initial.momentum);
        let b2 = self.co.b_axis * self.co.b_axis;
        let (e1, e2, nu) = (self.co.e1, self.co.e2, self.co.nu);
        let (s1, c1) = (om * tau).sin_cos();
        let (s3, c3) = (3.0 * om * tau).sin_cos();

        let q0 = qs * c1 - ps * s1;
        let qq0 = qqs * c1 + qs * om / 3.0 * s1;

        let q1 = e2 * (qs * qs - 3.0 * ps * ps) / (32.0 * b2) * qs * (c3 - c1)
            + (e2 * (21.0 * qs * qs + 9.0 * ps * ps) / (32.0 * b2) - 0.5 * e1 * nu) * ps * s1
            - e2 * (3.0 * qs * qs - ps * ps) / (32.0 * b2) * ps * s3;
        let qq1 = 3.0 * e2 * (3.0 * qs * qs - ps * ps) / (32.0 * b2) * qqs * (c3 - c1)
            + (e2 * (11.0 * qs * qs + 15.0 * ps * ps) / (16.0 * b2) - e1 * nu) / 6.0
                * qs
                * om
                * s1
            + e2 * (qs * qs - 3.0 * ps * ps) / (32.0 * b2) * qs * om * s3;

        (q0 + q1, qq0 + qq1)
    }

    /// Time derivative (dq/dt, dQ/dt) of the series, for residual diagnostics.
    pub fn center_derivative_at(&self, t: f64) -> (f64, f64) {
        let n = 1.0 + self.n1;
        let tau = n * t;
        let om = self.co.omega_lib;
        let (qs, ps, qqs) = (self.initial.q, self.p_star, self.initial.momentum);
        let b2 = self.co.b_axis * self.co.b_axis;
        let (e1, e2, nu) = (self.co.e1, self.co.e2, self.co.nu);
        let (s1, c1) = (om * tau).sin_cos();
        let (s3, c3) = (3.0 * om * tau).sin_cos();

        let dq0 = -om * qs * s1 - om * ps * c1;
        let dqq0 = -om * qqs * s1 + qs * om * om / 3.0 * c1;

        let dq1 = e2 * (qs * qs - 3.0 * ps * ps) / (32.0 * b2) * qs * om * (-3.0 * s3 + s1)
            + (e2 * (21.0 * qs * qs + 9.0 * ps * ps) / (32.0 * b2) - 0.5 * e1 * nu)
                * ps
                * om
                * c1
            - e2 * (3.0 * qs * qs - ps * ps) / (32.0 * b2) * ps * 3.0 * om * c3;
        let dqq1 = 3.0 * e2 * (3.0 * qs * qs - ps * ps) / (32.0 * b2)
            * qqs
            * om
            * (-3.0 * s3 + s1)
            + (e2 * (11.0 * qs * qs + 15.0 * ps * ps) / (16.0 * b2) - e1 * nu) / 6.0
                * qs
                * om
                * om
                * c1
            + e2 * (qs * qs - 3.0 * ps * ps) / (32.0 * b2) * qs * 3.0 * om * om * c3;

        (n * (dq0 + dq1), n * (dqq0 + dqq1))
    }

    /// Full states on an ascending grid starting at t >= 0; the phase is
    /// obtained by integrating the order-8 phase rate along the series.
    pub fn sample(&self, ts: &[f64]) -> Result<Vec<SecularState>> {
        if ts.is_empty() {
            return Ok(Vec::new());
        }
        let t_end = *ts.last().unwrap();
        let cfg = SecularConfig::with_mode(AveragingMode::Series8);
        let me = self.clone();
        let params = self.params;
        let action = self.initial.action;
        let opts = OdeOptions { rtol: 1e-12, atol: 1e-12, dense: true, ..Default::default() };
        let sol = ode::solve(
            move |t, _y: &[f64; 1]| {
                let (q, momentum) = me.center_at(t);
                Ok([phase_rate(q, momentum, action, &params, &cfg)?])
            },
            (0.0, t_end),
            [self.initial.phi],
            &opts,
        )?;
        ts.iter()
            .map(|&t| {
                let (q, momentum) = self.center_at(t);
                let phi = if t_end == 0.0 { self.initial.phi } else { sol.sample(t)?[0] };
                Ok(SecularState { phi, q, action, momentum })
            })
            .collect()
    }

    /// Convenience single-time evaluation.
    pub fn state_at(&self, t: f64) -> Result<SecularState> {
        Ok(self.sample(&[t])?.pop().unwrap())
    }
}

/// Averages of the exact perturbation over the fast phase, by periodic
/// trapezoid quadrature with automatic node doubling.
struct QuadratureAverages {
    /// <1/rho>
    inv_rho: f64,
    /// <(sin phi + 2 sigma)/rho^3>
    s_term: f64,
    /// <(cos phi + chi)/rho^3>
    c_term: f64,
    /// <(2 sigma sin phi + 4 chi cos phi + 4 sigma^2 + 4 chi^2)/rho^3>
    phi_term: f64,
}

fn quadrature_averages(chi: f64, sigma: f64, nodes: usize) -> Result<QuadratureAverages> {
    const RHO_FLOOR: f64 = 1e-9;
    let pass = |n: usize| -> Result<[f64; 4]> {
        let mut acc = [0.0; 4];
        for j in 0..n {
            let phi = TAU * j as f64 / n as f64;
            let (s, c) = phi.sin_cos();
            let u = s + 2.0 * sigma;
            let v = 2.0 * c + 2.0 * chi;
            let rho = (u * u + v * v).sqrt();
            if rho < RHO_FLOOR {
                return Err(Error::AveragingSingular { phi, rho });
            }
            let inv = 1.0 / rho;
            let inv3 = inv * inv * inv;
            acc[0] += inv;
            acc[1] += (s + 2.0 * sigma) * inv3;
            acc[2] += (c + chi) * inv3;
            acc[3] += (2.0 * sigma * s + 4.0 * chi * c
                + 4.0 * sigma * sigma
                + 4.0 * chi * chi)
                * inv3;
        }
        Ok(acc.map(|a| a / n as f64))
    };

    let mut n = nodes.max(64);
    let mut prev = pass(n)?;
    loop {
        n *= 2;
        let next = pass(n)?;
        let stable = prev
            .iter()
            .zip(next.iter())
            .all(|(a, b)| (a - b).abs() < 1e-12 * (1.0 + b.abs()));
        if stable || n >= 16384 {
            return Ok(QuadratureAverages {
                inv_rho: next[0],
                s_term: next[1],
                c_term: next[2],
                phi_term: next[3],
            });
        }
        prev = next;
    }
}

/// Averaged center equations (dq/dt, dQ/dt) in the configured mode.
pub fn secular_rhs(
    q: f64,
    momentum: f64,
    action: f64,
    params: &ModelParams,
    config: &SecularConfig,
) -> Result<(f64, f64)> {
    config.validate()?;
    let co = SecularCoefficients::new(action, params)?;
    let w = params.omega;
    match config.mode {
        AveragingMode::Closed6 => {
            Ok((-3.0 * momentum, co.omega_lib * co.omega_lib / 3.0 * q))
        }
        AveragingMode::Series8 => Ok((
            -co.b2 * momentum,
            w * w / 4.0 * q * (2.0 * co.b3 + w * co.b4 * q * q / (4.0 * action)),
        )),
        AveragingMode::QuadratureAugmented => {
            let (chi, sigma, b) = shape(q, momentum, action, params)?;
            let avg = quadrature_averages(chi, sigma, config.nodes)?;
            Ok((
                -3.0 * momentum + 2.0 * params.mu / (w * b * b) * avg.s_term,
                -2.0 * params.mu / (b * b) * avg.c_term,
            ))
        }
    }
}

/// Phase rate d phi/dt = dK/dPhi along the averaged flow.
pub fn phase_rate(
    q: f64,
    momentum: f64,
    action: f64,
    params: &ModelParams,
    config: &SecularConfig,
) -> Result<f64> {
    config.validate()?;
    let co = SecularCoefficients::new(action, params)?;
    let (chi, sigma, b) = shape(q, momentum, action, params)?;
    let w = params.omega;
    let kme = co.k_tilde - co.e_tilde;
    match config.mode {
        AveragingMode::Closed6 => {
            Ok(w * (1.0 + co.k_tilde / kme * co.nu + 2.0 * co.nu * chi * chi))
        }
        AveragingMode::Series8 => {
            let chi2 = chi * chi;
            Ok(w * (1.0
                + co.k_tilde / kme * co.nu
                + 4.0 * (co.k_tilde * co.k_tilde - 0.5) / (kme * kme) * co.nu * co.nu
                + 4.5 * co.e1 * co.nu * sigma * sigma
                + 2.0 * co.nu * chi2
                + 20.0 / 3.0 * co.e2 * co.nu * chi2 * chi2))
        }
        AveragingMode::QuadratureAugmented => {
            let avg = quadrature_averages(chi, sigma, config.nodes)?;
            let scale = params.mu / (w * b * b * b);
            Ok(w + scale * (avg.inv_rho - avg.phi_term))
        }
    }
}

/// Averaged energy in the configured mode; constant along its own flow.
pub fn averaged_hamiltonian(
    q: f64,
    momentum: f64,
    action: f64,
    params: &ModelParams,
    config: &SecularConfig,
) -> Result<f64> {
    config.validate()?;
    match config.mode {
        AveragingMode::Closed6 => hamiltonian6(q, momentum, action, params),
        AveragingMode::Series8 => hamiltonian8(q, momentum, action, params),
        AveragingMode::QuadratureAugmented => {
            let (chi, sigma, b) = shape(q, momentum, action, params)?;
            let avg = quadrature_averages(chi, sigma, config.nodes)?;
            Ok(params.omega * action * (1.0 - 3.0 * sigma * sigma)
                - params.mu / b * avg.inv_rho)
        }
    }
}

/// Time series of mean states from a numerical integration of the averaged flow.
#[derive(Debug, Clone)]
pub struct SecularTrajectory {
    pub action: f64,
    solution: OdeSolution<3>,
}

impl SecularTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.solution.ts
    }

    pub fn states(&self) -> Vec<SecularState> {
        self.solution
            .ts
            .iter()
            .zip(self.solution.ys.iter())
            .map(|(_t, y)| SecularState::new(y[2], y[0], self.action, y[1]))
            .collect()
    }

    pub fn final_state(&self) -> SecularState {
        let y = self.solution.final_state();
        SecularState::new(y[2], y[0], self.action, y[1])
    }

    pub fn sample(&self, t: f64) -> Result<SecularState> {
        let y = self.solution.sample(t)?;
        Ok(SecularState::new(y[2], y[0], self.action, y[1]))
    }

    pub fn n_accepted(&self) -> usize {
        self.solution.n_accepted
    }

    pub fn mean_step(&self) -> f64 {
        self.solution.mean_step()
    }
}

/// Integrate (q, Q, phi) with the configured averaged right-hand side.
/// The action is a parameter of the flow, not an integrated variable.
pub fn secular_propagate(
    initial: &SecularState,
    t_end: f64,
    config: &SecularConfig,
    opts: &OdeOptions,
    params: &ModelParams,
) -> Result<SecularTrajectory> {
    config.validate()?;
    let action = initial.action;
    let params = *params;
    let config = *config;
    let solution = ode::solve(
        move |_t, y: &[f64; 3]| {
            let (dq, dmom) = secular_rhs(y[0], y[1], action, &params, &config)?;
            let dphi = phase_rate(y[0], y[1], action, &params, &config)?;
            Ok([dq, dmom, dphi])
        },
        (0.0, t_end),
        [initial.q, initial.momentum, initial.phi],
        opts,
    )?;
    Ok(SecularTrajectory { action, solution })
}

/// Libration period of the averaged flow: the time for (q, 3Q/Omega) to wind
/// once around the origin, located by bisection on dense output.
pub fn libration_period(
    initial: &SecularState,
    config: &SecularConfig,
    params: &ModelParams,
) -> Result<f64> {
    config.validate()?;
    let co = SecularCoefficients::new(initial.action, params)?;
    let kappa = 3.0 / co.omega_lib;
    let amp = initial.q.hypot(kappa * initial.momentum);
    if amp < 1e-9 * co.b_axis {
        // No libration to time; the fixed point has the formula period.
        return Ok(TAU / co.omega_lib);
    }
    let t_guess = TAU / co.omega_lib;
    let t_max = 4.0 * t_guess;
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-12, dense: true, ..Default::default() };
    let traj = secular_propagate(initial, t_max, config, &opts, params)?;

    let angle_of = |st: &SecularState| (kappa * st.momentum).atan2(st.q);
    let theta0 = angle_of(initial);
    // Unwrap on a grid fine enough that successive points wind < pi.
    let n = 8192;
    let mut prev_theta = theta0;
    let mut winding = 0.0;
    let mut t_prev = 0.0;
    for i in 1..=n {
        let t = t_max * i as f64 / n as f64;
        let st = traj.sample(t)?;
        let theta = angle_of(&st);
        let mut dtheta = theta - prev_theta;
        while dtheta > PI {
            dtheta -= TAU;
        }
        while dtheta < -PI {
            dtheta += TAU;
        }
        let new_winding = winding + dtheta;
        if new_winding.abs() >= TAU {
            // Bisect inside [t_prev, t] for |winding| = 2 pi.
            let target = TAU * new_winding.signum();
            let mut lo = t_prev;
            let mut hi = t;
            let mut w_lo = winding;
            let mut th_lo = prev_theta;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let st_mid = traj.sample(mid)?;
                let th_mid = angle_of(&st_mid);
                let mut d = th_mid - th_lo;
                while d > PI {
                    d -= TAU;
                }
                while d < -PI {
                    d += TAU;
                }
                let w_mid = w_lo + d;
                if (w_mid - target) * new_winding.signum() >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    w_lo = w_mid;
                    th_lo = th_mid;
                }
                if hi - lo < 1e-10 * t_guess {
                    break;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        winding = new_winding;
        prev_theta = theta;
        t_prev = t;
    }
    Err(Error::PeriodNotFound { t_max })
}

/// Energies of the order-8 Hamiltonian on a rectangular (q, Q) grid at fixed
/// action, row-major with q on the outer loop.
#[derive(Debug, Clone)]
pub struct ContourGrid {
    pub q: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
}

pub fn contour_grid(
    action: f64,
    q_range: (f64, f64),
    momentum_range: (f64, f64),
    resolution: (usize, usize),
    params: &ModelParams,
) -> Result<ContourGrid> {
    let (nq, nm) = (resolution.0.max(2), resolution.1.max(2));
    let q: Vec<f64> = (0..nq)
        .map(|i| q_range.0 + (q_range.1 - q_range.0) * i as f64 / (nq - 1) as f64)
        .collect();
    let momentum: Vec<f64> = (0..nm)
        .map(|i| {
            momentum_range.0 + (momentum_range.1 - momentum_range.0) * i as f64 / (nm - 1) as f64
        })
        .collect();
    let mut energy = Vec::with_capacity(nq * nm);
    for &qi in &q {
        for &mi in &momentum {
            energy.push(hamiltonian8(qi, mi, action, params)?);
        }
    }
    Ok(ContourGrid { q, momentum, energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> ModelParams {
        ModelParams::default()
    }

    fn case(i: usize) -> SecularState {
        // Table-1 elements used directly as mean elements.
        match i {
            1 => SecularState::new(0.00999966668666524, 0.0, 50.005, 0.0),
            2 => SecularState::new(0.010525927031747073, 1.0, 45.13, 0.0),
            3 => SecularState::new(0.021049522136499797, -9.0, 45.145, -0.1),
            _ => unreachable!(),
        }
    }

    #[test]
    fn table_one_periods() {
        let p = unit();
        let expected = [
            (1, 6.27888, 362.215),
            (2, 6.27815, 335.394),
            (3, 6.27611, 335.477),
        ];
        for (i, t, ts) in expected {
            let (t_comp, ts_comp) = periods6(&case(i), &p).unwrap();
            assert!(
                ((t_comp - t) / t).abs() < 1e-5,
                "case {i}: T = {t_comp} vs {t}"
            );
            assert!(
                ((ts_comp - ts) / ts).abs() < 1e-5,
                "case {i}: T* = {ts_comp} vs {ts}"
            );
        }
        // Case-3 frequency correction, from the oracle elliptic constants.
        let delta = frequency_correction6(&case(3), &unit()).unwrap();
        assert_relative_eq!(delta, 1.127966959e-3, max_relative = 1e-8);
    }

    #[test]
    fn libration_frequency_power_law() {
        let p = unit();
        // Doubling B (action x4) scales Omega by 2^(-3/2).
        let om1 = libration_frequency(10.0, &p).unwrap();
        let om2 = libration_frequency(40.0, &p).unwrap();
        assert_relative_eq!(om2 / om1, 2.0_f64.powf(-1.5), epsilon = 1e-14);
        assert!(libration_frequency(0.0, &p).is_err());
        // The frequency correction vanishes for huge ellipses, so the orbit
        // period approaches 2 pi / omega; the libration period stays finite.
        let far = SecularState::new(0.0, 0.0, 1e9, 0.0);
        let (t, ts) = periods6(&far, &p).unwrap();
        assert_relative_eq!(t, TAU / p.omega, max_relative = 1e-9);
        assert!(ts.is_finite() && ts > 0.0);
    }

    #[test]
    fn hamiltonian6_fixed_point_value() {
        let p = unit();
        let action = 45.0;
        let b = semi_minor(action, &p);
        let ec = specfun::constants();
        let expected = p.omega * action * (1.0 - 2.0 * ec.k_tilde * p.mu / (b.powi(3)));
        assert_relative_eq!(hamiltonian6(0.0, 0.0, action, &p).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn solution6_conserves_energy_and_solves_ode() {
        let p = unit();
        let st0 = case(3);
        let h0 = hamiltonian6(st0.q, st0.momentum, st0.action, &p).unwrap();
        let mut prev = *&st0;
        for i in 1..=200 {
            let t = 400.0 * i as f64 / 200.0;
            let st = solution6(&st0, t, &p).unwrap();
            assert_eq!(st.action, st0.action);
            let h = hamiltonian6(st.q, st.momentum, st.action, &p).unwrap();
            assert_relative_eq!(h, h0, max_relative = 1e-12);
            prev = st;
        }
        let _ = prev;
        // Finite-difference check that solution6 solves dq = -3Q, dQ = Omega^2 q / 3.
        let cfg = SecularConfig::with_mode(AveragingMode::Closed6);
        let h = 1e-4;
        for &t in &[3.0, 57.0, 190.0] {
            let sp = solution6(&st0, t + h, &p).unwrap();
            let sm = solution6(&st0, t - h, &p).unwrap();
            let s = solution6(&st0, t, &p).unwrap();
            let (dq, dmom) = secular_rhs(s.q, s.momentum, s.action, &p, &cfg).unwrap();
            let dphi = phase_rate(s.q, s.momentum, s.action, &p, &cfg).unwrap();
            assert_relative_eq!((sp.q - sm.q) / (2.0 * h), dq, epsilon = 1e-6, max_relative = 1e-6);
            assert_relative_eq!(
                (sp.momentum - sm.momentum) / (2.0 * h),
                dmom,
                epsilon = 1e-6,
                max_relative = 1e-6
            );
            assert_relative_eq!(
                (sp.phi - sm.phi) / (2.0 * h),
                dphi,
                epsilon = 1e-6,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn centered_solution_phase_rate() {
        // q* = Q* = 0: the phase grows at w (1 + K~ mu / (w^2 B^3)).
        let p = unit();
        let st = case(1);
        let hit = solution6(&st, 10.0, &p).unwrap();
        let ec = specfun::constants();
        let b = semi_minor(st.action, &p);
        let rate = 1.0 + ec.k_tilde * p.mu / (p.omega * p.omega * b.powi(3));
        assert_relative_eq!(hit.q, 0.0, epsilon = 1e-13);
        assert_relative_eq!(hit.momentum, 0.0, epsilon = 1e-13);
        assert_relative_eq!((hit.phi - st.phi) / 10.0, rate, max_relative = 1e-12);
    }

    #[test]
    fn b_coefficients_signs_and_boundary() {
        let p = unit();
        for action in [1.0, 5.0, 45.0, 500.0] {
            let co = SecularCoefficients::new(action, &p).unwrap();
            assert!(co.b2 > 0.0 && co.b3 > 0.0 && co.b4 > 0.0);
        }
        // e-coefficients from the oracle constants.
        let co = SecularCoefficients::new(45.0, &p).unwrap();
        assert_relative_eq!(co.e1, 1.2634459149648871, max_relative = 1e-13);
        assert_relative_eq!(co.e2, 0.2982186121387085, max_relative = 1e-13);
        // b1 = 0 at nu ~ 0.226: bisect b1 as a function of nu.
        let ec = specfun::constants();
        let b1_of = |nu: f64| {
            1.0 - 2.0 / ec.k_minus_e
                * (ec.k_tilde + (ec.k_tilde * ec.k_tilde - 0.5) / ec.k_minus_e * nu)
                * nu
        };
        let (mut lo, mut hi) = (0.1, 0.5);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if b1_of(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.226).abs() < 5e-4, "b1 root at {lo}");
    }

    #[test]
    fn hamiltonian8_reduces_to_hamiltonian6() {
        // At chi = sigma = 0 the difference is the nu^2 part of b1.
        let p = unit();
        let action = 45.0;
        let co = SecularCoefficients::new(action, &p).unwrap();
        let h6 = hamiltonian6(0.0, 0.0, action, &p).unwrap();
        let h8 = hamiltonian8(0.0, 0.0, action, &p).unwrap();
        let extra = -p.omega
            * action
            * (2.0 * (co.k_tilde * co.k_tilde - 0.5)
                / ((co.k_tilde - co.e_tilde) * (co.k_tilde - co.e_tilde)))
            * co.nu
            * co.nu;
        assert_relative_eq!(h8 - h6, extra, max_relative = 1e-10);
    }

    #[test]
    fn rhs_origin_is_fixed_point_every_mode() {
        let p = unit();
        for mode in [
            AveragingMode::Closed6,
            AveragingMode::Series8,
            AveragingMode::QuadratureAugmented,
        ] {
            let cfg = SecularConfig::with_mode(mode);
            let (dq, dmom) = secular_rhs(0.0, 0.0, 45.0, &p, &cfg).unwrap();
            assert!(dq.abs() < 1e-13 && dmom.abs() < 1e-13, "{mode:?}: ({dq}, {dmom})");
        }
    }

    #[test]
    fn rhs_origin_eigenvalues() {
        // Jacobian at the origin: +/- i Omega for closed6, +/- i w sqrt(b2 b3 / 2)
        // for series8, and within O(nu) of Omega for the quadrature mode.
        let p = unit();
        let action = 45.0;
        let co = SecularCoefficients::new(action, &p).unwrap();
        let h = 1e-6;
        for mode in [
            AveragingMode::Closed6,
            AveragingMode::Series8,
            AveragingMode::QuadratureAugmented,
        ] {
            let cfg = SecularConfig::with_mode(mode);
            let (a11, a12) = {
                let (d1, _) = secular_rhs(h, 0.0, action, &p, &cfg).unwrap();
                let (d2, _) = secular_rhs(-h, 0.0, action, &p, &cfg).unwrap();
                let (d3, _) = secular_rhs(0.0, h, action, &p, &cfg).unwrap();
                let (d4, _) = secular_rhs(0.0, -h, action, &p, &cfg).unwrap();
                ((d1 - d2) / (2.0 * h), (d3 - d4) / (2.0 * h))
            };
            let (a21, a22) = {
                let (_, d1) = secular_rhs(h, 0.0, action, &p, &cfg).unwrap();
                let (_, d2) = secular_rhs(-h, 0.0, action, &p, &cfg).unwrap();
                let (_, d3) = secular_rhs(0.0, h, action, &p, &cfg).unwrap();
                let (_, d4) = secular_rhs(0.0, -h, action, &p, &cfg).unwrap();
                ((d1 - d2) / (2.0 * h), (d3 - d4) / (2.0 * h))
            };
            // Purely rotational structure: zero trace, positive determinant.
            assert!(a11.abs() < 1e-7 && a22.abs() < 1e-7, "{mode:?}");
            let det = a11 * a22 - a12 * a21;
            assert!(det > 0.0, "{mode:?}: det {det}");
            let freq = det.sqrt();
            match mode {
                AveragingMode::Closed6 => {
                    assert_relative_eq!(freq, co.omega_lib, max_relative = 1e-6)
                }
                AveragingMode::Series8 => {
                    let expected = p.omega * (co.b2 * co.b3 / 2.0).sqrt();
                    assert_relative_eq!(freq, expected, max_relative = 1e-6);
                }
                AveragingMode::QuadratureAugmented => {
                    assert_relative_eq!(freq, co.omega_lib, max_relative = 0.05);
                }
            }
        }
    }

    #[test]
    fn series8_reduces_to_closed6_at_small_amplitude() {
        let p = unit();
        let action = 45.0;
        let co = SecularCoefficients::new(action, &p).unwrap();
        let c6 = SecularConfig::with_mode(AveragingMode::Closed6);
        let c8 = SecularConfig::with_mode(AveragingMode::Series8);
        for &(q, m) in &[(0.01, 0.001), (0.1, 0.01), (0.5, 0.02)] {
            let (dq6, dm6) = secular_rhs(q, m, action, &p, &c6).unwrap();
            let (dq8, dm8) = secular_rhs(q, m, action, &p, &c8).unwrap();
            let chi = q / (2.0 * co.b_axis);
            let bound = 5.0 * (chi * chi + co.nu);
            assert!(((dq8 - dq6) / dq6).abs() <= bound, "dq: {dq8} vs {dq6}");
            assert!(((dm8 - dm6) / dm6).abs() <= bound, "dQ: {dm8} vs {dm6}");
        }
    }

    #[test]
    fn rhs_and_phase_rate_are_hamiltonian_gradients() {
        // dq/dt = dK/dQ, dQ/dt = -dK/dq, dphi/dt = dK/dPhi for every mode,
        // checked against central differences of the averaged energy. This
        // pins the differentiation under the quadrature and the nu-chain
        // rule of the order-8 phase rate.
        let p = ModelParams::new(1.3, 0.8).unwrap();
        let (q, momentum, action) = (-4.0, -0.07, 38.0);
        let h = 1e-5;
        for mode in [
            AveragingMode::Closed6,
            AveragingMode::Series8,
            AveragingMode::QuadratureAugmented,
        ] {
            let cfg = SecularConfig::with_mode(mode);
            let k = |q: f64, mom: f64, act: f64| {
                averaged_hamiltonian(q, mom, act, &p, &cfg).unwrap()
            };
            let (dq, dmom) = secular_rhs(q, momentum, action, &p, &cfg).unwrap();
            let dphi = phase_rate(q, momentum, action, &p, &cfg).unwrap();
            let dk_dmom = (k(q, momentum + h, action) - k(q, momentum - h, action)) / (2.0 * h);
            let dk_dq = (k(q + h, momentum, action) - k(q - h, momentum, action)) / (2.0 * h);
            let dk_dact = (k(q, momentum, action + h) - k(q, momentum, action - h)) / (2.0 * h);
            assert_relative_eq!(dq, dk_dmom, epsilon = 1e-7, max_relative = 1e-7);
            assert_relative_eq!(dmom, -dk_dq, epsilon = 1e-7, max_relative = 1e-7);
            assert_relative_eq!(dphi, dk_dact, epsilon = 1e-7, max_relative = 1e-7);
        }
    }

    #[test]
    fn quadrature_config_validation() {
        let mut cfg = SecularConfig::with_mode(AveragingMode::QuadratureAugmented);
        cfg.nodes = 32;
        assert!(matches!(cfg.validate(), Err(Error::QuadratureNodes { nodes: 32 })));
        let mut cfg = SecularConfig::default();
        cfg.correction_order = 7;
        assert!(matches!(cfg.validate(), Err(Error::SolutionCorrectionOrder { order: 7 })));
    }

    #[test]
    fn quadrature_singular_configuration_rejected() {
        // chi = -cos(phi), sigma = -sin(phi)/2 at some node puts rho at zero.
        let res = quadrature_averages(1.0, 0.0, 256);
        assert!(matches!(res, Err(Error::AveragingSingular { .. })));
    }

    #[test]
    fn secular_propagate_matches_solution6() {
        let p = unit();
        let st0 = case(3);
        let cfg = SecularConfig::with_mode(AveragingMode::Closed6);
        let opts = OdeOptions { rtol: 1e-13, atol: 1e-13, dense: true, ..Default::default() };
        let traj = secular_propagate(&st0, 300.0, &cfg, &opts, &p).unwrap();
        for &t in &[0.0, 50.0, 123.4, 300.0] {
            let numeric = traj.sample(t).unwrap();
            let analytic = solution6(&st0, t, &p).unwrap();
            assert_relative_eq!(numeric.q, analytic.q, epsilon = 1e-9);
            assert_relative_eq!(numeric.momentum, analytic.momentum, epsilon = 1e-10);
            assert_relative_eq!(numeric.phi, analytic.phi, epsilon = 1e-8);
            assert_eq!(numeric.action, st0.action);
        }
    }

    #[test]
    fn averaged_energy_conserved_along_own_flow() {
        let p = unit();
        let st0 = case(3);
        let opts = OdeOptions { rtol: 1e-13, atol: 1e-13, dense: true, ..Default::default() };
        for mode in [
            AveragingMode::Closed6,
            AveragingMode::Series8,
            AveragingMode::QuadratureAugmented,
        ] {
            let cfg = SecularConfig::with_mode(mode);
            let h0 =
                averaged_hamiltonian(st0.q, st0.momentum, st0.action, &p, &cfg).unwrap();
            let traj = secular_propagate(&st0, 250.0, &cfg, &opts, &p).unwrap();
            for st in traj.states().iter().step_by(3) {
                let h =
                    averaged_hamiltonian(st.q, st.momentum, st.action, &p, &cfg).unwrap();
                assert!(
                    ((h - h0) / h0).abs() < 1e-11,
                    "{mode:?}: drift {}",
                    ((h - h0) / h0).abs()
                );
            }
        }
    }

    #[test]
    fn lindstedt_degenerate_amplitude() {
        let p = unit();
        let st = case(1);
        let lin = LindstedtSolution::new(&st, &p).unwrap();
        let co = SecularCoefficients::new(st.action, &p).unwrap();
        assert_relative_eq!(lin.n1(), 0.5 * co.e1 * co.nu, epsilon = 1e-15);
        let (q, m) = lin.center_at(123.0);
        assert!(q.abs() < 1e-13 && m.abs() < 1e-13);
    }

    #[test]
    fn lindstedt_case3_refined_period() {
        // Raw Table-1 elements as primes: T*8 = 236.53 (the printed estimate
        // 236.66 corresponds to prime-converted elements; both within 2%).
        let p = unit();
        let lin = LindstedtSolution::new(&case(3), &p).unwrap();
        let t8 = lin.refined_libration_period();
        assert_relative_eq!(t8, 236.529168682, max_relative = 1e-9);
        assert!(((t8 - 236.66) / 236.66).abs() < 0.02);
    }

    #[test]
    fn lindstedt_residual_empirical_order() {
        // Scaling (q*, p*) by s in {1, 1/2, 1/4} shrinks the order-8 ODE
        // residual with empirical order >= 3.
        let p = unit();
        let action = 45.145;
        let co = SecularCoefficients::new(action, &p).unwrap();
        let cfg = SecularConfig::with_mode(AveragingMode::Series8);
        let residual = |scale: f64| -> f64 {
            let st = SecularState::new(0.0, -9.0 * scale, action, -0.1 * scale);
            let lin = LindstedtSolution::new(&st, &p).unwrap();
            let period = lin.refined_libration_period();
            let mut worst: f64 = 0.0;
            for i in 0..400 {
                let t = period * i as f64 / 399.0;
                let (q, m) = lin.center_at(t);
                let (dq, dm) = lin.center_derivative_at(t);
                let (fq, fm) = secular_rhs(q, m, action, &p, &cfg).unwrap();
                let r = (dq - fq).abs() / co.b_axis + (dm - fm).abs() / co.b_axis;
                worst = worst.max(r);
            }
            worst
        };
        let r1 = residual(1.0);
        let r2 = residual(0.5);
        let r3 = residual(0.25);
        let o12 = (r1 / r2).log2();
        let o23 = (r2 / r3).log2();
        assert!(o12 >= 3.0, "order {o12} between s=1 and s=1/2");
        assert!(o23 >= 3.0, "order {o23} between s=1/2 and s=1/4");
    }

    #[test]
    fn quadrature_libration_period_case3() {
        let p = unit();
        let cfg = SecularConfig::with_mode(AveragingMode::QuadratureAugmented);
        let t = libration_period(&case(3), &cfg, &p).unwrap();
        assert!(((t - 232.5) / 232.5).abs() < 0.01, "T* = {t}");
    }

    #[test]
    fn closed6_libration_period_matches_formula() {
        let p = unit();
        let cfg = SecularConfig::with_mode(AveragingMode::Closed6);
        let t = libration_period(&case(3), &cfg, &p).unwrap();
        let (_, ts) = periods6(&case(3), &p).unwrap();
        assert_relative_eq!(t, ts, max_relative = 1e-8);
    }

    #[test]
    fn secular_steps_much_larger_than_truth_steps() {
        use crate::dynamics::{self, CartesianState, IntegratorConfig};
        let p = unit();
        let st0 = case(1);
        let cfg = SecularConfig::with_mode(AveragingMode::Closed6);
        let opts = OdeOptions::with_tol(1e-12);
        let sec = secular_propagate(&st0, 362.215, &cfg, &opts, &p).unwrap();
        let truth = dynamics::flow(
            &CartesianState::new(0.0, 0.1, 20.0, -10.0, -0.1),
            362.215,
            &IntegratorConfig::with_tol(1e-12),
            &p,
        )
        .unwrap();
        let ratio = sec.mean_step() / truth.mean_step();
        assert!(ratio >= 50.0, "step ratio {ratio}");
    }

    #[test]
    fn contour_grid_symmetry_and_maximum() {
        let p = unit();
        let g = contour_grid(45.0, (-20.0, 20.0), (-0.5, 0.5), (41, 21), &p).unwrap();
        let nm = g.momentum.len();
        let idx = |i: usize, j: usize| i * nm + j;
        // Even in q and Q.
        for i in 0..g.q.len() {
            for j in 0..nm {
                let flipped = idx(g.q.len() - 1 - i, nm - 1 - j);
                assert_relative_eq!(g.energy[idx(i, j)], g.energy[flipped], max_relative = 1e-12);
            }
        }
        // Global maximum at the center point (b1 > 0 regime).
        let center = idx(20, 10);
        assert_relative_eq!(g.q[20], 0.0, epsilon = 1e-12);
        let emax = g.energy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(g.energy[center], emax, max_relative = 1e-14);
    }
}

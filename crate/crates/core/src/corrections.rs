//! Short-period corrections of the averaging transformation, orders 4..9.
//!
//! The direct map adds the periodic terms xi_{0,m}, evaluated at mean (prime)
//! variables, to recover osculating variables; the inverse map adds the
//! xi'_{0,m}, evaluated at osculating variables, to produce mean variables.
//! Terms vanish below order 4. Up to order 9 the inverse terms are the
//! negatives of the direct ones except for five listed overrides.
//!
//! Abbreviations follow the source formulas: c = cos phi, s = sin phi,
//! Delta = sqrt(1 + 3 c^2), F~ and E~ the detrended incomplete integrals at
//! m = 3/4, K~ = K(3/4)/pi and E~ = E(3/4)/pi the constants.

use crate::dynamics::CartesianState;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::reduce::{semi_minor, to_reduced, ReducedState};
use crate::specfun;
use std::f64::consts::PI;

/// Highest correction order that has been computed.
pub const MAX_ORDER: usize = 9;

/// Continuous pi-periodic branch of phi + atan(2 cot phi).
///
/// Principal-value evaluation jumps by pi at phi = k pi; the combination is
/// made continuous (value pi/2 at the junctions) so that the order-8 phase
/// term is genuinely periodic.
fn continuous_atan_bracket(phi: f64) -> f64 {
    let u = phi.rem_euclid(PI);
    u + (2.0 * u.cos()).atan2(u.sin())
}

struct Ctx {
    chi: f64,
    sigma: f64,
    c: f64,
    s: f64,
    /// Delta and its reciprocal powers.
    d: f64,
    id: f64,
    /// Periodic detrended integrals at phi.
    ft: f64,
    et: f64,
    /// Constants K(3/4)/pi, E(3/4)/pi.
    kt: f64,
    ec: f64,
    /// Perturbation ratio mu / (omega^2 B^3).
    eps: f64,
    /// Dimension-carrying prefactors for each variable.
    f_phi: f64,
    f_q: f64,
    f_act: f64,
    f_mom: f64,
    phi: f64,
}

impl Ctx {
    fn new(state: &ReducedState, params: &ModelParams) -> Result<Self> {
        let phi = state.phase()?;
        if !(state.action > 0.0) {
            return Err(Error::DegenerateEllipse);
        }
        let b = semi_minor(state.action, params);
        let (s, c) = phi.sin_cos();
        let d = specfun::delta(phi);
        let consts = specfun::constants();
        let (mu, w) = (params.mu, params.omega);
        Ok(Ctx {
            chi: state.q / (2.0 * b),
            sigma: state.momentum / (w * b),
            c,
            s,
            d,
            id: 1.0 / d,
            ft: specfun::tilde_f(phi),
            et: specfun::tilde_e(phi),
            kt: consts.k_tilde,
            ec: consts.e_tilde,
            eps: mu / (w * w * b * b * b),
            f_phi: mu / (w * w * b * b * b),
            f_q: mu / (w * w * b * b),
            f_act: mu / (w * b),
            f_mom: mu / (w * b * b),
            phi,
        })
    }
}

/// One order's contribution (d_phi, d_q, d_Phi, d_Q) of the direct map,
/// evaluated at the given (mean) variables.
pub fn direct_term(order: usize, state: &ReducedState, params: &ModelParams) -> Result<[f64; 4]> {
    if order > MAX_ORDER {
        return Err(Error::CorrectionOrder { order });
    }
    let x = Ctx::new(state, params)?;
    Ok(term(order, &x))
}

fn term(m: usize, x: &Ctx) -> [f64; 4] {
    let Ctx { chi, sigma, c, s, d, id, ft, et, kt, ec, eps, f_phi, f_q, f_act, f_mom, phi } = *x;
    let c2 = c * c;
    let c4 = c2 * c2;
    let c6 = c4 * c2;
    let id2 = id * id;
    let id3 = id2 * id;
    let id5 = id3 * id2;
    let id7 = id5 * id2;
    let chi2 = chi * chi;
    let chi4 = chi2 * chi2;
    let sig2 = sigma * sigma;
    match m {
        0..=3 => [0.0; 4],
        4 => [-f_phi * 0.5 * ft, 0.0, f_act * (id - kt), 0.0],
        5 => [
            -f_phi * 2.0 * id * chi * s,
            0.0,
            -f_act * 4.0 * id3 * chi * c,
            -f_mom * 0.5 * id * s,
        ],
        6 => [
            f_phi
                * (4.0 * id * sigma * c
                    + chi2 * (et - ft + 1.5 * id3 * (5.0 + 3.0 * c2) * s * c)),
            -f_q * 2.0 * id * c,
            f_act
                * (chi2 * (2.0 / 3.0 * (ec - kt) - 2.0 * id5 * (1.0 - 9.0 * c2))
                    - 2.0 * id3 * sigma * s),
            f_mom * chi * ((et - ft) / 3.0 + 0.5 * id3 * (5.0 + 3.0 * c2) * s * c),
        ],
        7 => [
            f_phi
                * chi
                * (8.0 * sigma * (id3 - ec)
                    + chi2 / 3.0 * id5 * (4.0 - 112.0 * c2 - 84.0 * c4) * s),
            -f_q * 8.0 / 3.0 * chi * (id3 - ec),
            f_act * 4.0 * id5 * chi * (6.0 * sigma * s - chi2 * id2 * (6.0 - 22.0 * c2)) * c,
            f_mom
                * (4.0 / 3.0 * sigma * (id3 - ec)
                    + chi2 * 0.5 * id5 * (1.0 - 28.0 * c2 - 21.0 * c4) * s),
        ],
        8 => {
            let poly8 = 67.0 - 387.0 * c2 - 387.0 * c4 - 189.0 * c6;
            [
                f_phi
                    * (eps
                        * (2.0 * continuous_atan_bracket(phi)
                            - (1.5 * kt + 0.5 * id) * ft)
                        + sig2 * (ft - 4.0 * et - 6.0 * id3 * (2.0 + 3.0 * c2) * s * c)
                        - 16.0 * id5 * sigma * chi2 * (3.0 - 5.0 * c2 - 6.0 * c4) * c
                        + 5.0 / 36.0
                            * chi4
                            * (14.0 * et - 11.0 * ft - 3.0 * id7 * poly8 * s * c)),
                f_q * (2.0 / 3.0
                    * sigma
                    * (4.0 * et - ft + 6.0 * id3 * (2.0 + 3.0 * c2) * s * c)
                    + 4.0 * id5 * chi2 * (3.0 - 5.0 * c2 - 6.0 * c4) * c),
                f_act
                    * (eps * (0.5 - id2 + kt * (id - kt) - 1.5 * id3 * ft * s * c)
                        + sig2 * (2.0 / 3.0 * (kt - 4.0 * ec) + 4.0 * id5 * (1.0 - 3.0 * c2))
                        + chi4
                            * ((14.0 * ec - 11.0 * kt) / 18.0
                                + 2.0 * id7 * id2 * (3.0 - 102.0 * c2 + 227.0 * c4))
                        - 12.0 * id7 * sigma * chi2 * (1.0 - 17.0 * c2) * s),
                f_mom
                    * chi
                    * (chi2
                        * ((14.0 * et - 11.0 * ft) / 18.0 + id7 / 6.0 * poly8 * s * c)
                        - 4.0 * sigma * id5 * (3.0 - 5.0 * c2 - 6.0 * c4) * c),
            ]
        }
        9 => {
            let sqrt3 = 3.0_f64.sqrt();
            let asinh3c = (sqrt3 * c).asinh();
            let log93 = ((2.0 * sqrt3 + 3.0 * s) / (2.0 * sqrt3 - 3.0 * s)).ln();
            let poly9 = 19.0 - 634.0 * c2 + 891.0 * (2.0 + 2.0 * c2 + c4) * c4;
            let id4 = id2 * id2;
            [
                f_phi
                    * (sqrt3 * sigma * asinh3c
                        + eps
                            * chi
                            * (5.0 / 8.0 * sqrt3 * log93
                                + id * (5.5 * id - 8.0 * kt) * s
                                + 4.0 * id3 * ft * c)
                        - 2.0 * chi
                            * id5
                            * (40.0 / 9.0 * id2 * sigma * chi2 * (1.0 - 57.0 * c2)
                                + 8.0 * sig2 * (1.0 - 4.0 * c2 - 3.0 * c4) * s
                                + chi4 / 5.0 * id4 * poly9 * s)),
                -f_q * (0.5 * sqrt3 * asinh3c
                    - 8.0 * id5
                        * chi
                        * (2.0 * chi2 / 9.0 * id2 * (1.0 - 57.0 * c2)
                            + sigma * (1.0 - 4.0 * c2 - 3.0 * c4) * s)),
                f_act
                    * id4
                    * (eps
                        * chi
                        * ((10.5 - 26.0 * id * kt) * c
                            - (1.5 - 6.0 * id * kt) * (3.0 - 4.0 * c2) * c
                            - 2.0 * id * ft * (1.0 - 6.0 * c2) * s)
                        - 1.5 * d * d * d * sigma * s
                        - 8.0 * id3
                            * chi
                            * (12.0 * sig2 * (1.0 - 2.0 * c2)
                                + chi4 * id4 * (15.0 - 190.0 * c2 + 303.0 * c4)
                                + 10.0 * id2 * sigma * chi2 * (3.0 - 19.0 * c2) * s)
                            * c),
                f_mom
                    * (eps
                        * (sqrt3 / 16.0 * log93
                            + id * (id2 * ft * c - kt * s)
                            + 0.75 * id2 * s)
                        - id5
                            * (8.0 / 3.0 * id2 * sigma * chi2 * (1.0 - 57.0 * c2)
                                + 2.0 * sig2 * (1.0 - 4.0 * c2 - 3.0 * c4) * s
                                + chi4 / 6.0 * id4 * poly9 * s)),
            ]
        }
        _ => unreachable!("validated above"),
    }
}

/// One order's contribution of the inverse map, evaluated at the given
/// (osculating) variables.
///
/// Through order 7 the terms are the negated direct ones. At orders 8 and 9
/// the phi, Phi, and Q entries additionally pick up the compositions of the
/// order-4 and order-5 terms required for the map to invert the direct one:
/// xi'_{0,m} = -xi_{0,m} + sum over grades m1 + m2 = m of D[xi_{0,m1}] xi_{0,m2}.
/// The composition terms are evaluated in closed form below; they follow from
/// differentiating the order-4/5 terms and reduce to combinations of
/// (1/Delta - K~) and F~.
pub fn inverse_term(order: usize, state: &ReducedState, params: &ModelParams) -> Result<[f64; 4]> {
    if order > MAX_ORDER {
        return Err(Error::CorrectionOrder { order });
    }
    let x = Ctx::new(state, params)?;
    let direct = term(order, &x);
    let mut out = [-direct[0], -direct[1], -direct[2], -direct[3]];
    let Ctx { chi, c, s, id, ft, kt, eps, f_phi, f_act, f_mom, .. } = x;
    let id2 = id * id;
    let id3 = id2 * id;
    let id4 = id2 * id2;
    let id5 = id4 * id;
    match order {
        8 => {
            // D[xi_{0,4}] . xi_{0,4}
            out[0] += f_phi * eps * (id - kt) * ft;
            out[2] += f_act * eps * (kt * (2.0 * id - kt) - id2 - 1.5 * id3 * ft * s * c);
        }
        9 => {
            // D[xi_{0,4}] . xi_{0,5} + D[xi_{0,5}] . xi_{0,4}
            out[0] += f_phi * eps * 2.0 * chi * id * (3.0 * (id - kt) * s - id2 * ft * c);
            out[2] += f_act
                * eps
                * chi
                * (12.0 * (id - kt) * id3 * c
                    - 6.0 * id4 * s * s * c
                    - 2.0 * id5 * ft * (1.0 - 6.0 * c * c) * s);
            out[3] += f_mom * eps * id * (id2 * ft * c + (id - kt) * s);
        }
        _ => {}
    }
    Ok(out)
}

fn apply(state: &ReducedState, delta: [f64; 4]) -> ReducedState {
    ReducedState::new(
        state.phase().expect("checked by Ctx") + delta[0],
        state.q + delta[1],
        state.action + delta[2],
        state.momentum + delta[3],
    )
}

fn summed<TermFn>(state: &ReducedState, order: usize, mut f: TermFn) -> Result<ReducedState>
where
    TermFn: FnMut(usize) -> Result<[f64; 4]>,
{
    if order > MAX_ORDER {
        return Err(Error::CorrectionOrder { order });
    }
    state.phase()?;
    let mut total = [0.0; 4];
    for m in 4..=order.min(MAX_ORDER) {
        let t = f(m)?;
        for i in 0..4 {
            total[i] += t[i];
        }
    }
    Ok(apply(state, total))
}

/// Mean (prime) -> osculating variables, summing all terms through `order`.
/// Orders 0..3 are the identity.
pub fn direct_correct(
    mean: &ReducedState,
    order: usize,
    params: &ModelParams,
) -> Result<ReducedState> {
    summed(mean, order, |m| direct_term(m, mean, params))
}

/// Osculating -> mean (prime) variables, summing all terms through `order`.
pub fn inverse_correct(
    osculating: &ReducedState,
    order: usize,
    params: &ModelParams,
) -> Result<ReducedState> {
    summed(osculating, order, |m| inverse_term(m, osculating, params))
}

/// Reduce a Cartesian state and convert it to mean elements ready for the
/// averaged flow; order 0 is `to_reduced` alone.
pub fn osculating_to_mean_cartesian(
    state: &CartesianState,
    order: usize,
    params: &ModelParams,
) -> Result<ReducedState> {
    let osc = to_reduced(state, params);
    if order == 0 {
        return Ok(osc);
    }
    inverse_correct(&osc, order, params)
}

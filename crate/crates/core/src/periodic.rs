//! Periodicity-error metric, differential corrector, and monodromy analysis.

use crate::dynamics::{self, CartesianState, IntegratorConfig};
use crate::error::{Error, Result};
use crate::params::ModelParams;
use nalgebra::{Matrix4, SMatrix, SVector, Vector4};

/// A converged periodic orbit with its stability diagnostics.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub initial: CartesianState,
    pub period: f64,
    /// Periodicity error of the converged orbit.
    pub epsilon: f64,
    /// Trace of the non-trivial 2x2 block of the monodromy matrix,
    /// trace(M) - 2; magnitudes above 2 flag instability.
    pub stability_index: f64,
    pub monodromy: Matrix4<f64>,
    pub iterations: usize,
    /// Newton update norms, for convergence-rate diagnostics.
    pub update_norms: Vec<f64>,
}

impl PeriodicOrbit {
    pub fn is_unstable(&self) -> bool {
        self.stability_index.abs() > 2.0
    }
}

/// Corrector settings.
#[derive(Debug, Clone, Copy)]
pub struct CorrectorConfig {
    /// Convergence target on the periodicity error.
    pub target_eps: f64,
    pub max_iterations: usize,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        CorrectorConfig { target_eps: 1e-12, max_iterations: 25 }
    }
}

/// Max of the relative return errors of position and momentum over [0, T].
pub fn periodicity_error(
    state0: &CartesianState,
    period: f64,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<f64> {
    let pos_norm = state0.position_norm();
    let mom_norm = state0.momentum_norm();
    if pos_norm == 0.0 {
        return Err(Error::ZeroNormSeed { which: "position" });
    }
    if mom_norm == 0.0 {
        return Err(Error::ZeroNormSeed { which: "momentum" });
    }
    if period == 0.0 {
        return Ok(0.0);
    }
    let end = dynamics::propagate_to(state0, state0.t + period, config, params)?;
    Ok(return_error(state0, &end))
}

fn return_error(start: &CartesianState, end: &CartesianState) -> f64 {
    let dp = (end.x - start.x).hypot(end.y - start.y) / start.position_norm();
    let dm = (end.px - start.px).hypot(end.py - start.py) / start.momentum_norm();
    dp.max(dm)
}

/// Slide the period guess to the local minimum of the return error along the
/// seed trajectory. The return error is nearly periodic in T at the fast
/// frequency, so a Newton start outside the correct valley diverges; one
/// dense propagation locates the valley cheaply.
fn refine_period_guess(
    seed: &CartesianState,
    t_center: f64,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<f64> {
    let window = (0.05 * t_center).max(1.0);
    let t_lo = (t_center - window).max(0.5 * t_center);
    let t_hi = t_center + window;
    let cfg = IntegratorConfig { dense: true, ..*config };
    let sol = dynamics::flow(seed, seed.t + t_hi, &cfg, params)?;
    let mut best = (f64::INFINITY, t_center);
    let scan = |n: usize, lo: f64, hi: f64, best: &mut (f64, f64)| -> Result<()> {
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let y = sol.sample(seed.t + t)?;
            let end = CartesianState::from_array(seed.t + t, &y);
            let e = return_error(seed, &end);
            if e < best.0 {
                *best = (e, t);
            }
        }
        Ok(())
    };
    scan(2000, t_lo, t_hi, &mut best)?;
    let coarse_step = (t_hi - t_lo) / 2000.0;
    let center = best.1;
    scan(400, center - coarse_step, center + coarse_step, &mut best)?;
    Ok(best.1)
}

/// Newton refinement of (z0, T) towards a periodic orbit.
///
/// Solves flow_T(z0) - z0 = 0 with a bordered system of the four periodicity
/// equations plus two anchors: the phase condition f(z0)^T dz = 0 removing
/// the time-translation direction, and an energy condition pinning H(z0) to
/// the seed's energy. Periodic orbits come in a one-parameter family along
/// the energy, so without the second anchor the corrector drifts to an
/// arbitrary family member; anchoring the energy makes the converged orbit
/// the unique family member through the seed's energy level. The 6x5 system
/// is solved in the least-squares sense and steps are backtracked on the
/// residual norm so that far seeds stay inside the convergence basin.
pub fn differential_correct(
    seed: &CartesianState,
    seed_period: f64,
    corrector: &CorrectorConfig,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<PeriodicOrbit> {
    let mut z0 = *seed;
    let mut period = refine_period_guess(seed, seed_period, config, params)?;
    let mut update_norms = Vec::new();
    let mut iterations = 0;
    let mut best_eps = f64::INFINITY;
    let h_target = dynamics::hamiltonian(seed, params)?;
    // The energy must be pinned essentially to rounding: the family of
    // periodic orbits is so shallow in energy here that a defect of 1e-6
    // corresponds to a different family member a tenth of a unit away.
    let h_tol = 1e-13 * (1.0 + h_target.abs());

    for _ in 0..corrector.max_iterations {
        let (z_end, stm) = dynamics::propagate_with_stm(&z0, z0.t + period, config, params)?;
        let eps = return_error(&z0, &z_end);
        let h_defect = dynamics::hamiltonian(&z0, params)? - h_target;
        let stagnated = eps < 1e-6
            && update_norms.len() >= 2
            && update_norms[update_norms.len() - 1] < 1e-10
            && eps > 0.5 * best_eps;
        if (eps <= corrector.target_eps && h_defect.abs() <= h_tol) || stagnated {
            let orbit = finish(z0, period, eps, stm, iterations, update_norms)?;
            return finalize(orbit, seed, h_target, corrector, config, params);
        }
        best_eps = best_eps.min(eps);

        let f_end = dynamics::eom(&z_end, params)?;
        let f_start = dynamics::eom(&z0, params)?;
        // grad H = (-dpx/dt, -dpy/dt, dx/dt, dy/dt).
        let grad_h = [-f_start[2], -f_start[3], f_start[0], f_start[1]];
        let residual = Vector4::new(
            z_end.x - z0.x,
            z_end.y - z0.y,
            z_end.px - z0.px,
            z_end.py - z0.py,
        );
        let f_norm = Vector4::from_row_slice(&f_start).norm().max(1e-12);
        let h_scale = Vector4::from_row_slice(&grad_h).norm().max(1e-12);

        // Rows scaled to state units: periodicity, phase anchor, energy anchor.
        let mut a = SMatrix::<f64, 6, 5>::zeros();
        for r in 0..4 {
            for c in 0..4 {
                a[(r, c)] = stm[(r, c)] - if r == c { 1.0 } else { 0.0 };
            }
            a[(r, 4)] = f_end[r];
            a[(4, r)] = f_start[r] / f_norm;
            a[(5, r)] = grad_h[r] / h_scale;
        }
        let mut rhs = SVector::<f64, 6>::zeros();
        for r in 0..4 {
            rhs[r] = -residual[r];
        }
        rhs[5] = -h_defect / h_scale;

        // Truncated minimum-norm solve. The case-3 orbit sits on a 37:1
        // resonance: the broken resonant torus leaves a near-null direction
        // (realigning the fast phase against the libration) whose residual
        // gradient is below integration noise, so any step along it is
        // unrecoverable drift. Its singular value sits orders of magnitude
        // below the genuine transverse ones; discarding it keeps the
        // corrector at the seed's alignment.
        let svd = a.svd(true, true);
        let sigma_max = svd.singular_values.max();
        if !(sigma_max > 0.0) {
            return Err(Error::SingularCorrector);
        }
        let cutoff = 5e-6 * sigma_max;
        let u = svd.u.as_ref().ok_or(Error::SingularCorrector)?;
        let v_t = svd.v_t.as_ref().ok_or(Error::SingularCorrector)?;
        let mut delta = SVector::<f64, 5>::zeros();
        for k in 0..5 {
            let s = svd.singular_values[k];
            if s <= cutoff {
                continue;
            }
            let proj = u.column(k).dot(&rhs);
            delta += v_t.row(k).transpose() * (proj / s);
        }
        if !delta.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularCorrector);
        }

        // When the energy defect dominates, the step slides along the
        // orbit family through a curved valley: the periodicity residual
        // must grow before it can shrink again, so the step is taken in
        // full. Otherwise backtrack on the combined residual.
        let polish = h_defect.abs() / h_scale > residual.norm();
        let merit0 = residual.norm().hypot(h_defect / h_scale);
        let mut alpha = 1.0;
        let (z_next, period_next) = loop {
            let candidate = CartesianState::new(
                z0.t,
                z0.x + alpha * delta[0],
                z0.y + alpha * delta[1],
                z0.px + alpha * delta[2],
                z0.py + alpha * delta[3],
            );
            let t_next = period + alpha * delta[4];
            if polish {
                break (candidate, t_next);
            }
            let merit = dynamics::propagate_to(&candidate, candidate.t + t_next, config, params)
                .and_then(|end| {
                    let f = Vector4::new(
                        end.x - candidate.x,
                        end.y - candidate.y,
                        end.px - candidate.px,
                        end.py - candidate.py,
                    )
                    .norm();
                    let dh = dynamics::hamiltonian(&candidate, params)? - h_target;
                    Ok(f.hypot(dh / h_scale))
                })
                .unwrap_or(f64::INFINITY);
            if merit <= (1.0 - 1e-4 * alpha) * merit0 {
                break (candidate, t_next);
            }
            alpha *= 0.5;
            if alpha < 1.0 / 64.0 {
                // Accept the smallest step; Newton may still recover.
                break (candidate, t_next);
            }
        };
        update_norms.push(alpha * delta.norm());
        z0 = z_next;
        period = period_next;
        iterations += 1;
    }

    // Iteration budget exhausted: attempt the symmetry polish anyway before
    // giving up; the general stage may sit at the resonance floor.
    let (z_end, stm) = dynamics::propagate_with_stm(&z0, z0.t + period, config, params)?;
    let eps = return_error(&z0, &z_end);
    let orbit = finish(z0, period, eps, stm, iterations, update_norms)?;
    finalize(orbit, seed, h_target, corrector, config, params)
}

/// Polish through the mirror symmetry when available, keep the better orbit,
/// check the target, and anchor the phase to the seed.
fn finalize(
    orbit: PeriodicOrbit,
    seed: &CartesianState,
    h_target: f64,
    corrector: &CorrectorConfig,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<PeriodicOrbit> {
    let chosen = match symmetric_polish(&orbit, h_target, config, params)? {
        Some(polished) if polished.epsilon <= orbit.epsilon => polished,
        _ => orbit,
    };
    if chosen.epsilon > corrector.target_eps {
        return Err(Error::CorrectorStalled {
            iterations: chosen.iterations,
            eps: chosen.epsilon,
        });
    }
    anchor_to_seed(chosen, seed, config, params)
}

fn finish(
    initial: CartesianState,
    period: f64,
    epsilon: f64,
    monodromy: Matrix4<f64>,
    iterations: usize,
    update_norms: Vec<f64>,
) -> Result<PeriodicOrbit> {
    Ok(PeriodicOrbit {
        initial,
        period,
        epsilon,
        stability_index: monodromy.trace() - 2.0,
        monodromy,
        iterations,
        update_norms,
    })
}

/// Refine a nearly periodic orbit through its mirror symmetry, when it has
/// one.
///
/// Single shooting over a full libration period cannot converge past the
/// resonance scale: the orbit locks the fast revolution to the libration
/// (37:1 for the large-libration test case), the broken resonant torus is a
/// continuum of curves that close to ~1e-10, and the residual gradient that
/// distinguishes them from the true periodic orbit drowns in integration
/// noise. The true orbit, however, crosses the symmetry set {x = 0, py = 0}
/// perpendicular; shooting half a period from that section with the energy
/// anchored is a well-conditioned 3x3 Newton with no soft directions at all.
/// Returns None when the orbit has no usable perpendicular crossing.
fn symmetric_polish(
    orbit: &PeriodicOrbit,
    h_target: f64,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<Option<PeriodicOrbit>> {
    let cfg_dense = IntegratorConfig { dense: true, ..*config };
    let sol = dynamics::flow(&orbit.initial, orbit.initial.t + orbit.period, &cfg_dense, params)?;

    // Locate the x = 0 crossing with the smallest |py|.
    let n = ((orbit.period / 1e-3) as usize).clamp(4096, 1 << 20);
    let mut best: Option<(f64, [f64; 4])> = None;
    let mut prev = sol.sample(orbit.initial.t)?;
    let mut t_prev = orbit.initial.t;
    for i in 1..=n {
        let t = orbit.initial.t + orbit.period * i as f64 / n as f64;
        let y = sol.sample(t)?;
        if prev[0] == 0.0 || prev[0].signum() != y[0].signum() {
            let (mut lo, mut hi) = (t_prev, t);
            let mut y_lo = prev;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let y_mid = sol.sample(mid)?;
                if y_lo[0].signum() == y_mid[0].signum() {
                    lo = mid;
                    y_lo = y_mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 * orbit.period {
                    break;
                }
            }
            let y_c = sol.sample(0.5 * (lo + hi))?;
            if best.is_none() || y_c[3].abs() < best.unwrap().1[3].abs() {
                best = Some((0.5 * (lo + hi), y_c));
            }
        }
        prev = y;
        t_prev = t;
    }
    let Some((_, y_c)) = best else { return Ok(None) };
    let momentum_scale = y_c[2].hypot(y_c[3]).max(1e-12);
    if y_c[3].abs() > 0.05 * momentum_scale {
        return Ok(None); // no near-perpendicular crossing: not mirror symmetric
    }

    // Half-period shooting from the projected section state (0, y0, px0, 0).
    let mut y0 = y_c[1];
    let mut px0 = y_c[2];
    let mut half = 0.5 * orbit.period;
    let state_scale = y0.abs().max(1.0);
    let mut converged = false;
    for _ in 0..12 {
        let z0 = CartesianState::new(orbit.initial.t, 0.0, y0, px0, 0.0);
        let h_defect = dynamics::hamiltonian(&z0, params)? - h_target;
        let (z_half, stm) = dynamics::propagate_with_stm(&z0, z0.t + half, config, params)?;
        let f_half = dynamics::eom(&z_half, params)?;
        let r = SVector::<f64, 3>::new(z_half.x, z_half.py, h_defect);
        if z_half.x.abs() + z_half.py.abs() <= 1e-11 * state_scale
            && h_defect.abs() <= 1e-13 * (1.0 + h_target.abs())
        {
            converged = true;
            break;
        }
        let f0 = dynamics::eom(&z0, params)?;
        // grad H at the section in the (y, px) plane.
        let grad_h = [-f0[3], f0[0]];
        let j = SMatrix::<f64, 3, 3>::new(
            stm[(0, 1)],
            stm[(0, 2)],
            f_half[0],
            stm[(3, 1)],
            stm[(3, 2)],
            f_half[3],
            grad_h[0],
            grad_h[1],
            0.0,
        );
        let Some(delta) = j.full_piv_lu().solve(&(-r)) else { return Ok(None) };
        if !delta.iter().all(|v| v.is_finite()) {
            return Ok(None);
        }
        y0 += delta[0];
        px0 += delta[1];
        half += delta[2];
    }
    if !converged {
        return Ok(None);
    }

    let z0 = CartesianState::new(orbit.initial.t, 0.0, y0, px0, 0.0);
    let period = 2.0 * half;
    let (z_end, stm) = dynamics::propagate_with_stm(&z0, z0.t + period, config, params)?;
    Ok(Some(PeriodicOrbit {
        initial: z0,
        period,
        epsilon: return_error(&z0, &z_end),
        stability_index: stm.trace() - 2.0,
        monodromy: stm,
        iterations: orbit.iterations,
        update_norms: orbit.update_norms.clone(),
    }))
}

/// Gauge fix: slide the converged state along its own orbit to the point
/// closest to the seed. Newton lands on an arbitrary phase of the closed
/// orbit; reporting the nearest point makes the answer deterministic and
/// comparable across correctors.
fn anchor_to_seed(
    orbit: PeriodicOrbit,
    seed: &CartesianState,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<PeriodicOrbit> {
    let cfg = IntegratorConfig { dense: true, ..*config };
    let sol = dynamics::flow(&orbit.initial, orbit.initial.t + orbit.period, &cfg, params)?;
    let dist2 = |y: &[f64; 4]| -> f64 {
        (y[0] - seed.x).powi(2)
            + (y[1] - seed.y).powi(2)
            + (y[2] - seed.px).powi(2)
            + (y[3] - seed.py).powi(2)
    };
    // The distance to the seed dips sharply once per fast revolution (the
    // dip width is roughly distance/|f|), so the grid must resolve a few
    // thousandths of a time unit.
    let n = ((orbit.period / 5e-4) as usize).clamp(4096, 1 << 20);
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let s = orbit.period * i as f64 / n as f64;
        let d = dist2(&sol.sample(orbit.initial.t + s)?);
        if d < best.0 {
            best = (d, s);
        }
    }
    // Golden-section refinement of the smooth distance minimum.
    let (mut lo, mut hi) = (best.1 - orbit.period / n as f64, best.1 + orbit.period / n as f64);
    let gr = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut s1 = hi - gr * (hi - lo);
    let mut s2 = lo + gr * (hi - lo);
    let mut d1 = dist2(&sol.sample(orbit.initial.t + s1.max(0.0))?);
    let mut d2 = dist2(&sol.sample(orbit.initial.t + s2.min(orbit.period))?);
    for _ in 0..60 {
        if d1 < d2 {
            hi = s2;
            s2 = s1;
            d2 = d1;
            s1 = hi - gr * (hi - lo);
            d1 = dist2(&sol.sample(orbit.initial.t + s1.clamp(0.0, orbit.period))?);
        } else {
            lo = s1;
            s1 = s2;
            d1 = d2;
            s2 = lo + gr * (hi - lo);
            d2 = dist2(&sol.sample(orbit.initial.t + s2.clamp(0.0, orbit.period))?);
        }
    }
    let s_star = (0.5 * (lo + hi)).clamp(0.0, orbit.period);
    if s_star == 0.0 {
        return Ok(orbit);
    }
    // The interpolant is two orders less accurate than the solution nodes;
    // re-propagate to the anchor time at full accuracy.
    let precise = dynamics::propagate_to(&orbit.initial, orbit.initial.t + s_star, config, params)?;
    let anchored = CartesianState::from_array(seed.t, &precise.to_array());
    let (z_end, stm) =
        dynamics::propagate_with_stm(&anchored, anchored.t + orbit.period, config, params)?;
    Ok(PeriodicOrbit {
        initial: anchored,
        period: orbit.period,
        epsilon: return_error(&anchored, &z_end),
        stability_index: stm.trace() - 2.0,
        monodromy: stm,
        iterations: orbit.iterations,
        update_norms: orbit.update_norms,
    })
}

/// State-transition matrix over one period and the stability index
/// trace(M) - 2 carried by the non-unit eigenvalue pair.
pub fn monodromy(
    state0: &CartesianState,
    period: f64,
    config: &IntegratorConfig,
    params: &ModelParams,
) -> Result<(Matrix4<f64>, f64)> {
    let (_, stm) = dynamics::propagate_with_stm(state0, state0.t + period, config, params)?;
    Ok((stm, stm.trace() - 2.0))
}

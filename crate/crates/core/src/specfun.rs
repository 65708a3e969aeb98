//! Elliptic-integral kernel.
//!
//! Complete and incomplete Legendre integrals in the parameter convention
//! m = k^2, evaluated through Carlson symmetric forms, plus the detrended
//! periodic combinations F~, E~ and the amplitude Delta(phi) that the
//! averaged theory is written in. All functions are pure and reentrant.

use crate::error::{Error, Result};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Fixed parameter m = 3/4 of the theory.
pub const M_THEORY: f64 = 0.75;

/// Frozen values of K(3/4), E(3/4) and their pi-normalized forms.
#[derive(Debug, Clone, Copy)]
pub struct EllipticConstants {
    /// K(3/4), complete integral of the first kind.
    pub k: f64,
    /// E(3/4), complete integral of the second kind.
    pub e: f64,
    /// K(3/4) / pi.
    pub k_tilde: f64,
    /// E(3/4) / pi.
    pub e_tilde: f64,
    /// (K(3/4) - E(3/4)) / pi, the combination driving the libration frequency.
    pub k_minus_e: f64,
}

/// Constants at m = 3/4, computed once.
pub fn constants() -> &'static EllipticConstants {
    static CONSTANTS: OnceLock<EllipticConstants> = OnceLock::new();
    CONSTANTS.get_or_init(|| {
        let k = complete_k(M_THEORY).expect("m = 3/4 in domain");
        let e = complete_e(M_THEORY).expect("m = 3/4 in domain");
        EllipticConstants {
            k,
            e,
            k_tilde: k / PI,
            e_tilde: e / PI,
            k_minus_e: (k - e) / PI,
        }
    })
}

// Carlson symmetric forms, Carlson (1995). The expansion tolerances give
// relative truncation errors below 3e-16 in double precision.

fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    const ERRTOL: f64 = 0.0025;
    let (c1, c2, c3, c4) = (1.0 / 24.0, 0.1, 3.0 / 44.0, 1.0 / 14.0);
    let (mut dx, mut dy, mut dz);
    let mut ave;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        ave = (x + y + z) / 3.0;
        dx = (ave - x) / ave;
        dy = (ave - y) / ave;
        dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            break;
        }
    }
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (1.0 + (c1 * e2 - c2 - c3 * e3) * e2 + c4 * e3) / ave.sqrt()
}

fn carlson_rd(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    const ERRTOL: f64 = 0.0015;
    let (c1, c2, c3, c4) = (3.0 / 14.0, 1.0 / 6.0, 9.0 / 22.0, 3.0 / 26.0);
    let (c5, c6) = (0.25 * c3, 1.5 * c4);
    let mut sum = 0.0;
    let mut fac = 1.0;
    let (mut dx, mut dy, mut dz);
    let mut ave;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lam = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lam));
        fac *= 0.25;
        x = 0.25 * (x + lam);
        y = 0.25 * (y + lam);
        z = 0.25 * (z + lam);
        ave = 0.2 * (x + y + 3.0 * z);
        dx = (ave - x) / ave;
        dy = (ave - y) / ave;
        dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) < ERRTOL {
            break;
        }
    }
    let ea = dx * dy;
    let eb = dz * dz;
    let ec = ea - eb;
    let ed = ea - 6.0 * eb;
    let ee = ed + ec + ec;
    3.0 * sum
        + fac
            * (1.0 + ed * (-c1 + c5 * ed - c6 * dz * ee)
                + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea)))
            / (ave * ave.sqrt())
}

fn check_m(m: f64, integral: &'static str, allow_one: bool) -> Result<()> {
    if m.is_nan() {
        return Err(Error::NonFinite { context: integral, value: m });
    }
    let in_domain = if allow_one { (0.0..=1.0).contains(&m) } else { (0.0..1.0).contains(&m) };
    if !in_domain {
        return Err(Error::EllipticDomain { integral, m });
    }
    Ok(())
}

/// Complete elliptic integral of the first kind K(m), m = k^2, 0 <= m < 1.
pub fn complete_k(m: f64) -> Result<f64> {
    check_m(m, "K", false)?;
    Ok(carlson_rf(0.0, 1.0 - m, 1.0))
}

/// Complete elliptic integral of the second kind E(m), m = k^2, 0 <= m <= 1.
pub fn complete_e(m: f64) -> Result<f64> {
    check_m(m, "E", true)?;
    if m == 1.0 {
        return Ok(1.0);
    }
    let y = 1.0 - m;
    Ok(carlson_rf(0.0, y, 1.0) - m / 3.0 * carlson_rd(0.0, y, 1.0))
}

/// Incomplete elliptic integral of the first kind F(phi | m) for any real phi,
/// extended beyond [0, pi/2] with the addition law F(phi + pi) = F(phi) + 2K.
pub fn incomplete_f(phi: f64, m: f64) -> Result<f64> {
    check_m(m, "F", false)?;
    if phi.is_nan() {
        return Err(Error::NonFinite { context: "F", value: phi });
    }
    let n = (phi / PI).round();
    let r = phi - n * PI; // r in [-pi/2, pi/2]
    let (s, c) = r.sin_cos();
    let partial = if s == 0.0 { 0.0 } else { s * carlson_rf(c * c, 1.0 - m * s * s, 1.0) };
    if n == 0.0 {
        Ok(partial)
    } else {
        Ok(2.0 * n * complete_k(m)? + partial)
    }
}

/// Incomplete elliptic integral of the second kind E(phi | m) for any real phi,
/// extended with E(phi + pi) = E(phi) + 2E(m).
pub fn incomplete_e(phi: f64, m: f64) -> Result<f64> {
    check_m(m, "E(phi|m)", false)?;
    if phi.is_nan() {
        return Err(Error::NonFinite { context: "E(phi|m)", value: phi });
    }
    let n = (phi / PI).round();
    let r = phi - n * PI;
    let (s, c) = r.sin_cos();
    let partial = if s == 0.0 {
        0.0
    } else {
        let q = 1.0 - m * s * s;
        s * carlson_rf(c * c, q, 1.0) - m / 3.0 * s * s * s * carlson_rd(c * c, q, 1.0)
    };
    if n == 0.0 {
        Ok(partial)
    } else {
        Ok(2.0 * n * complete_e(m)? + partial)
    }
}

/// Detrended first-kind integral F~(phi) = (2/pi) K(3/4) phi - F(phi | 3/4).
///
/// The linear detrending uses the pi-normalized K so that the combination is
/// exactly periodic (period pi, hence 2 pi) and odd in phi.
pub fn tilde_f(phi: f64) -> f64 {
    let c = constants();
    2.0 * c.k_tilde * phi - incomplete_f(phi, M_THEORY).expect("fixed m = 3/4")
}

/// Detrended second-kind integral E~(phi) = (2/pi) E(3/4) phi - E(phi | 3/4).
pub fn tilde_e(phi: f64) -> f64 {
    let c = constants();
    2.0 * c.e_tilde * phi - incomplete_e(phi, M_THEORY).expect("fixed m = 3/4")
}

/// Amplitude Delta(phi) = sqrt(1 + 3 cos^2 phi), valued in [1, 2], pi-periodic.
pub fn delta(phi: f64) -> f64 {
    let c = phi.cos();
    (1.0 + 3.0 * c * c).sqrt()
}

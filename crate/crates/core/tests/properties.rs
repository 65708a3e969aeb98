//! Property tests for the structural invariants.

use hill_dro::corrections::direct_term;
use hill_dro::dynamics::{hamiltonian, CartesianState};
use hill_dro::reduce::{
    from_reduced, kepler_term, quadratic_energy, rho, rho_series, to_reduced, ReducedState,
};
use hill_dro::secular::{hamiltonian6, hamiltonian8, solution6, SecularState};
use hill_dro::{specfun, ModelParams};
use proptest::prelude::*;
use std::f64::consts::PI;

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (0.2_f64..5.0, 0.2_f64..5.0).prop_map(|(mu, omega)| ModelParams::new(mu, omega).unwrap())
}

fn state_strategy() -> impl Strategy<Value = CartesianState> {
    (-12.0_f64..12.0, -25.0_f64..25.0, -12.0_f64..12.0, -4.0_f64..4.0)
        .prop_map(|(x, y, px, py)| CartesianState::new(0.0, x, y, px, py))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reduction_round_trip(s in state_strategy(), p in params_strategy()) {
        let back = from_reduced(&to_reduced(&s, &p), 0.0, &p);
        let scale = s.position_norm().max(s.momentum_norm()).max(1.0);
        prop_assert!((back.x - s.x).abs() <= 1e-12 * scale);
        prop_assert!((back.y - s.y).abs() <= 1e-12 * scale);
        prop_assert!((back.px - s.px).abs() <= 1e-12 * scale);
        prop_assert!((back.py - s.py).abs() <= 1e-12 * scale);
    }

    #[test]
    fn kepler_term_matches_distance(s in state_strategy(), p in params_strategy()) {
        let red = to_reduced(&s, &p);
        prop_assume!(red.action > 1e-9 && s.r() > 1e-3);
        let via_rho = kepler_term(&red, &p).unwrap();
        let direct = -p.mu / s.r();
        prop_assert!(
            ((via_rho - direct) / direct).abs() <= 1e-12,
            "{via_rho} vs {direct}"
        );
    }

    #[test]
    fn energy_splits_into_reduced_parts(s in state_strategy(), p in params_strategy()) {
        prop_assume!(s.r() > 0.5);
        let red = to_reduced(&s, &p);
        prop_assume!(red.action > 1e-9);
        let h = hamiltonian(&s, &p).unwrap();
        let k = quadratic_energy(&red, &p) + kepler_term(&red, &p).unwrap();
        let scale = h.abs().max(1.0);
        prop_assert!((h - k).abs() <= 1e-11 * scale, "H = {h}, K = {k}");
    }

    #[test]
    fn rho_series_truncation_bounded(
        phi in -10.0_f64..10.0,
        chi in -0.15_f64..0.15,
        sigma in -0.02_f64..0.02,
    ) {
        // The first omitted coefficient is S6, whose Fourier coefficients
        // reach a few hundred; in units of max(|chi|, sqrt(|sigma|))^6 the
        // remainder stays under 133 over this domain (worst near Delta = 1,
        // where the series has no 1/Delta damping), bounded by a dense scan.
        let u = chi.abs().max(sigma.abs().sqrt());
        let exact = 1.0 / rho(phi, chi, sigma);
        let series = rho_series(phi, chi, sigma, 5).unwrap();
        prop_assert!((exact - series).abs() <= 150.0 * u.powi(6) + 1e-14);
    }

    #[test]
    fn legendre_relation(m in 0.01_f64..0.99) {
        let k = specfun::complete_k(m).unwrap();
        let e = specfun::complete_e(m).unwrap();
        let kc = specfun::complete_k(1.0 - m).unwrap();
        let ec = specfun::complete_e(1.0 - m).unwrap();
        prop_assert!((e * kc + ec * k - k * kc - PI / 2.0).abs() <= 1e-12);
    }

    #[test]
    fn incomplete_f_addition_law(phi in -7.0_f64..7.0, m in 0.0_f64..0.95) {
        let f = specfun::incomplete_f(phi, m).unwrap();
        let fp = specfun::incomplete_f(phi + PI, m).unwrap();
        let two_k = 2.0 * specfun::complete_k(m).unwrap();
        prop_assert!((fp - f - two_k).abs() <= 1e-12 * (1.0 + two_k));
    }

    #[test]
    fn tilde_functions_periodic_and_odd(phi in -7.0_f64..7.0) {
        prop_assert!((specfun::tilde_f(phi + 2.0 * PI) - specfun::tilde_f(phi)).abs() <= 1e-13);
        prop_assert!((specfun::tilde_e(phi + 2.0 * PI) - specfun::tilde_e(phi)).abs() <= 1e-13);
        prop_assert!((specfun::tilde_f(-phi) + specfun::tilde_f(phi)).abs() <= 1e-13);
        prop_assert!((specfun::tilde_e(-phi) + specfun::tilde_e(phi)).abs() <= 1e-13);
    }

    #[test]
    fn averaged_hamiltonians_even_in_center(
        q in -15.0_f64..15.0,
        momentum in -0.8_f64..0.8,
        action in 5.0_f64..90.0,
        p in params_strategy(),
    ) {
        let h6 = hamiltonian6(q, momentum, action, &p).unwrap();
        let h6m = hamiltonian6(-q, -momentum, action, &p).unwrap();
        prop_assert!(((h6 - h6m) / h6).abs() <= 1e-13);
        let h8 = hamiltonian8(q, momentum, action, &p).unwrap();
        let h8m = hamiltonian8(-q, -momentum, action, &p).unwrap();
        prop_assert!(((h8 - h8m) / h8).abs() <= 1e-13);
    }

    #[test]
    fn solution6_preserves_its_energy(
        q in -9.0_f64..9.0,
        momentum in -0.3_f64..0.3,
        action in 20.0_f64..80.0,
        t in 0.0_f64..500.0,
    ) {
        let p = ModelParams::default();
        let st0 = SecularState::new(0.3, q, action, momentum);
        let h0 = hamiltonian6(st0.q, st0.momentum, st0.action, &p).unwrap();
        let st = solution6(&st0, t, &p).unwrap();
        let h = hamiltonian6(st.q, st.momentum, st.action, &p).unwrap();
        prop_assert!(((h - h0) / h0).abs() <= 1e-12);
        prop_assert!(st.action == st0.action);
    }

    #[test]
    fn correction_terms_scale_with_units(
        phi in -3.0_f64..3.0,
        q in -6.0_f64..6.0,
        action in 15.0_f64..80.0,
        momentum in -0.4_f64..0.4,
        l in 0.5_f64..3.0,
        tau in 0.5_f64..3.0,
        m in 4_usize..=9,
    ) {
        // Unit change (length l, time tau): mu -> mu l^3/tau^2,
        // omega -> omega/tau, q -> q l, Phi -> Phi l^2/tau, Q -> Q l/tau.
        // Every correction component must transform like its variable, which
        // pins all the mu/(omega^a B^b) prefactors.
        let p = ModelParams::default();
        let scaled = ModelParams::new(l * l * l / (tau * tau), 1.0 / tau).unwrap();
        let st = ReducedState::new(phi, q, action, momentum);
        let st_scaled = ReducedState::new(phi, q * l, action * l * l / tau, momentum * l / tau);
        let base = direct_term(m, &st, &p).unwrap();
        let big = direct_term(m, &st_scaled, &scaled).unwrap();
        let tol = |v: f64| 1e-11 * (1.0 + v.abs());
        prop_assert!((big[0] - base[0]).abs() <= tol(base[0]));
        prop_assert!((big[1] - base[1] * l).abs() <= tol(base[1] * l));
        prop_assert!((big[2] - base[2] * l * l / tau).abs() <= tol(base[2] * l * l / tau));
        prop_assert!((big[3] - base[3] * l / tau).abs() <= tol(base[3] * l / tau));
    }
}

//! Property tests for the bound calculators: the implication lattice among
//! the mode-count conditions, monotonicity and positivity of beta and the
//! radii, and well-definedness boundaries.

use detform::bounds::{
    absorbing_radius, absorption_time, beta, check_conditions, ln_e_n, min_determining_n,
    BoundsInput, Constants,
};
use proptest::prelude::*;

fn input(g: f64, n: u32, mu: Option<f64>) -> BoundsInput {
    let mut inp = BoundsInput::new(g, n);
    inp.mu = mu;
    inp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// The strongest mode-count condition implies every weaker one: if
    /// N > G(9+beta)(c_A+c_L) then all the (3+beta)-type conditions and the
    /// |Aw| bound hold, and each of those implies the determining threshold.
    #[test]
    fn condition_implication_lattice(g in 0.1..50.0f64, n in 1u32..2000) {
        let rep = check_conditions(&input(g, n, None));
        let f = rep.flags;
        if f.gn4 {
            prop_assert!(f.gn1 && f.gn2 && f.gn3 && f.bound_a_n);
        }
        if f.gn3 || f.gn2 || f.bound_a_n {
            prop_assert!(f.gn1);
        }
        if f.gn1 {
            prop_assert!(f.determining);
        }
        // derived quantities appear exactly when their gate holds
        prop_assert_eq!(rep.beta.is_some(), f.gn1);
        prop_assert_eq!(rep.l_w.is_some(), f.gn3);
        prop_assert_eq!(rep.gamma_aw.is_some(), f.bound_a_n);
    }

    /// beta is positive where defined, undefined at or below N = 3 c_L G,
    /// and strictly decreasing along the N-axis once the log factor growth
    /// is dominated (checked literally at N and 4N).
    #[test]
    fn beta_positive_and_decreasing_in_n(g in 0.1..20.0f64, n in 1u32..500) {
        let k = Constants::default();
        match beta(g, n, 1.0, &k) {
            Ok(b) => {
                prop_assert!((n as f64) > 3.0 * k.c_l * g);
                prop_assert!(b > 0.0 && b.is_finite());
                let b4 = beta(g, 4 * n, 1.0, &k).unwrap();
                prop_assert!(b4 < b, "beta({g},{n}) = {b} but beta({g},{}) = {b4}", 4 * n);
            }
            Err(_) => prop_assert!((n as f64) <= 3.0 * k.c_l * g),
        }
    }

    /// beta grows with the unresolved forcing fraction |h|/|f| and with G
    /// (at fixed N in the defined region).
    #[test]
    fn beta_monotone_in_forcing_and_grashof(g in 0.1..5.0f64, n in 100u32..1000, r in 0.0..2.0f64) {
        let k = Constants::default();
        let b0 = beta(g, n, r, &k).unwrap();
        prop_assert!(beta(g, n, r + 0.5, &k).unwrap() > b0);
        prop_assert!(beta(g * 1.5, n, r, &k).unwrap() > b0);
    }

    /// The absorbing radius is positive, finite, and scales linearly with
    /// nu at fixed everything else.
    #[test]
    fn absorbing_radius_positive_and_linear_in_nu(g in 0.1..5.0f64, n in 100u32..1000, nu in 0.1..4.0f64) {
        let mut inp = input(g, n, None);
        inp.nu = nu;
        let r = absorbing_radius(&inp).unwrap();
        prop_assert!(r > 0.0 && r.is_finite());
        inp.nu = 2.0 * nu;
        let r2 = absorbing_radius(&inp).unwrap();
        prop_assert!((r2 / r - 2.0).abs() < 1e-12);
    }

    /// The absorption time is at least the slow-mode relaxation time
    /// 1/(nu kappa0^2) and shrinks (weakly) as the ball grows with G.
    #[test]
    fn absorption_time_floor_and_monotonicity(g in 0.1..10.0f64, u0 in 0.0..100.0f64, nu in 0.2..3.0f64) {
        let t = absorption_time(u0, g, nu, 1.0).unwrap();
        prop_assert!(t >= 1.0 / nu - 1e-12);
        let t_big = absorption_time(u0, 2.0 * g, nu, 1.0).unwrap();
        prop_assert!(t_big <= t + 1e-12);
    }

    /// min_determining_n returns the smallest integer strictly above c_L G.
    #[test]
    fn min_determining_n_is_tight(g in 0.01..100.0f64) {
        let k = Constants::default();
        let n = min_determining_n(g, &k);
        prop_assert!((n as f64) > k.c_l * g);
        if n > 1 {
            prop_assert!(((n - 1) as f64) <= k.c_l * g);
        }
    }

    /// ln(eN) = 1 + ln N is increasing and equals 1 at N = 1.
    #[test]
    fn log_factor_shape(n in 1u32..10000) {
        prop_assert!(ln_e_n(n) >= 1.0);
        prop_assert!(ln_e_n(n + 1) > ln_e_n(n));
    }

    /// The nudging flags appear exactly when mu is supplied, and alpha
    /// matches its closed form.
    #[test]
    fn nudging_flags_gated_on_mu(g in 0.1..5.0f64, n in 1u32..100, mu in 0.0..50.0f64) {
        let plain = check_conditions(&input(g, n, None));
        prop_assert!(plain.alpha.is_none() && plain.flags.mu_damping.is_none());
        let rep = check_conditions(&input(g, n, Some(mu)));
        let k = Constants::default();
        let alpha = rep.alpha.unwrap();
        prop_assert!((alpha - (1.0 - 2.0 * k.c_l * k.c_l * g * g + 2.0 * mu)).abs() < 1e-12);
        prop_assert_eq!(rep.flags.mu_damping.unwrap(), alpha > 0.0);
        prop_assert_eq!(
            rep.flags.mu_scale.unwrap(),
            mu / ((n as f64 + 1.0) * (n as f64 + 1.0)) <= 0.25
        );
    }

    /// CSV rows are stable: re-evaluating the same input reproduces the
    /// row byte for byte.
    #[test]
    fn report_rows_are_deterministic(g in 0.1..10.0f64, n in 1u32..500) {
        let a = check_conditions(&input(g, n, Some(1.5))).csv_row();
        let b = check_conditions(&input(g, n, Some(1.5))).csv_row();
        prop_assert_eq!(a, b);
    }
}

use std::f64::consts::PI;

use chemolab::kernelmath::{identity_sides, monotone_chain, neta_gap};
use chemolab::model::{ChiProfile, DimensionConstants};
use chemolab::radialsolver::{
    choose_k, comparison_violation, init_mass_profile, step, supersolution, InitialDensity, MassProfile, RadialGrid,
    SolverConfig,
};
use proptest::prelude::*;

fn pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-3.0..3.0f64, dim), prop::collection::vec(-3.0..3.0f64, dim))
        .prop_filter("distinct points", |(x, y)| x != y)
}

fn any_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=5).prop_flat_map(pair)
}

fn profiles() -> impl Strategy<Value = ChiProfile> {
    prop_oneof![
        (0.1..5.0f64).prop_map(|chi0| ChiProfile::Constant { chi0 }),
        Just(ChiProfile::Saturating),
        Just(ChiProfile::Arctan),
        Just(ChiProfile::Anisotropic),
    ]
}

fn bump(n: usize) -> impl Strategy<Value = InitialDensity> {
    let global = 2.0 * n as f64 * DimensionConstants::new(n).unwrap().omega_n;
    (0.05..0.95f64, 0.15..0.5f64).prop_map(move |(f, width)| InitialDensity::GaussianBump { mass: f * global, width })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn polarization_identity_holds(profile in profiles(), (x, y) in any_pair()) {
        let s = identity_sides(&profile, &x, &y).unwrap();
        prop_assert!(s.relative_residual() <= 1e-12, "{:?}", s);
    }

    #[test]
    fn monotone_chain_bounds(monotone in prop_oneof![Just(ChiProfile::Saturating), Just(ChiProfile::Arctan)],
                             (x, y) in any_pair()) {
        let c = monotone_chain(&monotone, &x, &y).unwrap();
        prop_assert!(c.gap() >= -1e-12, "{:?}", c);
        prop_assert!(c.half_sum >= c.chi_origin - 1e-12);
    }

    #[test]
    fn neta_gap_nonnegative(p in 2.0..6.0f64, (x, y) in any_pair()) {
        prop_assert!(neta_gap(p, &x, &y).unwrap() >= -1e-12);
    }

    #[test]
    fn supersolution_below_ceiling_and_increasing(n in 2usize..=5, k in 1e-3..1e3f64, chi in 0.1..10.0f64,
                                                  r in 0.0..2.0f64, dr in 1e-6..0.5f64) {
        let ceiling = 2.0 * n as f64 * DimensionConstants::new(n).unwrap().omega_n / chi;
        let a = supersolution(r, k, n, chi);
        let b = supersolution(r + dr, k, n, chi);
        prop_assert!(a >= 0.0 && a < ceiling && b < ceiling);
        prop_assert!(b >= a);
    }

    #[test]
    fn chosen_k_dominates(n in 2usize..=4, frac in 0.01..0.99f64, sup_frac in 0.0..0.99f64) {
        let dims = DimensionConstants::new(n).unwrap();
        let ceiling = 2.0 * n as f64 * dims.omega_n;
        let theta = frac * ceiling;
        let u0_sup = sup_frac * ceiling / dims.alpha_n;
        let k = choose_k(theta, u0_sup, 1.0, n, 1.0, 2.0).unwrap();
        prop_assert!(theta < supersolution(1.0, k, n, 1.0));
        for i in 0..=64 {
            let r = i as f64 / 64.0;
            prop_assert!(dims.alpha_n * u0_sup * r.powi(n as i32) <= supersolution(r, k, n, 1.0) * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step_keeps_endpoints_and_order(n in 2usize..=3, d in bump(2), dt in 1e-6..1e-4f64, steps in 1usize..20) {
        let grid = RadialGrid::new(1.0, 127).unwrap();
        let mut p = init_mass_profile(&d, &grid, n).unwrap();
        let theta = p.theta;
        let config = SolverConfig::default();
        for _ in 0..steps {
            let (next, diag) = step(&p, &config, dt).unwrap();
            p = next;
            prop_assert!(diag.monotonicity_violation <= 1e-10 * theta);
        }
        prop_assert_eq!(p.values[0], 0.0);
        prop_assert_eq!(*p.values.last().unwrap(), theta);
        prop_assert!(p.values.windows(2).all(|w| w[1] >= w[0] - 1e-10 * theta));
        prop_assert!(p.values.iter().all(|&m| (0.0..=theta).contains(&m)));
    }

    #[test]
    fn exact_barrier_has_no_violation(n in 2usize..=4, k in 0.1..50.0f64) {
        let grid = RadialGrid::new(1.0, 255).unwrap();
        let p = MassProfile::from_fn(grid, n, |r| supersolution(r, k, n, 1.0)).unwrap();
        prop_assert_eq!(comparison_violation(&p, k, 1.0), 0.0);
        let scaled = MassProfile::from_fn(grid, n, |r| 0.5 * supersolution(r, k, n, 1.0)).unwrap();
        prop_assert_eq!(comparison_violation(&scaled, k, 1.0), 0.0);
    }

    #[test]
    fn initial_mass_is_exact(d in bump(2)) {
        let grid = RadialGrid::new(1.0, 255).unwrap();
        let p = init_mass_profile(&d, &grid, 2).unwrap();
        prop_assert_eq!(p.theta, d.mass());
        prop_assert!(p.theta < 8.0 * PI * 2.0);
    }
}

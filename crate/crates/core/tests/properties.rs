//! Property tests for the structural facts each module relies on.

use std::sync::OnceLock;

use dyadic_bellman::davis::interior_slope;
use dyadic_bellman::dyadic::{inf_oracle_bollobas_by_depth, sup_oracle_davis, sup_oracle_davis_by_depth};
use dyadic_bellman::envelope::{bellman_step_sup, solve_greatest_subsolution, solve_heat_envelope, SweepOrder};
use dyadic_bellman::mc::{hitting_time_moments, simulate_t_a, McConfig};
use dyadic_bellman::reduced::SENTINEL;
use dyadic_bellman::specfn::{davis_constant, n_alpha, n_alpha_deriv, psi, DerivOrder, SeriesParams};
use dyadic_bellman::{Axis, BollobasBellman, DavisBellman, Grid2D, ObstacleSpec, OracleGrid, SolverConfig};
use proptest::prelude::*;

const ALPHAS: [f64; 5] = [2.0, 2.5, 3.0, 4.0, 6.0];

fn params(alpha: f64) -> SeriesParams<f64> {
    SeriesParams::new(alpha).unwrap()
}

fn c(alpha: f64) -> f64 {
    davis_constant(alpha).unwrap().c_alpha
}

fn axis(min: f64, max: f64, n: usize) -> Axis {
    Axis::new(min, max, n).unwrap()
}

/// Converged Davis envelope for α = 3 on a coarse lattice, shared by tests.
fn coarse_davis_envelope() -> &'static Grid2D {
    static GRID: OnceLock<Grid2D> = OnceLock::new();
    GRID.get_or_init(|| {
        let (p, q) = (axis(-3.0, 3.0, 121), axis(0.0, 3.0, 121));
        let obstacle = ObstacleSpec::davis(3.0, c(3.0));
        let cfg = SolverConfig::recommended(&obstacle, &p);
        let (g, r) = solve_heat_envelope(&obstacle, p, q, &cfg, Some((0.0, 1.0))).unwrap();
        assert!(r.converged);
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermite_ode_residual(i in 0usize..5, x in 0.0f64..2.0) {
        let p = params(ALPHAS[i]);
        let n = n_alpha(&p, x).unwrap();
        let d1 = n_alpha_deriv(&p, x, DerivOrder::First).unwrap();
        let d2 = n_alpha_deriv(&p, x, DerivOrder::Second).unwrap();
        prop_assert!((d2 - x * d1 + ALPHAS[i] * n).abs() <= 1e-9);
    }

    #[test]
    fn zeros_decrease_in_alpha(a in 2.0f64..10.0, gap in 1e-3f64..2.0) {
        prop_assert!(c(a + gap) < c(a));
    }

    #[test]
    fn sign_structure_below_first_zero(a in 2.0f64..10.0, s in 0.0f64..=1.0) {
        let p = params(a);
        let x = s * c(a);
        prop_assert!(n_alpha_deriv(&p, x, DerivOrder::First).unwrap() <= 1e-12);
        prop_assert!(n_alpha_deriv(&p, x, DerivOrder::Second).unwrap() <= 1e-12);
    }

    #[test]
    fn lower_index_dominates(a in 2.5f64..10.0, s in 0.0f64..=1.0) {
        let x = s * c(a);
        let hi = n_alpha(&params(a - 2.0), x).unwrap();
        let lo = n_alpha(&params(a), x).unwrap();
        prop_assert!(hi >= lo - 1e-12 && lo >= -1e-12);
    }

    #[test]
    fn psi_over_x_decreasing(x in 1e-3f64..1.0, dx in 1e-4f64..0.5) {
        let y = (x + dx).min(1.0);
        prop_assume!(y > x);
        prop_assert!(psi(y) / y < psi(x) / x);
    }

    #[test]
    fn davis_even_and_increasing_in_q(i in 0usize..5, p in -3.0f64..3.0, q in 0.0f64..3.0, dq in 0.0f64..1.0) {
        let b = DavisBellman::new(ALPHAS[i]).unwrap();
        prop_assert_eq!(b.value(p, q), b.value(-p, q));
        prop_assert!(b.value(p, q + dq) >= b.value(p, q) - 1e-12 * (1.0 + b.value(p, q).abs()));
    }

    #[test]
    fn davis_profile_is_c1(a in 2.0f64..10.0) {
        let b = DavisBellman::new(a).unwrap();
        let ca = b.c_alpha();
        // value: series branch at c_α is zero, the outer branch vanishes there too
        prop_assert!((b.kappa() * n_alpha(b.series_params(), ca).unwrap()).abs() <= 1e-12);
        let outer = -a * ca.powf(a - 1.0);
        prop_assert!((interior_slope(&b, ca).unwrap() - outer).abs() <= 1e-8);
    }

    #[test]
    fn derivative_ratio_nonincreasing(a in 2.0f64..10.0, s in 0.01f64..1.0, ds in 1e-3f64..0.5) {
        let p = params(a);
        let ca = c(a);
        let (x, y) = (s * ca, ((s + ds).min(1.0)) * ca);
        prop_assume!(y > x);
        let g = |x: f64| -n_alpha_deriv(&p, x, DerivOrder::First).unwrap() / x.powf(a - 1.0);
        prop_assert!(g(y) <= g(x) * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn bollobas_shape(x in -3.0f64..3.0, lambda in 0.0f64..4.0, dl in 0.0f64..1.0, h in 1e-3f64..0.5) {
        let b = BollobasBellman::new();
        prop_assert!(b.value(0.0, lambda) <= b.value(x, lambda) + 1e-15);
        prop_assert!(b.value(x, lambda + dl) >= b.value(x, lambda) - 1e-15);
        let mid = b.value(x, lambda);
        prop_assert!(b.value(x - h, lambda) + b.value(x + h, lambda) - 2.0 * mid >= -1e-12);
    }

    #[test]
    fn bollobas_reduced_ode(t in -0.9f64..0.9) {
        let b = BollobasBellman::new();
        let z = |t: f64| b.value(t, 1.0);
        let h = 1e-3;
        let d1 = (z(t - 2.0 * h) - 8.0 * z(t - h) + 8.0 * z(t + h) - z(t + 2.0 * h)) / (12.0 * h);
        let d2 = (-z(t - 2.0 * h) + 16.0 * z(t - h) - 30.0 * z(t) + 16.0 * z(t + h) - z(t + 2.0 * h)) / (12.0 * h * h);
        prop_assert!((d2 + t * d1 - z(t)).abs() <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_depth_monotone(p in -1.5f64..1.5, q in 0.2f64..2.0, x in -1.5f64..1.5, l in 0.1f64..2.0) {
        let cst = davis_constant(3.0).unwrap();
        let up = sup_oracle_davis_by_depth(&cst, p, q, 8, &OracleGrid::davis_default()).unwrap();
        prop_assert!(up.windows(2).all(|w| w[1] >= w[0]));
        let down = inf_oracle_bollobas_by_depth(x, l, 8, &OracleGrid::bollobas_default()).unwrap();
        prop_assert!(down.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn oracle_below_envelope_and_closed_form(i in 20usize..101, j in 20usize..81) {
        let g = coarse_davis_envelope();
        let (p, q) = (g.p.point(i), g.q.point(j));
        let cst = davis_constant(3.0).unwrap();
        let oracle = sup_oracle_davis(&cst, p, q, 8, &OracleGrid::davis_default()).unwrap();
        let u = DavisBellman::new(3.0).unwrap().value(p, q);
        // slack for lattice interpolation on both sides
        let tol = 1e-3 * (1.0 + q.powi(3));
        prop_assert!(oracle <= g.at(i, j) + tol);
        prop_assert!(oracle <= u + tol);
    }

    #[test]
    fn sup_iterates_monotone_and_above_obstacle(alpha in 2.0f64..4.0, factor in 0.5f64..1.0) {
        let (p, q) = (axis(-2.0, 2.0, 21), axis(0.0, 2.0, 21));
        let obstacle = ObstacleSpec::davis(alpha, factor * c(alpha));
        let cfg = SolverConfig { max_iters: 40, ..SolverConfig::defaults_for(&p) };
        let (g, r) = solve_heat_envelope(&obstacle, p, q, &cfg, None).unwrap();
        prop_assert!(r.monotone);
        for (j, qv) in q.points().enumerate() {
            for (i, pv) in p.points().enumerate() {
                prop_assert!(g.at(i, j) >= obstacle.eval(pv, qv));
            }
        }
    }

    #[test]
    fn inf_iterates_monotone_and_below_obstacle(n in 11usize..25) {
        let (x, l) = (axis(-2.0, 2.0, n), axis(0.0, 2.0, n));
        let obstacle = ObstacleSpec::bollobas_range();
        let cfg = SolverConfig { max_iters: 40, ..SolverConfig::defaults_for(&x) };
        let (g, r) = solve_greatest_subsolution(&obstacle, x, l, &cfg, None).unwrap();
        prop_assert!(r.monotone);
        for (j, lv) in l.points().enumerate() {
            for (i, xv) in x.points().enumerate() {
                prop_assert!(g.at(i, j) <= obstacle.eval(xv, lv).min(SENTINEL));
            }
        }
    }

    #[test]
    fn richer_step_set_raises_sup_values(keep in 2usize..20) {
        let (p, q) = (axis(-2.0, 2.0, 21), axis(0.0, 2.0, 21));
        let obstacle = ObstacleSpec::davis(3.0, 0.9 * c(3.0));
        let full = SolverConfig { max_iters: 30, ..SolverConfig::defaults_for(&p) };
        let sub = SolverConfig { a_set: full.a_set.iter().step_by(keep).copied().collect(), ..full.clone() };
        let (gf, _) = solve_heat_envelope(&obstacle, p, q, &full, None).unwrap();
        let (gs, _) = solve_heat_envelope(&obstacle, p, q, &sub, None).unwrap();
        for (f, s) in gf.values.iter().zip(&gs.values) {
            prop_assert!(f >= s);
        }
    }

    #[test]
    fn mc_seed_determinism(seed in any::<u64>()) {
        let cfg = McConfig { n_paths: 64, dt: 1e-3, seed, a_values: vec![0.5], bootstrap_resamples: 20, ..McConfig::default() };
        prop_assert_eq!(simulate_t_a(&cfg, 3.0).unwrap(), simulate_t_a(&cfg, 3.0).unwrap());
        prop_assert_eq!(hitting_time_moments(0.7, &cfg).unwrap(), hitting_time_moments(0.7, &cfg).unwrap());
    }
}

#[test]
fn converged_grid_is_a_fixed_point() {
    let (p, q) = (axis(-2.0, 2.0, 41), axis(0.0, 2.0, 41));
    let obstacle = ObstacleSpec::davis(3.0, 0.9 * c(3.0));
    let cfg = SolverConfig { order: SweepOrder::Jacobi, ..SolverConfig::defaults_for(&p) };
    let (g, r) = solve_heat_envelope(&obstacle, p, q, &cfg, None).unwrap();
    assert!(r.converged);
    let next = bellman_step_sup(&g, &obstacle, &cfg).unwrap();
    let change = g.values.iter().zip(&next.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(change <= cfg.stop_tol, "{change}");
}

#[test]
fn refinement_does_not_raise_values() {
    // values at shared points may move by interpolation error only
    let obstacle = ObstacleSpec::davis(3.0, c(3.0));
    let solve = |n: usize| {
        let (p, q) = (axis(-3.0, 3.0, n), axis(0.0, 3.0, n));
        let cfg = SolverConfig::recommended(&obstacle, &p);
        solve_heat_envelope(&obstacle, p, q, &cfg, Some((0.0, 1.0))).unwrap().0
    };
    let (coarse, fine) = (solve(61), solve(121));
    let b = DavisBellman::new(3.0).unwrap();
    for j in 0..61 {
        for i in 0..61 {
            let (pv, qv) = (coarse.p.point(i), coarse.q.point(j));
            let bound = 2e-2 * b.c_alpha().powi(3) * qv.powi(3).max(1.0);
            assert!(fine.at(2 * i, 2 * j) <= coarse.at(i, j) + bound, "({pv}, {qv})");
        }
    }
}

#[test]
fn exit_time_matches_brownian_scaling() {
    let cfg = McConfig { n_paths: 20_000, dt: 1e-4, seed: 17, ..McConfig::default() };
    for a in [0.5, 1.0] {
        let h = hitting_time_moments(a, &cfg).unwrap();
        // E τ = P₊ E(τ|+) + P₋ E(τ|−)
        let e = h.p_plus.value * h.e_tau_given_plus_extrapolated.value + h.p_minus.value * h.e_tau_given_minus_extrapolated.value;
        let se = h.e_tau_given_plus_extrapolated.se.max(h.e_tau_given_minus_extrapolated.se);
        assert!((e - a * a).abs() <= 3.0 * se, "a={a}: {e} ± {se}");
        assert!(h.p_plus.z(0.5).abs() <= 3.0);
    }
}

#[test]
fn halving_dt_stays_within_bias_model() {
    // overshoot model: E τ(dt) ≈ a² + 2aρ√dt with ρ = ζ(1/2)/√(2π) magnitude 0.5826
    let (a, rho) = (1.0, 0.5826);
    let run = |dt: f64| hitting_time_moments(a, &McConfig { n_paths: 20_000, dt, seed: 23, ..McConfig::default() }).unwrap();
    let (coarse, fine) = (run(4e-4), run(2e-4));
    let shift = 2.0 * a * rho * (4e-4f64.sqrt() - 2e-4f64.sqrt());
    for (c, f) in [
        (coarse.e_tau_given_plus, fine.e_tau_given_plus),
        (coarse.e_tau_given_minus, fine.e_tau_given_minus),
    ] {
        let se = (c.se.powi(2) + f.se.powi(2)).sqrt();
        assert!((c.value - f.value).abs() <= shift + 3.0 * se, "{c:?} {f:?}");
    }
}

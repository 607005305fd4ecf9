//! The Bollobás weak-type Bellman function
//!
//! ```text
//! B(x, λ) = √λ Ψ(|x|/√λ) / Ψ(1)   for x² ≤ λ,
//!         = |x|                    for x² ≥ λ,
//! ```
//!
//! with checks of the reversed main inequality
//! `2B(x,λ) ≤ B(x−a, λ−a²) + B(x+a, λ−a²)` split into the three geometric
//! cases, and of the scalar facts the case analysis rests on.

use serde::{Deserialize, Serialize};

use crate::davis::CLOSED_FORM_TOL;
use crate::error::{Error, Result};
use crate::fd::{self, Stencil};
use crate::lattice::Axis;
use crate::poly::{self, BOLLOBAS_QUARTIC};
use crate::quad::adaptive_simpson;
use crate::report::{MarginTracker, VerificationReport};
use crate::scalar::Scalar;
use crate::specfn::{psi, psi_inverse};

/// Bisection tolerance for `Ψ⁻¹`.
pub const PSI_INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BollobasBellman<T> {
    psi1: T,
}

impl<T: Scalar> Default for BollobasBellman<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> BollobasBellman<T> {
    pub fn new() -> Self {
        Self { psi1: psi(T::one()) }
    }

    /// `Ψ(1)`.
    pub fn psi1(&self) -> T {
        self.psi1
    }

    /// `B(x, λ)`. Any `λ ≤ x²`, including negative `λ`, gives `|x|`.
    pub fn value(&self, x: T, lambda: T) -> T {
        let ax = x.abs();
        if ax * ax >= lambda {
            return ax;
        }
        let r = lambda.sqrt();
        r * psi(ax / r) / self.psi1
    }

    /// `O(x, λ) = |x|` on `x² ≥ λ`, `+∞` inside the parabola.
    pub fn obstacle(&self, x: T, lambda: T) -> T {
        if x * x >= lambda {
            x.abs()
        } else {
            T::infinity()
        }
    }
}

/// Sharp constant `C` in `|{S f > λ}| ≤ C ⟨|f|⟩/λ`-type weak estimates,
/// obtained from homogeneity as `√λ / B(0, λ) = Ψ(1)`.
pub fn weak_type_constant<T: Scalar>() -> T {
    psi(T::one())
}

/// Which children of a step leave the parabola region `x² ≤ λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepCase {
    /// Both children inside.
    BothInside,
    /// The child nearer the axis is on or beyond the parabola (so both are).
    BothOutside,
    /// Near child inside, far child outside.
    Mixed,
}

/// Classifies the step `(x, λ) → (x ± a, λ − a²)` after reflecting to
/// `x, a ≥ 0`.
pub fn classify_step<T: Scalar>(x: T, lambda: T, a: T) -> StepCase {
    let (x, a) = (x.abs(), a.abs());
    let next = lambda - a * a;
    let near = x - a;
    let far = x + a;
    if near * near >= next {
        StepCase::BothOutside
    } else if far * far >= next {
        StepCase::Mixed
    } else {
        StepCase::BothInside
    }
}

/// `(x, λ, s)` sampling with step `a = s√λ`, so `a² < λ` whenever `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BollobasLattice<T> {
    pub x: Axis<T>,
    pub lambda: Axis<T>,
    pub s: Axis<T>,
}

impl<T: Scalar> BollobasLattice<T> {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.min <= T::zero() {
            return Err(Error::Domain("lambda axis must be positive".into()));
        }
        if self.s.min <= -T::one() || self.s.max >= T::one() {
            return Err(Error::Domain("relative step s must satisfy |s| < 1".into()));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for BollobasLattice<T> {
    fn default() -> Self {
        Self {
            x: Axis { min: T::lit(-1.5), max: T::lit(1.5), n: 61 },
            lambda: Axis { min: T::lit(0.05), max: T::lit(2.0), n: 40 },
            s: Axis { min: T::lit(-0.98), max: T::lit(0.98), n: 61 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BollobasInequalityReport {
    pub overall: VerificationReport,
    pub both_inside: VerificationReport,
    pub both_outside: VerificationReport,
    pub mixed: VerificationReport,
}

impl BollobasInequalityReport {
    pub fn reports(&self) -> [&VerificationReport; 4] {
        [&self.overall, &self.both_inside, &self.both_outside, &self.mixed]
    }
}

/// Worst value of `B(x−a, λ−a²) + B(x+a, λ−a²) − 2B(x, λ)`, overall and per case.
pub fn check_main_inequality_b<T: Scalar, B: Fn(T, T) -> T>(
    b: B,
    lattice: &BollobasLattice<T>,
    tol: T,
) -> Result<BollobasInequalityReport> {
    lattice.validate()?;
    let mut overall = MarginTracker::new("bollobas.main_inequality");
    let mut cases = [
        MarginTracker::new("bollobas.main_inequality.both_inside"),
        MarginTracker::new("bollobas.main_inequality.both_outside"),
        MarginTracker::new("bollobas.main_inequality.mixed"),
    ];
    let two = T::lit(2.0);
    for lambda in lattice.lambda.points() {
        let root = lambda.sqrt();
        for s in lattice.s.points() {
            let a = s * root;
            let next = lambda - a * a;
            for x in lattice.x.points() {
                let margin = b(x - a, next) + b(x + a, next) - two * b(x, lambda);
                let loc = [x.as_f64(), lambda.as_f64(), a.as_f64()];
                overall.observe(margin.as_f64(), &loc);
                let idx = match classify_step(x, lambda, a) {
                    StepCase::BothInside => 0,
                    StepCase::BothOutside => 1,
                    StepCase::Mixed => 2,
                };
                cases[idx].observe(margin.as_f64(), &loc);
            }
        }
    }
    let tol = tol.as_f64();
    let [inside, outside, mixed] = cases;
    Ok(BollobasInequalityReport {
        overall: overall.finish(tol),
        both_inside: inside.finish(tol),
        both_outside: outside.finish(tol),
        mixed: mixed.finish(tol),
    })
}

/// `X(x, τ) = (x + τ)/√(1 − τ²)`.
pub fn x_map<T: Scalar>(x: T, tau: T) -> T {
    (x + tau) / (T::one() - tau * tau).sqrt()
}

/// Mean of `e^{−s²/2}` over `[X₋, X₊]` minus the mean of its endpoint values,
/// for `X± = X(x, ±τ)`.
pub fn case1_concavity_margin<T: Scalar>(x: T, tau: T) -> T {
    let g = |s: T| (-s * s * T::lit(0.5)).exp();
    let (lo, hi) = (x_map(x, -tau), x_map(x, tau));
    let ends = (g(lo) + g(hi)) * T::lit(0.5);
    let width = hi - lo;
    let mean = if width.abs() <= T::epsilon() {
        g((lo + hi) * T::lit(0.5))
    } else {
        adaptive_simpson(g, lo, hi, T::lit(1e-15).max(T::epsilon()) * width.abs()) / width
    };
    mean - ends
}

/// Samples `(x, τ)` on the given axes with `|τ| < 1`, keeping those whose
/// `X±` lie in `[−1, 1]`.
pub fn check_case1_concavity<T: Scalar>(x_axis: &Axis<T>, tau_axis: &Axis<T>, tol: T) -> Result<VerificationReport> {
    if tau_axis.min <= -T::one() || tau_axis.max >= T::one() {
        return Err(Error::Domain("tau must satisfy |tau| < 1".into()));
    }
    let mut tracker = MarginTracker::new("bollobas.case1_concavity");
    let one = T::one();
    for tau in tau_axis.points() {
        for x in x_axis.points() {
            let (lo, hi) = (x_map(x, -tau), x_map(x, tau));
            if lo.abs() > one || hi.abs() > one {
                continue;
            }
            tracker.observe(case1_concavity_margin(x, tau).as_f64(), &[x.as_f64(), tau.as_f64()]);
        }
    }
    Ok(tracker.finish(tol.as_f64()))
}

fn sample<T: Scalar>(lo: T, hi: T, n: usize) -> impl Iterator<Item = T> {
    (0..n).map(move |i| {
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1)
        }
    })
}

/// Scalar inequalities behind the case analysis, each on `n` samples:
///
/// * `Ψ(x) ≥ Ψ(1) x` on `[0, 1]`;
/// * `((x + √(2−x²))/2)(2Ψ(x)/Ψ(1) − x) ≤ 1` on `[0, 1]`;
/// * `t − √(1−t²) ≤ Ψ⁻¹(Ψ(1) t)` on `[1/√2, 1]`;
/// * `Ψ(1) > 29/28` and `41/29 < √2 < 17/12`;
/// * the quartic `246x⁴ − 486x³ + 233x² − 12x − 8` has no root in `(0, 1)`.
pub fn check_scalar_inequalities(n: usize) -> Result<Vec<VerificationReport>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let psi1: f64 = psi(1.0);
    let mut out = Vec::new();

    let mut ori = MarginTracker::new("bollobas.psi_above_chord");
    for x in sample(0.0f64, 1.0, n) {
        ori.observe(psi(x) - psi1 * x, &[x]);
    }
    out.push(ori.finish(CLOSED_FORM_TOL));

    let mut sami = MarginTracker::new("bollobas.mixed_case_bound");
    for x in sample(0.0f64, 1.0, n) {
        let lhs = (x + (2.0 - x * x).sqrt()) * 0.5 * (2.0 * psi(x) / psi1 - x);
        sami.observe(1.0 - lhs, &[x]);
    }
    out.push(sami.finish(CLOSED_FORM_TOL));

    let mut reduction = MarginTracker::new("bollobas.outside_case_reduction");
    for t in sample(std::f64::consts::FRAC_1_SQRT_2, 1.0, n) {
        // rounding can push Ψ(1)·t a hair past Ψ(1) at t = 1
        let target = (psi1 * t).min(psi1);
        let inv = psi_inverse(target, PSI_INVERSE_TOL)?;
        let xt = t - (1.0 - t * t).max(0.0).sqrt();
        reduction.observe(inv - xt, &[t]);
    }
    out.push(reduction.finish(CLOSED_FORM_TOL));

    out.push(VerificationReport::from_margin("bollobas.psi1_lower_bound", psi1 - 29.0 / 28.0, vec![1.0], 0.0));
    // 41² < 2·29² and 17² > 2·12², decided in integers
    let lower = 2 * 29 * 29 - 41 * 41;
    let upper = 17 * 17 - 2 * 12 * 12;
    out.push(VerificationReport::from_margin(
        "bollobas.sqrt2_rational_bounds",
        f64::from(lower.min(upper)),
        vec![41.0 / 29.0, 17.0 / 12.0],
        0.0,
    ));
    let quartic = poly::rational_poly_from_integers(&BOLLOBAS_QUARTIC);
    let zero = poly::rational(0.0).unwrap();
    let one = poly::rational(1.0).unwrap();
    let roots = poly::sturm_root_count(&quartic, &zero, &one)?;
    out.push(VerificationReport::from_margin("bollobas.quartic_root_free", -(roots as f64), vec![0.0, 1.0], 0.0));
    Ok(out)
}

/// Convexity and evenness in `x`, minimum at `x = 0`, monotonicity in `λ`.
pub fn check_shape<T: Scalar>(bell: &BollobasBellman<T>, x_axis: &Axis<T>, lambda_axis: &Axis<T>, tol: T) -> Vec<VerificationReport> {
    let mut convex = MarginTracker::new("bollobas.convex_in_x");
    let mut minimal = MarginTracker::new("bollobas.minimal_at_zero");
    let mut monotone = MarginTracker::new("bollobas.increasing_in_lambda");
    let mut range = MarginTracker::new("bollobas.range");
    let xs: Vec<T> = x_axis.points().collect();
    for lambda in lambda_axis.points() {
        let values: Vec<T> = xs.iter().map(|&x| bell.value(x, lambda)).collect();
        let at_zero = bell.value(T::zero(), lambda);
        for i in 0..xs.len() {
            let loc = [xs[i].as_f64(), lambda.as_f64()];
            if i > 0 && i + 1 < xs.len() {
                convex.observe((values[i - 1] - T::lit(2.0) * values[i] + values[i + 1]).as_f64(), &loc);
            }
            minimal.observe((values[i] - at_zero).as_f64(), &loc);
            let cap = xs[i].abs().max(lambda.max(T::zero()).sqrt());
            range.observe((cap - values[i]).min(values[i] - xs[i].abs()).as_f64(), &loc);
        }
    }
    for x in xs.iter().copied() {
        let mut prev = T::neg_infinity();
        for lambda in lambda_axis.points() {
            let v = bell.value(x, lambda);
            monotone.observe((v - prev).as_f64(), &[x.as_f64(), lambda.as_f64()]);
            prev = v;
        }
    }
    let tol = tol.as_f64();
    vec![convex.finish(tol), minimal.finish(tol), monotone.finish(tol), range.finish(tol)]
}

/// `|b'' + τ b' − b|` for `b(τ) = B(τ, 1)` on samples inside `(−1, 1)`.
pub fn check_reduced_ode<T: Scalar>(bell: &BollobasBellman<T>, tau_axis: &Axis<T>, tol: T) -> VerificationReport {
    let h = T::lit(1e-3);
    let stencil = Stencil::Fourth;
    let reach = h * T::from_usize_lossy(stencil.reach());
    let b = |t: T| bell.value(t, T::one());
    let mut tracker = MarginTracker::new("bollobas.reduced_ode");
    for t in tau_axis.points() {
        if t.abs() + reach >= T::one() {
            continue;
        }
        let r = fd::d2(b, t, h, stencil) + t * fd::d1(b, t, h, stencil) - b(t);
        tracker.observe(-r.abs().as_f64(), &[t.as_f64()]);
    }
    tracker.finish(tol.as_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PSI1: f64 = 1.462_155_051_604_782_2;

    #[test]
    fn spot_values() {
        let b = BollobasBellman::<f64>::new();
        assert!((b.value(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((b.value(0.0, 1.0) - 0.683_921_995_073_268_2).abs() < 1e-12);
        assert_eq!(b.value(2.0, 1.0), 2.0);
        assert_eq!(b.value(-2.0, 1.0), 2.0);
        assert!((b.value(0.0, 1.0) * weak_type_constant::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi1_matches_reference() {
        assert!((weak_type_constant::<f64>() - PSI1).abs() < 1e-13);
        assert!((weak_type_constant::<f64>() - 1.462_155_051_5).abs() < 1e-9);
        assert!(weak_type_constant::<f64>() >= 2f64.sqrt());
    }

    #[test]
    fn continuous_across_parabola() {
        let b = BollobasBellman::<f64>::new();
        for &lambda in &[0.3, 1.0, 2.7] {
            let edge = f64::sqrt(lambda);
            let inside = b.value(edge * (1.0 - 1e-12), lambda);
            assert!((inside - edge).abs() < 1e-10);
        }
    }

    #[test]
    fn obstacle_branches() {
        let b = BollobasBellman::<f64>::new();
        assert_eq!(b.obstacle(2.0, 1.0), 2.0);
        assert!(b.obstacle(0.5, 1.0).is_infinite());
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_step(0.2, 1.0, 0.3), StepCase::BothInside);
        assert_eq!(classify_step(0.8, 1.0, 0.65), StepCase::Mixed);
        assert_eq!(classify_step(0.8, 1.0, 0.99), StepCase::BothOutside);
        assert_eq!(classify_step(-0.8, 1.0, -0.65), StepCase::Mixed);
    }

    #[test]
    fn case_examples_have_nonnegative_margin() {
        let b = BollobasBellman::<f64>::new();
        let m = |x: f64, lambda: f64, a: f64| b.value(x - a, lambda - a * a) + b.value(x + a, lambda - a * a) - 2.0 * b.value(x, lambda);
        assert_eq!(m(0.4, 1.0, 0.0), 0.0);
        assert!(m(0.2, 1.0, 0.3) >= 0.0);
        assert!(m(0.8, 1.0, 0.65) >= 0.0);
    }

    #[test]
    fn main_inequality_default_lattice_hits_all_cases() {
        let b = BollobasBellman::<f64>::new();
        let r = check_main_inequality_b(|x, l| b.value(x, l), &BollobasLattice::default(), CLOSED_FORM_TOL).unwrap();
        for rep in r.reports() {
            assert!(rep.passed, "{rep:?}");
            assert!(rep.samples >= 1000, "{rep:?}");
        }
    }

    #[test]
    fn main_inequality_negative_control() {
        // a concave-in-x candidate cannot be a subsolution
        let r = check_main_inequality_b(|x: f64, l: f64| l.max(0.0).sqrt() - x.abs(), &BollobasLattice::default(), CLOSED_FORM_TOL).unwrap();
        assert!(!r.overall.passed);
    }

    #[test]
    fn lattice_validation() {
        let bad = BollobasLattice { s: Axis::new(-1.0, 0.5, 3).unwrap(), ..BollobasLattice::<f64>::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn case1_concavity() {
        assert_eq!(case1_concavity_margin(0.3, 0.0), 0.0);
        assert!(case1_concavity_margin(0.5, 0.3) >= 0.0);
        // X± = ±1 exactly at x = 0, τ = 1/√2
        let tau = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x_map(0.0, tau) - 1.0).abs() < 1e-15);
        let m = case1_concavity_margin(0.0, tau);
        let oracle = 0.855_624_391_892_148_8 - (-0.5f64).exp();
        assert!(m > 0.0 && (m - oracle).abs() < 1e-12, "{m} {oracle}");
        let r = check_case1_concavity(&Axis::new(-1.0, 1.0, 81).unwrap(), &Axis::new(0.0, 0.95, 60).unwrap(), 1e-12).unwrap();
        assert!(r.passed && r.samples > 500, "{r:?}");
    }

    #[test]
    fn scalar_inequalities() {
        let reports = check_scalar_inequalities(10_000).unwrap();
        assert_eq!(reports.len(), 6);
        for r in &reports {
            assert!(r.passed, "{r:?}");
        }
        // equality at x = 1 in the mixed-case bound, and at t = 1 in the reduction
        assert!(reports[1].worst_violation.abs() < 1e-12);
        assert!(reports[2].worst_violation.abs() < 1e-9);
        assert!(reports[0].worst_violation.abs() < 1e-15);
    }

    #[test]
    fn shape_properties() {
        let b = BollobasBellman::<f64>::new();
        for r in check_shape(&b, &Axis::new(-2.0, 2.0, 161).unwrap(), &Axis::new(0.0, 2.0, 81).unwrap(), 1e-12) {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn reduced_ode() {
        let b = BollobasBellman::<f64>::new();
        let r = check_reduced_ode(&b, &Axis::new(-1.0, 1.0, 101).unwrap(), 1e-8);
        assert!(r.passed && r.samples > 90, "{r:?}");
    }

    #[test]
    fn f32_instantiation() {
        let b = BollobasBellman::<f32>::new();
        assert!((b.value(0.0, 1.0) - 0.683_922).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn homogeneity(x in -3.0f64..3.0, lambda in 0.0f64..4.0, t in -3.0f64..3.0) {
            prop_assume!(t.abs() > 1e-3);
            let b = BollobasBellman::<f64>::new();
            let lhs = b.value(t * x, t * t * lambda);
            let rhs = t.abs() * b.value(x, lambda);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn bounds(x in -3.0f64..3.0, lambda in 0.0f64..4.0) {
            let b = BollobasBellman::<f64>::new();
            let v = b.value(x, lambda);
            prop_assert!(v >= x.abs() - 1e-15);
            prop_assert!(v <= x.abs().max(lambda.sqrt()) + 1e-12);
        }

        #[test]
        fn random_steps(x in -2.0f64..2.0, lambda in 1e-3f64..3.0, s in -0.999f64..0.999) {
            let b = BollobasBellman::<f64>::new();
            let a = s * lambda.sqrt();
            let next = lambda - a * a;
            let m = b.value(x - a, next) + b.value(x + a, next) - 2.0 * b.value(x, lambda);
            prop_assert!(m >= -1e-9, "margin {}", m);
        }
    }
}

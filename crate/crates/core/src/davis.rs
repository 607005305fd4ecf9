//! The Davis Bellman function
//!
//! ```text
//! U(p, q) = q^α u_α(|p|/q),  q > 0,      U(p, 0) = −|p|^α,
//! u_α(x)  = κ_α N_α(x)       for |x| ≤ c_α,
//!         = c_α^α − |x|^α    for |x| ≥ c_α,
//! ```
//!
//! and executable grid checks for its pointwise properties: the main
//! inequality `2U(p,q) ≥ U(p+a, √(a²+q²)) + U(p−a, √(a²+q²))`, majorization
//! of the obstacle `c_α^α q^α − |p|^α`, the infinitesimal inequality
//! `U_q/q + U_pp ≤ 0`, convexity of `t ↦ U(p, √t)`, and the Hermite ODE for
//! `b(x) = U(x, 1)` inside the cone `|x| < c_α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{self, Stencil};
use crate::lattice::{Axis, Lattice3};
use crate::report::{MarginTracker, VerificationReport};
use crate::scalar::Scalar;
use crate::specfn::{self, DavisConstant, DerivOrder, SeriesParams};

/// Tolerance for inequalities evaluated on the closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Tolerance for checks that go through finite differences.
pub const FD_TOL: f64 = 1e-6;

/// Default `p`, `q`, `a` sampling: 121 points on `[−3,3]`, `[0,3]`, `[−1.5,1.5]`.
pub fn default_lattice<T: Scalar>() -> Lattice3<T> {
    Lattice3 {
        p: Axis { min: T::lit(-3.0), max: T::lit(3.0), n: 121 },
        q: Axis { min: T::zero(), max: T::lit(3.0), n: 121 },
        a: Axis { min: T::lit(-1.5), max: T::lit(1.5), n: 121 },
    }
}

/// Closed-form Davis function for one exponent `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DavisBellman<T> {
    constant: DavisConstant<T>,
    params: SeriesParams<T>,
    c_pow_alpha: T,
}

impl<T: Scalar> DavisBellman<T> {
    pub fn new(alpha: T) -> Result<Self> {
        let params = SeriesParams::new(alpha)?;
        let constant = specfn::find_c_alpha(&params, T::epsilon() * T::lit(256.0))?;
        Self::from_constant(params, constant)
    }

    pub fn from_constant(params: SeriesParams<T>, constant: DavisConstant<T>) -> Result<Self> {
        params.validate()?;
        if !(constant.c_alpha > T::zero() && constant.c_alpha <= T::lit(specfn::WIDE_BRACKET_HI)) {
            return Err(Error::InvalidParameter(format!(
                "c_alpha = {} outside (0, {}]",
                constant.c_alpha,
                specfn::WIDE_BRACKET_HI
            )));
        }
        // the interior branch evaluates the series on [0, c_alpha]
        specfn::n_alpha(&params, constant.c_alpha)?;
        Ok(Self {
            c_pow_alpha: constant.c_alpha.powf(constant.alpha),
            constant,
            params,
        })
    }

    /// Same function with `κ_α` replaced. Only useful as a negative control:
    /// any other value breaks the `C¹` fit at `c_α`.
    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.constant.kappa_alpha = kappa;
        self
    }

    pub fn alpha(&self) -> T {
        self.constant.alpha
    }

    pub fn c_alpha(&self) -> T {
        self.constant.c_alpha
    }

    pub fn kappa(&self) -> T {
        self.constant.kappa_alpha
    }

    pub fn constant(&self) -> &DavisConstant<T> {
        &self.constant
    }

    pub fn series_params(&self) -> &SeriesParams<T> {
        &self.params
    }

    #[inline]
    fn n(&self, x: T) -> T {
        specfn::n_alpha(&self.params, x).expect("N_alpha series converges on [0, c_alpha]")
    }

    /// The even profile `u_α`.
    pub fn u_alpha(&self, x: T) -> T {
        let ax = x.abs();
        if ax <= self.c_alpha() {
            self.kappa() * self.n(ax)
        } else {
            self.c_pow_alpha - ax.powf(self.alpha())
        }
    }

    /// `U(p, q)`. Negative `q` is read as `|q|`.
    ///
    /// Outside the cone `|p| < c_α q` the value is computed with exactly the
    /// same expression as [`obstacle`](Self::obstacle), so the two agree
    /// bit for bit there.
    pub fn value(&self, p: T, q: T) -> T {
        let (ap, aq) = (p.abs(), q.abs());
        let alpha = self.alpha();
        if aq == T::zero() {
            return -ap.powf(alpha);
        }
        if ap >= self.c_alpha() * aq {
            self.obstacle(p, q)
        } else {
            aq.powf(alpha) * self.kappa() * self.n(ap / aq)
        }
    }

    /// `O₀(p, q) = c_α^α |q|^α − |p|^α`.
    #[inline]
    pub fn obstacle(&self, p: T, q: T) -> T {
        self.c_pow_alpha * q.abs().powf(self.alpha()) - p.abs().powf(self.alpha())
    }

    pub fn check_main_inequality(&self, lattice: &Lattice3<T>, tol: T) -> VerificationReport {
        check_main_inequality(|p, q| self.value(p, q), lattice, tol)
    }

    pub fn check_obstacle_majorization(&self, p_axis: &Axis<T>, q_axis: &Axis<T>, tol: T) -> MajorizationReport {
        check_obstacle_majorization(self, p_axis, q_axis, tol)
    }
}

/// Worst value of `2U(p,q) − U(p+a, √(a²+q²)) − U(p−a, √(a²+q²))` over the
/// lattice. Works for any evaluator, including deliberately broken ones.
pub fn check_main_inequality<T: Scalar, U: Fn(T, T) -> T>(u: U, lattice: &Lattice3<T>, tol: T) -> VerificationReport {
    let mut tracker = MarginTracker::new("davis.main_inequality");
    let two = T::lit(2.0);
    for q in lattice.q.points() {
        for a in lattice.a.points() {
            let q_next = (a * a + q * q).sqrt();
            for p in lattice.p.points() {
                let margin = two * u(p, q) - u(p + a, q_next) - u(p - a, q_next);
                tracker.observe(margin.as_f64(), &[p.as_f64(), q.as_f64(), a.as_f64()]);
            }
        }
    }
    tracker.finish(tol.as_f64())
}

/// Result of the majorization sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationReport {
    /// `U − O₀ ≥ −tol` everywhere.
    pub majorization: VerificationReport,
    /// `U − O₀ == 0` exactly on the samples with `|p| ≥ c_α q`.
    pub exterior_equality: VerificationReport,
}

pub fn check_obstacle_majorization<T: Scalar>(
    bell: &DavisBellman<T>,
    p_axis: &Axis<T>,
    q_axis: &Axis<T>,
    tol: T,
) -> MajorizationReport {
    let mut major = MarginTracker::new("davis.obstacle_majorization");
    let mut exterior = MarginTracker::new("davis.obstacle_exterior_equality");
    for q in q_axis.points() {
        for p in p_axis.points() {
            let margin = bell.value(p, q) - bell.obstacle(p, q);
            let loc = [p.as_f64(), q.as_f64()];
            major.observe(margin.as_f64(), &loc);
            if p.abs() >= bell.c_alpha() * q.abs() {
                exterior.observe(-margin.abs().as_f64(), &loc);
            }
        }
    }
    MajorizationReport {
        majorization: major.finish(tol.as_f64()),
        exterior_equality: exterior.finish(0.0),
    }
}

/// `U_q/q + U_pp` at one point by central differences with step `h`.
pub fn infinitesimal_operator<T: Scalar, U: Fn(T, T) -> T>(u: &U, p: T, q: T, h: T, stencil: Stencil) -> T {
    let u_q = fd::d1(|y| u(p, y), q, h, stencil);
    let u_pp = fd::d2(|x| u(x, q), p, h, stencil);
    u_q / q + u_pp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfinitesimalReport {
    /// `−(U_q/q + U_pp) ≥ −tol` on all usable samples.
    pub inequality: VerificationReport,
    /// `|U_q/q + U_pp| ≤ tol` on samples strictly inside the cone.
    pub interior_equality: VerificationReport,
    pub step: f64,
}

/// Step used by the finite-difference checks: an eighth of the finest lattice
/// spacing, and small enough that the stencil stays in `q > 0`.
fn fd_step<T: Scalar>(p_axis: &Axis<T>, q_axis: &Axis<T>) -> T {
    let mut h = T::lit(0.01);
    for s in [p_axis.spacing(), q_axis.spacing()] {
        if s > T::zero() {
            h = h.min(s / T::lit(8.0));
        }
    }
    h.min(q_axis.min / T::lit(4.0))
}

/// Checks `U_q/q + U_pp ≤ 0` on a `(p, q)` lattice with `q > 0`.
///
/// Points whose stencil straddles the cone boundary `|p| = c_α q` (where `U`
/// is only `C¹`) are skipped, as are points within `2h` of `p = 0` outside the
/// cone, where `|p|^α` has its kink.
pub fn check_infinitesimal<T: Scalar>(
    bell: &DavisBellman<T>,
    p_axis: &Axis<T>,
    q_axis: &Axis<T>,
    tol: T,
) -> Result<InfinitesimalReport> {
    if q_axis.min <= T::zero() {
        return Err(Error::Domain("infinitesimal check needs q > 0 on the whole lattice".into()));
    }
    let stencil = Stencil::Fourth;
    let h = fd_step(p_axis, q_axis);
    let reach = h * T::from_usize_lossy(stencil.reach() + 1);
    let c = bell.c_alpha();
    let u = |p: T, q: T| bell.value(p, q);

    let mut ineq = MarginTracker::new("davis.infinitesimal");
    let mut interior = MarginTracker::new("davis.infinitesimal_interior_equality");
    for q in q_axis.points() {
        for p in p_axis.points() {
            let gap = p.abs() - c * q;
            // stencil reaches ±reach in p and in q, which moves c q by c·reach
            if gap.abs() < reach * (T::one() + c) {
                continue;
            }
            if gap > T::zero() && p.abs() < reach {
                continue;
            }
            let l = infinitesimal_operator(&u, p, q, h, stencil);
            let loc = [p.as_f64(), q.as_f64()];
            ineq.observe((-l).as_f64(), &loc);
            if gap < T::zero() {
                interior.observe(-l.abs().as_f64(), &loc);
            }
        }
    }
    Ok(InfinitesimalReport {
        inequality: ineq.finish(tol.as_f64()),
        interior_equality: interior.finish(tol.as_f64()),
        step: h.as_f64(),
    })
}

/// Second differences of `t ↦ U(p, √t)` along a uniform `t` axis.
pub fn check_convexity_in_t<T: Scalar>(
    bell: &DavisBellman<T>,
    p_axis: &Axis<T>,
    t_axis: &Axis<T>,
    tol: T,
) -> Result<VerificationReport> {
    convexity_in_t(|p, q| bell.value(p, q), p_axis, t_axis, |_, _| true, tol, "davis.convexity_in_t")
}

pub(crate) fn convexity_in_t<T, U, M>(
    u: U,
    p_axis: &Axis<T>,
    t_axis: &Axis<T>,
    mask: M,
    tol: T,
    name: &str,
) -> Result<VerificationReport>
where
    T: Scalar,
    U: Fn(T, T) -> T,
    M: Fn(T, T) -> bool,
{
    if t_axis.min < T::zero() {
        return Err(Error::Domain("t axis must be non-negative".into()));
    }
    let mut tracker = MarginTracker::new(name);
    for p in p_axis.points() {
        let values: Vec<T> = t_axis.points().map(|t| u(p, t.sqrt())).collect();
        for i in 1..t_axis.n.saturating_sub(1) {
            let t = t_axis.point(i);
            if !mask(p, t.sqrt()) {
                continue;
            }
            let second = values[i - 1] - T::lit(2.0) * values[i] + values[i + 1];
            tracker.observe(second.as_f64(), &[p.as_f64(), t.as_f64()]);
        }
    }
    Ok(tracker.finish(tol.as_f64()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeResidualReport {
    /// `|b'' − x b' + α b| ≤ tol` for `b(x) = U(x, 1)`.
    pub residual: VerificationReport,
    /// One-sided slope of `b` at `c_α` against `−α c_α^{α−1}`.
    pub boundary_slope: VerificationReport,
    pub slope_at_c: f64,
    pub expected_slope: f64,
}

/// ODE residual of `b(x) = U(x, 1)` on the part of `x_axis` inside
/// `(−c_α, c_α)`, plus the boundary slope at `c_α`.
pub fn check_ode_residual<T: Scalar>(bell: &DavisBellman<T>, x_axis: &Axis<T>, tol: T) -> OdeResidualReport {
    let stencil = Stencil::Fourth;
    let h = if x_axis.spacing() > T::zero() {
        (x_axis.spacing() / T::lit(4.0)).min(T::lit(1e-2))
    } else {
        T::lit(1e-3)
    };
    let c = bell.c_alpha();
    let alpha = bell.alpha();
    let b = |x: T| bell.value(x, T::one());
    let reach = h * T::from_usize_lossy(stencil.reach());

    let mut tracker = MarginTracker::new("davis.ode_residual");
    for x in x_axis.points() {
        if x.abs() + reach >= c {
            continue;
        }
        let r = fd::d2(b, x, h, stencil) - x * fd::d1(b, x, h, stencil) + alpha * b(x);
        tracker.observe(-r.abs().as_f64(), &[x.as_f64()]);
    }

    let slope = fd::d1_backward(b, c, T::lit(1e-3));
    let expected = -alpha * c.powf(alpha - T::one());
    let boundary_slope = VerificationReport::from_margin(
        "davis.boundary_slope",
        -(slope - expected).abs().as_f64(),
        vec![c.as_f64()],
        FD_TOL,
    );
    OdeResidualReport {
        residual: tracker.finish(tol.as_f64()),
        boundary_slope,
        slope_at_c: slope.as_f64(),
        expected_slope: expected.as_f64(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardHeatReport {
    /// `−(O_pp + O_q/q) ≥ −tol`.
    pub residual: VerificationReport,
    pub convexity: VerificationReport,
    /// Both conditions hold, so the heat envelope of `O` is `O` itself.
    pub envelope_equals_obstacle: bool,
}

/// Tests whether an obstacle is its own heat envelope: `O_pp + O_q/q ≤ 0` and
/// `t ↦ O(p, √t)` convex, on the lattice points accepted by `mask`.
///
/// Samples within `2h` of `p = 0` are skipped (kink of `|p|^α`-type terms).
pub fn backward_heat_checker<T, O, M>(
    obstacle: O,
    p_axis: &Axis<T>,
    q_axis: &Axis<T>,
    mask: M,
    tol: T,
) -> Result<BackwardHeatReport>
where
    T: Scalar,
    O: Fn(T, T) -> T,
    M: Fn(T, T) -> bool,
{
    if q_axis.min <= T::zero() {
        return Err(Error::Domain("backward heat check needs q > 0 on the whole lattice".into()));
    }
    let stencil = Stencil::Fourth;
    let h = fd_step(p_axis, q_axis);
    let reach = h * T::from_usize_lossy(stencil.reach());

    let mut residual = MarginTracker::new("backward_heat.residual");
    for q in q_axis.points() {
        for p in p_axis.points() {
            if !mask(p, q) || p.abs() < reach {
                continue;
            }
            let value = obstacle(p, q);
            if !value.is_finite() {
                return Err(Error::Domain(format!("obstacle not finite at ({p}, {q})")));
            }
            let l = infinitesimal_operator(&obstacle, p, q, h, stencil);
            residual.observe((-l).as_f64(), &[p.as_f64(), q.as_f64()]);
        }
    }
    let t_axis = Axis::new(q_axis.min * q_axis.min, q_axis.max * q_axis.max, q_axis.n.max(3))?;
    let convexity = convexity_in_t(&obstacle, p_axis, &t_axis, &mask, tol, "backward_heat.convexity_in_t")?;
    let residual = residual.finish(tol.as_f64());
    Ok(BackwardHeatReport {
        envelope_equals_obstacle: residual.passed && convexity.passed,
        residual,
        convexity,
    })
}

/// Slope of `u_α` from the series, for the `C¹` matching check.
pub fn interior_slope<T: Scalar>(bell: &DavisBellman<T>, x: T) -> Result<T> {
    Ok(bell.kappa() * specfn::n_alpha_deriv(bell.series_params(), x, DerivOrder::First)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell(alpha: f64) -> DavisBellman<f64> {
        DavisBellman::new(alpha).unwrap()
    }

    fn small_lattice() -> Lattice3<f64> {
        Lattice3 {
            p: Axis::new(-3.0, 3.0, 41).unwrap(),
            q: Axis::new(0.0, 3.0, 31).unwrap(),
            a: Axis::new(-1.5, 1.5, 31).unwrap(),
        }
    }

    #[test]
    fn u_alpha_spot_values() {
        for &alpha in &[2.0, 2.5, 3.0, 4.0, 6.0] {
            let b = bell(alpha);
            assert!(b.u_alpha(b.c_alpha()).abs() < 1e-13);
            assert!((b.u_alpha(0.0) - b.kappa()).abs() < 1e-15);
        }
        let b4 = bell(4.0);
        let c4 = (3.0 - 6.0f64.sqrt()).sqrt();
        assert!((b4.u_alpha(2.0 * c4) + 15.0 * c4.powi(4)).abs() < 1e-12);
        assert!((b4.u_alpha(2.0 * c4) + 4.545_8).abs() < 2e-4);
    }

    #[test]
    fn value_spot_values() {
        let b = bell(3.0);
        assert_eq!(b.value(1.7, 0.0), -(1.7f64.powf(3.0)));
        assert!((b.value(0.0, 1.0) - b.kappa()).abs() < 1e-15);
        assert_eq!(b.value(-0.4, 1.2), b.value(0.4, 1.2));
    }

    #[test]
    fn alpha_two_is_q2_minus_p2() {
        let b = bell(2.0);
        for &(p, q) in &[(0.0, 1.0), (0.3, 0.5), (2.0, 1.0), (-1.0, 2.5)] {
            assert!((b.value(p, q) - (q * q - p * p)).abs() < 1e-12);
        }
    }

    #[test]
    fn branches_match_to_first_order() {
        for &alpha in &[2.0, 2.5, 3.0, 4.0, 6.0] {
            let b = bell(alpha);
            let c = b.c_alpha();
            let inner = interior_slope(&b, c).unwrap();
            let outer = -alpha * c.powf(alpha - 1.0);
            assert!((inner - outer).abs() < 1e-8, "alpha={alpha}");
            assert!((b.kappa() * specfn::n_alpha(b.series_params(), c).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn main_inequality_small_lattice() {
        for &alpha in &[2.0, 2.5, 3.0, 4.0, 6.0] {
            let r = bell(alpha).check_main_inequality(&small_lattice(), CLOSED_FORM_TOL);
            assert!(r.passed, "alpha={alpha}: {r:?}");
        }
    }

    #[test]
    fn main_inequality_zero_step_is_equality() {
        let b = bell(3.0);
        let lattice = Lattice3 { a: Axis::new(0.0, 0.0, 1).unwrap(), ..small_lattice() };
        let r = b.check_main_inequality(&lattice, 0.0);
        assert_eq!(r.worst_violation, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn flipped_kappa_violates_main_inequality() {
        let b = bell(3.0);
        let broken = b.with_kappa(-b.kappa());
        let r = broken.check_main_inequality(&small_lattice(), CLOSED_FORM_TOL);
        assert!(!r.passed);
        assert!(r.worst_violation < -0.1);
    }

    #[test]
    fn majorization() {
        let b = bell(3.0);
        let lat = small_lattice();
        let r = b.check_obstacle_majorization(&lat.p, &lat.q, CLOSED_FORM_TOL);
        assert!(r.majorization.passed);
        assert!(r.exterior_equality.passed);
        assert_eq!(r.exterior_equality.worst_violation, 0.0);
        let at_origin = b.value(0.0, 1.0) - b.obstacle(0.0, 1.0);
        assert!((at_origin - (b.kappa() - b.c_alpha().powi(3))).abs() < 1e-15);
        assert!(at_origin > 0.0);
    }

    #[test]
    fn infinitesimal_points() {
        let b = bell(3.0);
        let u = |p: f64, q: f64| b.value(p, q);
        let interior = infinitesimal_operator(&u, 0.0, 1.0, 1e-3, Stencil::Fourth);
        assert!(interior.abs() < 1e-6, "{interior}");
        let exterior = infinitesimal_operator(&u, 2.0, 1.0, 1e-3, Stencil::Fourth);
        // α(c³q − 2|p|) = 3(c³ − 4)
        let exact = 3.0 * (b.c_alpha().powi(3) - 4.0);
        assert!(exterior < 0.0 && (exterior - exact).abs() < 1e-6);
    }

    #[test]
    fn second_order_stencil_converges_quadratically() {
        let b = bell(3.0);
        let u = |p: f64, q: f64| b.value(p, q);
        let e1 = infinitesimal_operator(&u, 0.2, 1.0, 0.02, Stencil::Second).abs();
        let e2 = infinitesimal_operator(&u, 0.2, 1.0, 0.01, Stencil::Second).abs();
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn infinitesimal_lattice() {
        for &alpha in &[2.0, 3.0, 4.0] {
            let b = bell(alpha);
            let p = Axis::new(-3.0, 3.0, 61).unwrap();
            let q = Axis::new(0.25, 3.0, 56).unwrap();
            let r = check_infinitesimal(&b, &p, &q, FD_TOL).unwrap();
            assert!(r.inequality.passed, "alpha={alpha} {:?}", r.inequality);
            assert!(r.interior_equality.passed, "alpha={alpha} {:?}", r.interior_equality);
            assert!(r.interior_equality.samples > 100);
        }
        let b = bell(3.0);
        let q0 = Axis::new(0.0, 3.0, 11).unwrap();
        assert!(check_infinitesimal(&b, &Axis::new(-1.0, 1.0, 5).unwrap(), &q0, FD_TOL).is_err());
    }

    #[test]
    fn convexity_in_t() {
        let p = Axis::new(-3.0, 3.0, 61).unwrap();
        let t = Axis::new(0.0, 9.0, 181).unwrap();
        for &alpha in &[2.0, 2.5, 3.0, 4.0, 6.0] {
            let r = check_convexity_in_t(&bell(alpha), &p, &t, CLOSED_FORM_TOL).unwrap();
            assert!(r.passed, "alpha={alpha} {r:?}");
        }
        // far exterior: c^α t^{α/2} − |p|^α
        let b = bell(3.0);
        let f = |t: f64| b.value(20.0, t.sqrt());
        let g = |t: f64| b.c_alpha().powi(3) * t.powf(1.5) - 8000.0;
        for &t in &[0.5, 1.0, 2.0] {
            assert!((f(t) - g(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn ode_residual() {
        for &alpha in &[2.0, 2.5, 3.0, 4.0, 6.0] {
            let b = bell(alpha);
            let c = b.c_alpha();
            let x = Axis::new(-c, c, 101).unwrap();
            let r = check_ode_residual(&b, &x, FD_TOL);
            assert!(r.residual.passed, "alpha={alpha} {:?}", r.residual);
            assert!(r.boundary_slope.passed, "alpha={alpha} {:?}", r.boundary_slope);
        }
        let b4 = bell(4.0);
        let c4 = (3.0 - 6.0f64.sqrt()).sqrt();
        let r = check_ode_residual(&b4, &Axis::new(0.0, 0.9 * c4, 2).unwrap(), FD_TOL);
        assert!((r.expected_slope + 4.0 * c4.powi(3)).abs() < 1e-12);
        assert!((r.slope_at_c + 1.6339).abs() < 1e-4);
    }

    #[test]
    fn backward_heat_examples() {
        let p = Axis::new(-2.0, 2.0, 41).unwrap();
        let q = Axis::new(0.5, 2.0, 31).unwrap();

        let quad = backward_heat_checker(|p: f64, q: f64| q * q - p * p, &p, &q, |_, _| true, FD_TOL).unwrap();
        assert!(quad.envelope_equals_obstacle, "{quad:?}");

        let b = bell(3.0);
        let (c, k) = (b.c_alpha(), b.kappa());
        let params = *b.series_params();
        let piece = move |p: f64, q: f64| k * q.powi(3) * specfn::n_alpha(&params, p / q).unwrap();
        let inside = move |p: f64, q: f64| p.abs() < c * q;
        let r = backward_heat_checker(piece, &p, &q, inside, FD_TOL).unwrap();
        assert!(r.envelope_equals_obstacle, "{r:?}");

        let davis_obstacle = backward_heat_checker(|p, q| b.obstacle(p, q), &p, &q, |_, _| true, FD_TOL).unwrap();
        assert!(!davis_obstacle.residual.passed);
        assert!(!davis_obstacle.envelope_equals_obstacle);
    }

    #[test]
    fn evenness_and_monotone_in_q() {
        let b = bell(3.0);
        let q_axis = Axis::new(0.0, 3.0, 61).unwrap();
        for p in Axis::new(-3.0, 3.0, 61).unwrap().points() {
            assert_eq!(b.value(p, 1.3), b.value(-p, 1.3));
            let mut prev = f64::NEG_INFINITY;
            for q in q_axis.points() {
                let v = b.value(p, q);
                assert!(v >= prev - 1e-12, "p={p} q={q}");
                prev = v;
            }
        }
    }

    #[test]
    fn normalized_derivative_nonincreasing() {
        // −N'_α(x)/x^{α−1} nonincreasing on (0, c_α]
        for &alpha in &[2.0, 2.5, 3.0, 4.0, 6.0] {
            let b = bell(alpha);
            let params = *b.series_params();
            let g = |x: f64| -specfn::n_alpha_deriv(&params, x, DerivOrder::First).unwrap() / x.powf(alpha - 1.0);
            let mut prev = f64::INFINITY;
            for i in 1..=200 {
                let x = b.c_alpha() * i as f64 / 200.0;
                let v = g(x);
                assert!(v <= prev + 1e-12, "alpha={alpha} x={x}");
                prev = v;
            }
        }
    }

    #[test]
    fn homogeneity() {
        let b = bell(2.5);
        for &(p, q) in &[(0.1, 0.7), (1.0, 0.4), (-0.6, 1.1)] {
            let lhs = b.value(2.0 * p, 2.0 * q);
            let rhs = 2.0f64.powf(2.5) * b.value(p, q);
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn f32_instantiation() {
        let b = DavisBellman::<f32>::new(3.0).unwrap();
        assert!((b.value(0.0, 1.0) - 0.960_237_6).abs() < 1e-4);
    }
}

//! Special functions behind both Bellman functions.
//!
//! * `N_α(x) = ₁F₁(−α/2; 1/2; x²/2)`, the even solution of the Hermite
//!   equation `N'' − xN' + αN = 0` with `N(0) = 1`, `N'(0) = 0`.
//! * The Davis constant `c_α` (smallest positive zero of `N_α`) and the
//!   normalization `κ_α = −α c_α^{α−1} / N'_α(c_α)`.
//! * `Φ(τ) = ∫₀^τ e^{−y²/2} dy` and `Ψ(τ) = τΦ(τ) + e^{−τ²/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;
use crate::scalar::Scalar;

/// Exponent and truncation policy for the `N_α` series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesParams<T> {
    pub alpha: T,
    /// Relative truncation tolerance, see [`n_alpha`].
    pub tol: T,
    pub max_terms: usize,
}

impl<T: Scalar> SeriesParams<T> {
    pub const DEFAULT_MAX_TERMS: usize = 500;

    /// Parameters with the default tolerance (machine epsilon) and term cap.
    pub fn new(alpha: T) -> Result<Self> {
        Self::with_tolerance(alpha, T::epsilon(), Self::DEFAULT_MAX_TERMS)
    }

    pub fn with_tolerance(alpha: T, tol: T, max_terms: usize) -> Result<Self> {
        let params = Self {
            alpha,
            tol,
            max_terms,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and positive, got {}",
                self.alpha
            )));
        }
        if !(self.tol.is_finite() && self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "series tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be at least 1".into()));
        }
        Ok(())
    }

    /// Same policy, shifted exponent. The shifted exponent may be `≤ 0`
    /// (the second derivative uses `N_{α−2}`), so no validation happens here.
    fn shifted(&self, delta: T) -> Self {
        Self {
            alpha: self.alpha + delta,
            ..*self
        }
    }
}

/// Which derivative of `N_α` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    First,
    Second,
}

/// Sums the `N_α` series and, optionally, its termwise derivative.
///
/// Terms obey `t_{m+1} = t_m · (−2x²)(α/2 − m) / ((2m+1)(2m+2))`, `t_0 = 1`.
/// Summation stops once the newest term is below `tol · max(1, |sum|)` and
/// its index exceeds `α/2`; before that index the terms need not decrease.
/// For even integer `α` the terms vanish exactly after `α/2 + 1` of them.
fn series<T: Scalar>(params: &SeriesParams<T>, x: T, derivative: bool) -> Result<T> {
    let z = -T::lit(2.0) * x * x;
    let half = params.alpha * T::lit(0.5);
    let one = T::one();
    let mut term = one;
    let mut sum = if derivative { T::zero() } else { one };
    let mut last = one;
    for m in 0..params.max_terms {
        let mf = T::from_usize_lossy(m);
        let two_m = T::lit(2.0) * mf;
        term = term * z * (half - mf) / ((two_m + one) * (two_m + T::lit(2.0)));
        if term == T::zero() {
            return Ok(sum);
        }
        let contribution = if derivative {
            // d/dx x^{2(m+1)} = 2(m+1) x^{2m+1}
            term * (two_m + T::lit(2.0)) / x
        } else {
            term
        };
        sum += contribution;
        last = contribution;
        if mf + one > half && contribution.abs() < params.tol * sum.abs().max(one) {
            return Ok(sum);
        }
    }
    Err(Error::Truncation {
        alpha: params.alpha.as_f64(),
        x: x.as_f64(),
        terms: params.max_terms,
        last_term: last.as_f64(),
    })
}

/// `N_α(x) = ₁F₁(−α/2; 1/2; x²/2)`.
pub fn n_alpha<T: Scalar>(params: &SeriesParams<T>, x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("N_alpha argument must be finite, got {x}")));
    }
    series(params, x, false)
}

/// First derivative by the termwise differentiated series, second derivative
/// through `N''_α = −α N_{α−2}`.
pub fn n_alpha_deriv<T: Scalar>(params: &SeriesParams<T>, x: T, order: DerivOrder) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("N_alpha argument must be finite, got {x}")));
    }
    match order {
        DerivOrder::First if x == T::zero() => Ok(T::zero()),
        DerivOrder::First => series(params, x, true),
        DerivOrder::Second => {
            let lower = series(&params.shifted(-T::lit(2.0)), x, false)?;
            Ok(-params.alpha * lower)
        }
    }
}

/// Maclaurin series `Φ(τ) = Σ (−1)^k τ^{2k+1} / (2^k k! (2k+1))`.
/// Accurate to roughly machine precision for `|τ| ≤ 2`.
pub fn phi_series<T: Scalar>(tau: T) -> T {
    let g = -tau * tau * T::lit(0.5);
    let mut power = T::one();
    let mut sum = tau;
    for k in 1..200usize {
        let kf = T::from_usize_lossy(k);
        power = power * g / kf;
        let term = power * tau / (T::lit(2.0) * kf + T::one());
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.25) {
            break;
        }
    }
    sum
}

/// `Φ(τ)` by adaptive Simpson on `[0, τ]`.
pub fn phi_quadrature<T: Scalar>(tau: T) -> T {
    let tol = quad_tol::<T>();
    adaptive_simpson(gauss_kernel::<T>, T::zero(), tau, tol)
}

// Beyond this the integrand is below the smallest subnormal f64.
const PHI_SATURATION: f64 = 40.0;
const PHI_SERIES_LIMIT: f64 = 2.0;

#[inline]
fn gauss_kernel<T: Scalar>(y: T) -> T {
    (-y * y * T::lit(0.5)).exp()
}

fn quad_tol<T: Scalar>() -> T {
    T::lit(1e-15).max(T::epsilon())
}

/// `Φ(τ) = ∫₀^τ e^{−y²/2} dy`. Series on `|τ| ≤ 2`, series plus adaptive
/// Simpson on the tail beyond. Extended to `τ < 0` by oddness.
pub fn phi<T: Scalar>(tau: T) -> T {
    if tau < T::zero() {
        return -phi(-tau);
    }
    let limit = T::lit(PHI_SERIES_LIMIT);
    if tau <= limit {
        return phi_series(tau);
    }
    let upper = tau.min(T::lit(PHI_SATURATION));
    phi_series(limit) + adaptive_simpson(gauss_kernel::<T>, limit, upper, quad_tol::<T>())
}

/// `Ψ(τ) = τΦ(τ) + e^{−τ²/2}`; even in `τ`.
pub fn psi<T: Scalar>(tau: T) -> T {
    let t = tau.abs();
    t * phi(t) + gauss_kernel(t)
}

/// Inverse of `Ψ` on `[0, 8]` by bisection (`Ψ` is increasing there since
/// `Ψ' = Φ > 0`).
pub fn psi_inverse<T: Scalar>(y: T, tol: T) -> Result<T> {
    let (lo, hi) = (T::zero(), T::lit(8.0));
    if !(y >= psi(lo) && y <= psi(hi)) {
        return Err(Error::Domain(format!(
            "psi_inverse argument {y} outside [Psi(0), Psi(8)]"
        )));
    }
    Ok(bisect(|t| psi(t) - y, lo, hi, tol))
}

/// Bisection for an increasing-or-decreasing sign change on `[lo, hi]`.
/// Stops when the bracket is narrower than `tol` or cannot shrink further.
pub(crate) fn bisect<T: Scalar, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, tol: T) -> T {
    let mut f_lo = f(lo);
    if f_lo == T::zero() {
        return lo;
    }
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return mid;
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// The Davis constant `c_α` together with `κ_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DavisConstant<T> {
    pub alpha: T,
    pub c_alpha: T,
    pub kappa_alpha: T,
    /// `|N_α(c_α)|` at the returned root.
    pub residual: T,
    /// Set when `α < 2`: the inequality is sharp only for `α ≥ 2`.
    pub out_of_verified_range: bool,
}

/// Left end of the root bracket; `N_α(0) = 1` fixes the sign there.
pub const ROOT_BRACKET_LO: f64 = 1e-6;
/// `c_α ≤ 1` for `α ≥ 2`.
pub const ROOT_BRACKET_HI: f64 = 1.0;
/// Right end used for `α < 2`, where `c_α > 1`. Stays inside `|x| ≤ 4`.
pub const WIDE_BRACKET_HI: f64 = 4.0;
const SCAN_STEPS: usize = 512;

/// Smallest positive zero of `N_α`.
///
/// A sign scan over the bracket isolates the first sign change (for large `α`
/// the bracket holds several zeros), then bisection refines it to full
/// precision. Fails unless `|N_α(c_α)| ≤ root_tol`.
pub fn find_c_alpha<T: Scalar>(params: &SeriesParams<T>, root_tol: T) -> Result<DavisConstant<T>> {
    params.validate()?;
    let alpha = params.alpha;
    let out_of_verified_range = alpha < T::lit(2.0);
    let lo = T::lit(ROOT_BRACKET_LO);
    let hi = if out_of_verified_range {
        T::lit(WIDE_BRACKET_HI)
    } else {
        T::lit(ROOT_BRACKET_HI)
    };

    let n = |x: T| n_alpha(params, x);
    let mut prev = lo;
    let mut f_prev = n(lo)?;
    let mut bracket = None;
    for i in 1..=SCAN_STEPS {
        let x = if i == SCAN_STEPS {
            hi
        } else {
            lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(SCAN_STEPS)
        };
        let fx = n(x)?;
        if fx == T::zero() {
            bracket = Some((x, x));
            break;
        }
        if (fx < T::zero()) != (f_prev < T::zero()) {
            bracket = Some((prev, x));
            break;
        }
        prev = x;
        f_prev = fx;
    }
    let (a, b) = bracket.ok_or(Error::Bracket {
        alpha: alpha.as_f64(),
        lo: lo.as_f64(),
        hi: hi.as_f64(),
    })?;

    let c = if a == b {
        a
    } else {
        // the series never fails inside the bracket once both ends evaluated
        let f = |x: T| n(x).unwrap_or_else(|_| T::nan());
        let mid = bisect(f, a, b, T::zero());
        // keep whichever neighbour has the smaller residual
        let eps = mid * T::epsilon();
        [mid - eps, mid, mid + eps]
            .into_iter()
            .min_by(|x, y| f(*x).abs().partial_cmp(&f(*y).abs()).unwrap())
            .unwrap()
    };
    let residual = n(c)?.abs();
    if residual > root_tol {
        return Err(Error::InvalidParameter(format!(
            "root residual {residual} exceeds root_tol {root_tol} for alpha={alpha}"
        )));
    }
    let slope = n_alpha_deriv(params, c, DerivOrder::First)?;
    let kappa_alpha = -alpha * c.powf(alpha - T::one()) / slope;
    Ok(DavisConstant {
        alpha,
        c_alpha: c,
        kappa_alpha,
        residual,
        out_of_verified_range,
    })
}

/// Convenience wrapper with default series policy and a root tolerance of a
/// few hundred ulps.
pub fn davis_constant<T: Scalar>(alpha: T) -> Result<DavisConstant<T>> {
    let params = SeriesParams::new(alpha)?;
    find_c_alpha(&params, T::epsilon() * T::lit(256.0))
}

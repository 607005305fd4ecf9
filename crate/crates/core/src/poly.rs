//! Dense univariate polynomials and Sturm root counting.
//!
//! Coefficients are either `f64` (remainders below a relative threshold are
//! dropped) or [`BigRational`] (exact).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Relative size below which a floating remainder coefficient counts as zero.
pub const DROP_THRESHOLD: f64 = 1e-12;

/// Field operations plus a notion of "numerically zero".
pub trait Coeff:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Signed
    + std::ops::Div<Output = Self>
{
    /// Whether `self` is zero relative to `scale` (the largest coefficient in play).
    fn negligible(&self, scale: &Self) -> bool;
    fn to_f64_lossy(&self) -> f64;
}

impl Coeff for f64 {
    fn negligible(&self, scale: &Self) -> bool {
        self.abs() <= DROP_THRESHOLD * scale.abs().max(1.0)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Coeff for BigRational {
    fn negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Coefficients in ascending degree; the leading one is nonzero (the zero
/// polynomial has no coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<C> {
    coeffs: Vec<C>,
}

impl<C: Coeff> Polynomial<C> {
    pub fn new(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&C> {
        self.coeffs.last()
    }

    pub fn eval(&self, x: &C) -> C {
        self.coeffs
            .iter()
            .rev()
            .fold(C::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.clone() * from_usize::<C>(i))
            .collect();
        Self::new(coeffs)
    }

    fn max_abs(&self) -> C {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .fold(C::zero(), |m, c| if c > m { c } else { m })
    }

    /// Divides by the largest coefficient magnitude (a positive factor, so
    /// signs are kept).
    pub fn normalized(&self) -> Self {
        let m = self.max_abs();
        if m.is_zero() {
            return self.clone();
        }
        Self::new(self.coeffs.iter().map(|c| c.clone() / m.clone()).collect())
    }

    /// Euclidean division. Remainder coefficients negligible against the
    /// dividend's scale are dropped.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let d_deg = divisor.degree().expect("division by the zero polynomial");
        let lead = divisor.leading().unwrap().clone();
        let scale = self.max_abs();
        let mut rem = self.coeffs.clone();
        let Some(n_deg) = self.degree().filter(|&n| n >= d_deg) else {
            return (Self::new(Vec::new()), self.clone());
        };
        let mut quot = vec![C::zero(); n_deg - d_deg + 1];
        for k in (0..=n_deg - d_deg).rev() {
            let factor = rem[k + d_deg].clone() / lead.clone();
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] = rem[k + j].clone() - factor.clone() * d.clone();
            }
            rem[k + d_deg] = C::zero();
            quot[k] = factor;
        }
        rem.truncate(d_deg);
        for c in rem.iter_mut() {
            if c.negligible(&scale) {
                *c = C::zero();
            }
        }
        (Self::new(quot), Self::new(rem))
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.normalized(), other.normalized());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r.normalized();
        }
        a
    }

    /// `p / gcd(p, p')`: same distinct roots, all simple.
    pub fn square_free(&self) -> Self {
        let g = self.gcd(&self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        self.div_rem(&g).0.normalized()
    }

    /// `p₀ = p`, `p₁ = p'`, `p_{k+1} = −rem(p_{k−1}, p_k)`, each normalized.
    pub fn sturm_chain(&self) -> Vec<Self> {
        let mut chain = vec![self.normalized()];
        let d = self.derivative().normalized();
        if d.is_zero() {
            return chain;
        }
        chain.push(d);
        loop {
            let n = chain.len();
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(Self::new(r.coeffs.into_iter().map(|c| -c).collect()).normalized());
        }
        chain
    }
}

fn from_usize<C: Coeff>(n: usize) -> C {
    (0..n).fold(C::zero(), |acc, _| acc + C::one())
}

fn sign_variations<C: Coeff>(chain: &[Polynomial<C>], x: &C) -> usize {
    let signs: Vec<bool> = chain
        .iter()
        .map(|p| p.eval(x))
        .filter(|v| !v.is_zero())
        .map(|v| v.is_positive())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of distinct real roots of `poly` in `(a, b)`.
///
/// The polynomial is reduced to its square-free part first. Endpoints that
/// are roots are rejected.
pub fn sturm_root_count<C: Coeff>(poly: &Polynomial<C>, a: &C, b: &C) -> Result<usize> {
    if poly.is_zero() {
        return Err(Error::InvalidParameter("zero polynomial has no finite root count".into()));
    }
    if a >= b {
        return Err(Error::InvalidParameter("interval needs a < b".into()));
    }
    let scale = poly.max_abs();
    for end in [a, b] {
        if poly.eval(end).negligible(&scale) {
            return Err(Error::EndpointRoot { endpoint: end.to_f64_lossy() });
        }
    }
    let chain = poly.square_free().sturm_chain();
    let (va, vb) = (sign_variations(&chain, a), sign_variations(&chain, b));
    Ok(va.saturating_sub(vb))
}

/// Exact rational from an `f64`, `None` for non-finite input.
pub fn rational(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

pub fn rational_poly_from_integers(coeffs: &[i64]) -> Polynomial<BigRational> {
    Polynomial::new(
        coeffs
            .iter()
            .map(|&c| BigRational::from_integer(BigInt::from(c)))
            .collect(),
    )
}

/// Root count from floating input: exact rational arithmetic when every
/// coefficient and both endpoints are integers, floating arithmetic otherwise.
pub fn sturm_root_count_f64(coeffs: &[f64], a: f64, b: f64) -> Result<usize> {
    if coeffs.iter().chain([&a, &b]).any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite polynomial input".into()));
    }
    let integral = coeffs.iter().chain([&a, &b]).all(|c| c.fract() == 0.0);
    if integral {
        let poly = Polynomial::new(coeffs.iter().map(|&c| rational(c).unwrap()).collect());
        sturm_root_count(&poly, &rational(a).unwrap(), &rational(b).unwrap())
    } else {
        sturm_root_count(&Polynomial::new(coeffs.to_vec()), &a, &b)
    }
}

/// `246x⁴ − 486x³ + 233x² − 12x − 8`, ascending coefficients.
pub const BOLLOBAS_QUARTIC: [i64; 5] = [-8, -12, 233, -486, 246];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn quartic_endpoint_values() {
        let p = rational_poly_from_integers(&BOLLOBAS_QUARTIC);
        assert_eq!(p.eval(&q(0, 1)), q(-8, 1));
        assert_eq!(p.eval(&q(1, 1)), q(-27, 1));
    }

    #[test]
    fn quartic_has_no_roots_on_unit_interval() {
        let p = rational_poly_from_integers(&BOLLOBAS_QUARTIC);
        assert_eq!(sturm_root_count(&p, &q(0, 1), &q(1, 1)).unwrap(), 0);
        let pf = Polynomial::new(BOLLOBAS_QUARTIC.iter().map(|&c| c as f64).collect());
        assert_eq!(sturm_root_count(&pf, &0.0, &1.0).unwrap(), 0);
        // dense sampling agrees: strictly negative on [0, 1]
        assert!((0..=10_000).all(|i| pf.eval(&(i as f64 / 1e4)) < 0.0));
        // its real roots lie outside: two of them, one each side
        assert_eq!(sturm_root_count(&p, &q(-10, 1), &q(10, 1)).unwrap(), 2);
    }

    #[test]
    fn control_polynomial() {
        assert_eq!(sturm_root_count_f64(&[-0.25, 0.0, 1.0], 0.0, 1.0).unwrap(), 1);
        let p = Polynomial::new(vec![q(-1, 4), q(0, 1), q(1, 1)]);
        assert_eq!(sturm_root_count(&p, &q(-1, 1), &q(1, 1)).unwrap(), 2);
    }

    #[test]
    fn endpoint_root_rejected() {
        let err = sturm_root_count_f64(&[-0.25, 0.0, 1.0], 0.5, 1.0).unwrap_err();
        assert_eq!(err, Error::EndpointRoot { endpoint: 0.5 });
        let err = sturm_root_count_f64(&[-1.0, 0.0, 1.0], 0.0, 1.0).unwrap_err();
        assert_eq!(err, Error::EndpointRoot { endpoint: 1.0 });
    }

    #[test]
    fn repeated_roots_counted_once() {
        // (x − 1/2)² (x − 1/3) has two distinct roots in (0, 1)
        let p = Polynomial::new(vec![q(-1, 12), q(7, 12), q(-4, 3), q(1, 1)]);
        assert_eq!(sturm_root_count(&p, &q(0, 1), &q(1, 1)).unwrap(), 2);
        let pf = Polynomial::new(vec![-1.0 / 12.0, 7.0 / 12.0, -4.0 / 3.0, 1.0]);
        assert_eq!(sturm_root_count(&pf, &0.0, &1.0).unwrap(), 2);
        assert_eq!(p.square_free().degree(), Some(2));
    }

    #[test]
    fn division_identity() {
        let a = Polynomial::new(vec![q(3, 1), q(-2, 1), q(0, 1), q(5, 2), q(1, 1)]);
        let b = Polynomial::new(vec![q(1, 1), q(1, 3), q(2, 1)]);
        let (quot, rem) = a.div_rem(&b);
        let prod: Vec<BigRational> = {
            let mut out = vec![q(0, 1); 5];
            for (i, x) in quot.coeffs().iter().enumerate() {
                for (j, y) in b.coeffs().iter().enumerate() {
                    out[i + j] = out[i + j].clone() + x.clone() * y.clone();
                }
            }
            for (i, r) in rem.coeffs().iter().enumerate() {
                out[i] = out[i].clone() + r.clone();
            }
            out
        };
        assert_eq!(Polynomial::new(prod), a);
    }

    proptest! {
        #[test]
        fn counts_roots_of_products(mut roots in proptest::collection::vec(-20i64..20, 1..5), lo in -25i64..0, width in 1i64..30) {
            roots.sort();
            roots.dedup();
            // build ∏ (x − r/2) with roots at half-integers, endpoints at quarter offsets
            let mut coeffs = vec![q(1, 1)];
            for &r in &roots {
                let mut next = vec![q(0, 1); coeffs.len() + 1];
                for (i, c) in coeffs.iter().enumerate() {
                    next[i + 1] = next[i + 1].clone() + c.clone();
                    next[i] = next[i].clone() - c.clone() * q(r, 2);
                }
                coeffs = next;
            }
            let p = Polynomial::new(coeffs);
            let a = q(4 * lo + 1, 8);
            let b = q(4 * (lo + width) + 1, 8);
            let expected = roots.iter().filter(|&&r| q(r, 2) > a && q(r, 2) < b).count();
            prop_assert_eq!(sturm_root_count(&p, &a, &b).unwrap(), expected);
        }
    }
}

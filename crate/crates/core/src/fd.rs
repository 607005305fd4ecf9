//! Central finite-difference stencils.

use crate::scalar::Scalar;

/// Stencil accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// Three-point, error `O(h²)`.
    Second,
    /// Five-point, error `O(h⁴)`.
    #[default]
    Fourth,
}

impl Stencil {
    /// How far the stencil reaches, in units of `h`.
    pub fn reach(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }
}

pub fn d1<T: Scalar, F: Fn(T) -> T>(f: F, x: T, h: T, s: Stencil) -> T {
    match s {
        Stencil::Second => (f(x + h) - f(x - h)) / (T::lit(2.0) * h),
        Stencil::Fourth => {
            let two_h = T::lit(2.0) * h;
            (-f(x + two_h) + T::lit(8.0) * f(x + h) - T::lit(8.0) * f(x - h) + f(x - two_h))
                / (T::lit(12.0) * h)
        }
    }
}

pub fn d2<T: Scalar, F: Fn(T) -> T>(f: F, x: T, h: T, s: Stencil) -> T {
    match s {
        Stencil::Second => (f(x + h) - T::lit(2.0) * f(x) + f(x - h)) / (h * h),
        Stencil::Fourth => {
            let two_h = T::lit(2.0) * h;
            (-f(x + two_h) + T::lit(16.0) * f(x + h) - T::lit(30.0) * f(x) + T::lit(16.0) * f(x - h)
                - f(x - two_h))
                / (T::lit(12.0) * h * h)
        }
    }
}

/// Fourth-order one-sided (backward) first derivative.
pub fn d1_backward<T: Scalar, F: Fn(T) -> T>(f: F, x: T, h: T) -> T {
    let c = [25.0, -48.0, 36.0, -16.0, 3.0];
    let mut acc = T::zero();
    for (k, ck) in c.iter().enumerate() {
        acc += T::lit(*ck) * f(x - h * T::from_usize_lossy(k));
    }
    acc / (T::lit(12.0) * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencils_on_smooth_function() {
        let f = |x: f64| x.sin();
        for s in [Stencil::Second, Stencil::Fourth] {
            assert!((d1(f, 0.7, 1e-3, s) - 0.7f64.cos()).abs() < 1e-6);
            assert!((d2(f, 0.7, 1e-3, s) + 0.7f64.sin()).abs() < 1e-5);
        }
        assert!((d1_backward(f, 0.7, 1e-3) - 0.7f64.cos()).abs() < 1e-11);
    }
}

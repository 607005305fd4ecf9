//! Uniform sampling axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n` equally spaced points on `[min, max]` (just `min` when `n == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis<T> {
    pub min: T,
    pub max: T,
    pub n: usize,
}

impl<T: Scalar> Axis<T> {
    pub fn new(min: T, max: T, n: usize) -> Result<Self> {
        if n == 0 || !min.is_finite() || !max.is_finite() || max < min || (n > 1 && max == min) {
            return Err(Error::InvalidParameter(format!(
                "axis [{min}, {max}] with {n} points"
            )));
        }
        Ok(Self { min, max, n })
    }

    pub fn spacing(&self) -> T {
        if self.n <= 1 {
            T::zero()
        } else {
            (self.max - self.min) / T::from_usize_lossy(self.n - 1)
        }
    }

    #[inline]
    pub fn point(&self, i: usize) -> T {
        if i + 1 == self.n {
            self.max
        } else {
            self.min + self.spacing() * T::from_usize_lossy(i)
        }
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(move |i| self.point(i))
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.min && x <= self.max
    }
}

/// `(p, q, a)` sampling lattice for finite-difference inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice3<T> {
    pub p: Axis<T>,
    pub q: Axis<T>,
    pub a: Axis<T>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_exact() {
        let ax = Axis::new(-3.0f64, 3.0, 121).unwrap();
        assert_eq!(ax.point(0), -3.0);
        assert_eq!(ax.point(120), 3.0);
        assert_eq!(ax.point(60), 0.0);
        assert!((ax.spacing() - 0.05).abs() < 1e-15);
        assert_eq!(ax.points().count(), 121);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Axis::new(0.0f64, 1.0, 0).is_err());
        assert!(Axis::new(1.0f64, 0.0, 5).is_err());
        assert!(Axis::new(1.0f64, 1.0, 3).is_err());
        assert!(Axis::new(1.0f64, 1.0, 1).is_ok());
    }
}

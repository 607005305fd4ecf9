//! One-dimensional Bellman operators obtained from homogeneity.
//!
//! For the Davis problem `V(p, q) = q^α b(p/q)` and a step `a = τq` turns the
//! main inequality into
//!
//! ```text
//! b(x) ≥ ½ (1+τ²)^{α/2} [ b((x+τ)/√(1+τ²)) + b((x−τ)/√(1+τ²)) ].
//! ```
//!
//! For the Bollobás problem `W(x, λ) = √λ b(x/√λ)` and `a = τ√λ`:
//!
//! ```text
//! b(ξ) ≤ ½ √(1−τ²) [ b((ξ−τ)/√(1−τ²)) + b((ξ+τ)/√(1−τ²)) ],
//! ```
//!
//! where `τ = 1` exhausts the constraint and costs `max(|ξ|, 1)`.

use crate::error::{Error, Result};
use crate::lattice::Axis;
use crate::scalar::Scalar;

/// Stand-in for `+∞` in inf-type recursions.
pub const SENTINEL: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedKind<T> {
    /// Sup-type, obstacle `c^α − |x|^α`.
    Davis { alpha: T, c_alpha: T },
    /// Inf-type, obstacle `|ξ|` on `|ξ| ≥ 1` and `+∞` inside.
    Bollobas,
}

#[derive(Debug, Clone, Copy)]
struct Tap<T> {
    /// Left lattice index, or `usize::MAX` when the read leaves the lattice.
    i0: usize,
    w: T,
    y: T,
}

/// Precomputed interpolation plan for one lattice and one set of relative steps.
#[derive(Debug, Clone)]
pub struct ReducedOperator<T> {
    kind: ReducedKind<T>,
    axis: Axis<T>,
    xs: Vec<T>,
    taus: Vec<T>,
    prefactor: Vec<T>,
    taps: Vec<[Tap<T>; 2]>,
    obstacle: Vec<T>,
}

impl<T: Scalar> ReducedOperator<T> {
    /// `taus` are relative step sizes; for the Bollobás kind they must lie in
    /// `(0, 1)` (the constraint-exhausting step `τ = 1` is always included).
    pub fn new(kind: ReducedKind<T>, axis: Axis<T>, taus: &[T]) -> Result<Self> {
        if axis.n < 2 {
            return Err(Error::InvalidParameter("reduced lattice needs at least two points".into()));
        }
        if taus.iter().any(|t| !(t.is_finite() && *t > T::zero())) {
            return Err(Error::InvalidParameter("relative steps must be positive".into()));
        }
        if let ReducedKind::Bollobas = kind {
            if taus.iter().any(|t| *t >= T::one()) {
                return Err(Error::InvalidParameter("Bollobas relative steps must be below 1".into()));
            }
        }
        let xs: Vec<T> = axis.points().collect();
        let n = xs.len();
        let mut prefactor = Vec::with_capacity(taus.len());
        let mut taps = Vec::with_capacity(taus.len() * n);
        for &tau in taus {
            let (s, pf) = match kind {
                ReducedKind::Davis { alpha, .. } => {
                    let s = (T::one() + tau * tau).sqrt();
                    (s, s.powf(alpha) * T::lit(0.5))
                }
                ReducedKind::Bollobas => {
                    let s = (T::one() - tau * tau).sqrt();
                    (s, s * T::lit(0.5))
                }
            };
            prefactor.push(pf);
            for &x in &xs {
                taps.push([tap(&axis, (x + tau) / s), tap(&axis, (x - tau) / s)]);
            }
        }
        let obstacle = xs.iter().map(|&x| reduced_obstacle(kind, x)).collect();
        Ok(Self { kind, axis, xs, taus: taus.to_vec(), prefactor, taps, obstacle })
    }

    pub fn kind(&self) -> ReducedKind<T> {
        self.kind
    }

    pub fn axis(&self) -> &Axis<T> {
        &self.axis
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn taus(&self) -> &[T] {
        &self.taus
    }

    /// Reduced obstacle on the lattice (`SENTINEL` for `+∞`).
    pub fn obstacle(&self) -> &[T] {
        &self.obstacle
    }

    #[inline]
    fn read(&self, b: &[T], t: &Tap<T>, exterior_infinite: bool) -> T {
        if t.i0 == usize::MAX {
            if exterior_infinite {
                T::lit(SENTINEL)
            } else {
                reduced_obstacle(self.kind, t.y)
            }
        } else {
            let lo = b[t.i0];
            if t.w == T::zero() {
                lo
            } else {
                lo + (b[t.i0 + 1] - lo) * t.w
            }
        }
    }

    /// One sweep: `out = max(b, best step)` for Davis, `min(b, best step)`
    /// for Bollobás. Reads outside the lattice use the reduced obstacle, which
    /// is exact there as long as the lattice covers `|x| ≤ c_α` (resp.
    /// `|ξ| ≤ 1`).
    pub fn apply(&self, b: &[T], out: &mut [T]) {
        self.apply_with(b, out, false);
    }

    /// As [`apply`](Self::apply), optionally reading `SENTINEL` off the
    /// lattice (the zero-depth Bollobás profile is `+∞` everywhere).
    pub fn apply_with(&self, b: &[T], out: &mut [T], exterior_infinite: bool) {
        let n = self.xs.len();
        assert_eq!(b.len(), n);
        assert_eq!(out.len(), n);
        let sentinel = T::lit(SENTINEL);
        match self.kind {
            ReducedKind::Davis { .. } => {
                out.copy_from_slice(b);
                for (k, &pf) in self.prefactor.iter().enumerate() {
                    let taps = &self.taps[k * n..(k + 1) * n];
                    for (o, t) in out.iter_mut().zip(taps) {
                        let v = pf * (self.read(b, &t[0], exterior_infinite) + self.read(b, &t[1], exterior_infinite));
                        if v > *o {
                            *o = v;
                        }
                    }
                }
            }
            ReducedKind::Bollobas => {
                for ((o, &x), &old) in out.iter_mut().zip(&self.xs).zip(b) {
                    *o = old.min(x.abs().max(T::one()));
                }
                for (k, &pf) in self.prefactor.iter().enumerate() {
                    let taps = &self.taps[k * n..(k + 1) * n];
                    for (o, t) in out.iter_mut().zip(taps) {
                        let v = pf * (self.read(b, &t[0], exterior_infinite) + self.read(b, &t[1], exterior_infinite));
                        if v < *o {
                            *o = v;
                        }
                    }
                }
                for o in out.iter_mut() {
                    *o = o.min(sentinel);
                }
            }
        }
    }

    /// Linear interpolation of a lattice profile, obstacle outside.
    pub fn interpolate(&self, b: &[T], x: T) -> T {
        self.read(b, &tap(&self.axis, x), false)
    }
}

fn tap<T: Scalar>(axis: &Axis<T>, y: T) -> Tap<T> {
    if !(y >= axis.min && y <= axis.max) {
        return Tap { i0: usize::MAX, w: T::zero(), y };
    }
    let h = axis.spacing();
    let pos = (y - axis.min) / h;
    let mut i0 = pos.floor().to_usize().unwrap_or(0);
    if i0 >= axis.n - 1 {
        i0 = axis.n - 2;
    }
    let w = (pos - T::from_usize_lossy(i0)).max(T::zero()).min(T::one());
    Tap { i0, w, y }
}

pub fn reduced_obstacle<T: Scalar>(kind: ReducedKind<T>, x: T) -> T {
    match kind {
        ReducedKind::Davis { alpha, c_alpha } => c_alpha.powf(alpha) - x.abs().powf(alpha),
        ReducedKind::Bollobas => {
            if x.abs() >= T::one() {
                x.abs()
            } else {
                T::lit(SENTINEL)
            }
        }
    }
}

/// `count` log-spaced values on `[lo, hi]`.
pub fn geometric_steps<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln() / T::from_usize_lossy(count - 1);
            (0..count)
                .map(|i| if i + 1 == count { hi } else { lo * (ratio * T::from_usize_lossy(i)).exp() })
                .collect()
        }
    }
}

//! Test functions on the dyadic tree of `[0, 1)`, the square function, and
//! depth-limited dynamic-programming oracles for both Bellman functions.
//!
//! Node `J` at level `l` has heap index `2^l − 1 + i`. Its martingale
//! difference is `d_J = (⟨f⟩_{J−} − ⟨f⟩_{J+})/2`, so `Δ_J f = ±d_J` on the
//! left/right half of `J` and `(Sf)² = Σ_J d_J²` along each leaf's ancestry.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bollobas::weak_type_constant;
use crate::error::{Error, Result};
use crate::lattice::Axis;
use crate::reduced::{geometric_steps, ReducedKind, ReducedOperator, SENTINEL};
use crate::report::{MarginTracker, VerificationReport};
use crate::scalar::Scalar;
use crate::specfn::DavisConstant;

/// Largest depth for explicit trees (`2^24` leaves).
pub const MAX_TREE_DEPTH: usize = 24;
/// Largest depth accepted by the DP oracles.
pub const MAX_ORACLE_DEPTH: usize = 20;

/// A function constant on the intervals of one dyadic generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicTestFunction<T> {
    depth: usize,
    leaves: Vec<T>,
}

impl<T: Scalar> DyadicTestFunction<T> {
    pub fn new(depth: usize, leaves: Vec<T>) -> Result<Self> {
        check_depth(depth)?;
        if leaves.len() != 1 << depth {
            return Err(Error::InvalidParameter(format!(
                "depth {depth} needs {} leaves, got {}",
                1usize << depth,
                leaves.len()
            )));
        }
        Ok(Self { depth, leaves })
    }

    pub fn constant(depth: usize, value: T) -> Result<Self> {
        check_depth(depth)?;
        Ok(Self { depth, leaves: vec![value; 1 << depth] })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaves(&self) -> &[T] {
        &self.leaves
    }

    pub fn mean(&self) -> T {
        haar_decompose(self).mean
    }

    /// `⟨g(f)⟩` over the leaves.
    pub fn average<G: Fn(T) -> T>(&self, g: G) -> T {
        self.leaves.iter().map(|&v| g(v)).sum::<T>() / T::from_usize_lossy(self.leaves.len())
    }

    /// Depth on the first line, then one leaf value per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.depth);
        for v in &self.leaves {
            writeln!(out, "{v}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let depth: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty test function text".into()))?
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad depth: {e}")))?;
        let leaves = lines
            .map(|l| {
                l.parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::InvalidParameter(format!("bad leaf value {l:?}: {e}")))
            })
            .collect::<Result<Vec<T>>>()?;
        Self::new(depth, leaves)
    }
}

fn check_depth(depth: usize) -> Result<()> {
    if depth > MAX_TREE_DEPTH {
        return Err(Error::DepthOverflow { depth, limit: MAX_TREE_DEPTH });
    }
    Ok(())
}

/// Root average plus one difference per internal node, in heap order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarDecomposition<T> {
    pub depth: usize,
    pub mean: T,
    pub differences: Vec<T>,
}

impl<T: Scalar> HaarDecomposition<T> {
    /// Differences of the nodes on level `l`.
    pub fn level(&self, l: usize) -> &[T] {
        &self.differences[(1 << l) - 1..(1 << (l + 1)) - 1]
    }
}

/// Bottom-up averaging. The round trip through [`reconstruct`] is exact
/// whenever the pairwise sums and halvings are (for instance leaves on a
/// common dyadic grid), and accurate to a few ulps otherwise.
pub fn haar_decompose<T: Scalar>(f: &DyadicTestFunction<T>) -> HaarDecomposition<T> {
    let half = T::lit(0.5);
    let mut differences = vec![T::zero(); (1 << f.depth) - 1];
    let mut level: Vec<T> = f.leaves.clone();
    for l in (0..f.depth).rev() {
        let base = (1 << l) - 1;
        let next: Vec<T> = level
            .chunks_exact(2)
            .enumerate()
            .map(|(i, pair)| {
                differences[base + i] = (pair[0] - pair[1]) * half;
                (pair[0] + pair[1]) * half
            })
            .collect();
        level = next;
    }
    HaarDecomposition { depth: f.depth, mean: level[0], differences }
}

pub fn reconstruct<T: Scalar>(h: &HaarDecomposition<T>) -> Result<DyadicTestFunction<T>> {
    check_depth(h.depth)?;
    if h.differences.len() != (1 << h.depth) - 1 {
        return Err(Error::InvalidParameter("difference count does not match depth".into()));
    }
    let mut level = vec![h.mean];
    for l in 0..h.depth {
        let diffs = h.level(l);
        level = level
            .iter()
            .zip(diffs)
            .flat_map(|(&avg, &d)| [avg + d, avg - d])
            .collect();
    }
    DyadicTestFunction::new(h.depth, level)
}

/// Leafwise values of `Sf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareFunctionProfile<T> {
    pub values: Vec<T>,
}

pub fn square_function<T: Scalar>(f: &DyadicTestFunction<T>) -> SquareFunctionProfile<T> {
    let h = haar_decompose(f);
    let mut sq = vec![T::zero()];
    for l in 0..h.depth {
        let diffs = h.level(l);
        sq = sq
            .iter()
            .zip(diffs)
            .flat_map(|(&s, &d)| {
                let v = s + d * d;
                [v, v]
            })
            .collect();
    }
    SquareFunctionProfile { values: sq.into_iter().map(|v| v.sqrt()).collect() }
}

/// `U(⟨f⟩, q) − ⟨U(f, √(q² + (Sf)²))⟩`.
pub fn bellman_induction_margin<T: Scalar, U: Fn(T, T) -> T>(u: &U, f: &DyadicTestFunction<T>, q: T) -> T {
    let s = square_function(f);
    let n = T::from_usize_lossy(f.leaves.len());
    let rhs = f
        .leaves
        .iter()
        .zip(&s.values)
        .map(|(&v, &sv)| u(v, (q * q + sv * sv).sqrt()))
        .sum::<T>()
        / n;
    u(f.mean(), q) - rhs
}

pub fn check_bellman_induction<T: Scalar, U: Fn(T, T) -> T>(
    u: &U,
    f: &DyadicTestFunction<T>,
    q: T,
    tol: T,
) -> VerificationReport {
    let margin = bellman_induction_margin(u, f, q);
    VerificationReport::from_margin("dyadic.bellman_induction", margin.as_f64(), vec![f.mean().as_f64(), q.as_f64()], tol.as_f64())
}

/// `Σ a_k r_k`: every node on level `k − 1` carries difference `a_k`.
pub fn rademacher_test_function<T: Scalar>(coeffs: &[T]) -> Result<DyadicTestFunction<T>> {
    let depth = coeffs.len();
    check_depth(depth)?;
    let mut differences = Vec::with_capacity((1 << depth) - 1);
    for (l, &a) in coeffs.iter().enumerate() {
        differences.extend(std::iter::repeat_n(a, 1 << l));
    }
    reconstruct(&HaarDecomposition { depth, mean: T::zero(), differences })
}

/// Spread of the random test-function generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeParams {
    /// Half-width of the root difference distribution.
    pub sigma: f64,
    /// Per-level factor applied to `sigma`.
    pub decay: f64,
}

impl Default for RandomTreeParams {
    fn default() -> Self {
        // keeps depth-10 leaves inside |p| ≤ 3
        Self { sigma: 0.45, decay: 0.8 }
    }
}

/// Root value uniform in `[−1, 1]`, level-`l` differences uniform in
/// `[−σ decay^l, σ decay^l]`.
pub fn random_test_function<T: Scalar, R: Rng>(rng: &mut R, depth: usize, params: RandomTreeParams) -> Result<DyadicTestFunction<T>> {
    check_depth(depth)?;
    let mean = T::lit(rng.random_range(-1.0..=1.0));
    let mut differences = Vec::with_capacity((1 << depth) - 1);
    let mut sigma = params.sigma;
    for l in 0..depth {
        for _ in 0..1usize << l {
            differences.push(T::lit(if sigma > 0.0 { rng.random_range(-sigma..=sigma) } else { 0.0 }));
        }
        sigma *= params.decay;
    }
    reconstruct(&HaarDecomposition { depth, mean, differences })
}

/// Independent generator for sample `index` of a seeded run.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `count` seeded random test functions; sample `i` uses stream `i`.
pub fn random_test_functions<T: Scalar>(
    seed: u64,
    count: usize,
    depth: usize,
    params: RandomTreeParams,
) -> Result<Vec<DyadicTestFunction<T>>> {
    (0..count)
        .map(|i| random_test_function(&mut sample_rng(seed, i as u64), depth, params))
        .collect()
}

/// `c_α^α ⟨(Sf)^α⟩ ≤ ⟨|f|^α⟩`, margin `⟨|f|^α⟩ − c_α^α ⟨(Sf)^α⟩`.
pub fn davis_margin<T: Scalar>(constant: &DavisConstant<T>, f: &DyadicTestFunction<T>) -> T {
    let alpha = constant.alpha;
    let s = square_function(f);
    let n = T::from_usize_lossy(s.values.len());
    let s_alpha = s.values.iter().map(|v| v.powf(alpha)).sum::<T>() / n;
    f.average(|v| v.abs().powf(alpha)) - constant.c_alpha.powf(alpha) * s_alpha
}

/// `Ψ(1) ⟨|f|⟩ − sup_λ λ |{Sf ≥ λ}|`. The supremum is attained at one of
/// the leaf values of `Sf`, so all of them are tried.
pub fn weak_type_margin<T: Scalar>(f: &DyadicTestFunction<T>) -> (T, T) {
    let mut s = square_function(f).values;
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n = T::from_usize_lossy(s.len());
    let (mut worst, mut at) = (T::zero(), T::zero());
    let mut i = 0;
    while i < s.len() {
        let level = s[i];
        // include every leaf tied at this level
        while i < s.len() && s[i] >= level {
            i += 1;
        }
        let lhs = level * T::from_usize_lossy(i) / n;
        if lhs > worst {
            worst = lhs;
            at = level;
        }
    }
    (weak_type_constant::<T>() * f.average(|v| v.abs()) - worst, at)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReports {
    pub davis: VerificationReport,
    pub weak_type: VerificationReport,
}

/// Both integral inequalities over seeded random test functions.
pub fn empirical_inequality_suite<T: Scalar>(
    constant: &DavisConstant<T>,
    n_samples: usize,
    depth: usize,
    seed: u64,
    params: RandomTreeParams,
    tol: T,
) -> Result<EmpiricalReports> {
    let mut davis = MarginTracker::new("dyadic.empirical_davis");
    let mut weak = MarginTracker::new("dyadic.empirical_weak_type");
    for i in 0..n_samples {
        let f = random_test_function::<T, _>(&mut sample_rng(seed, i as u64), depth, params)?;
        davis.observe(davis_margin(constant, &f).as_f64(), &[i as f64]);
        let (m, level) = weak_type_margin(&f);
        weak.observe(m.as_f64(), &[i as f64, level.as_f64()]);
    }
    Ok(EmpiricalReports { davis: davis.finish(tol.as_f64()), weak_type: weak.finish(tol.as_f64()) })
}

/// Reduced lattice and relative steps for a DP oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid<T> {
    pub axis: Axis<T>,
    pub taus: Vec<T>,
}

impl<T: Scalar> OracleGrid<T> {
    /// `x ∈ [−2, 2]` with 801 points, 64 log-spaced `τ ∈ [Δx, 4]`.
    pub fn davis_default() -> Self {
        let axis = Axis { min: T::lit(-2.0), max: T::lit(2.0), n: 801 };
        let taus = geometric_steps(axis.spacing(), T::lit(4.0), 64);
        Self { axis, taus }
    }

    /// `ξ ∈ [−3, 3]` with 1201 points, 64 log-spaced `τ ∈ [Δξ, 1 − 10⁻⁶]`.
    pub fn bollobas_default() -> Self {
        let axis = Axis { min: T::lit(-3.0), max: T::lit(3.0), n: 1201 };
        let taus = geometric_steps(axis.spacing(), T::lit(1.0 - 1e-6), 64);
        Self { axis, taus }
    }
}

fn check_oracle_depth(depth: usize) -> Result<()> {
    if depth > MAX_ORACLE_DEPTH {
        return Err(Error::DepthOverflow { depth, limit: MAX_ORACLE_DEPTH });
    }
    Ok(())
}

/// Reduced Davis profiles `b_0, …, b_depth` on the oracle lattice.
fn davis_profiles<T: Scalar>(constant: &DavisConstant<T>, depth: usize, grid: &OracleGrid<T>) -> Result<(ReducedOperator<T>, Vec<Vec<T>>)> {
    let kind = ReducedKind::Davis { alpha: constant.alpha, c_alpha: constant.c_alpha };
    let op = ReducedOperator::new(kind, grid.axis, &grid.taus)?;
    let mut profiles = vec![op.obstacle().to_vec()];
    for _ in 0..depth {
        let mut next = vec![T::zero(); op.xs().len()];
        op.apply(profiles.last().unwrap(), &mut next);
        profiles.push(next);
    }
    Ok((op, profiles))
}

/// Lower bound for the Davis Bellman function: supremum of
/// `⟨O₀(f, √(q² + (Sf)²))⟩` over test functions of depth at most `depth`
/// with `⟨f⟩ = p`, computed on the reduced lattice. Nondecreasing in depth.
pub fn sup_oracle_davis<T: Scalar>(constant: &DavisConstant<T>, p: T, q: T, depth: usize, grid: &OracleGrid<T>) -> Result<T> {
    Ok(*sup_oracle_davis_by_depth(constant, p, q, depth, grid)?.last().unwrap())
}

/// Oracle values for every depth `0..=depth`.
pub fn sup_oracle_davis_by_depth<T: Scalar>(
    constant: &DavisConstant<T>,
    p: T,
    q: T,
    depth: usize,
    grid: &OracleGrid<T>,
) -> Result<Vec<T>> {
    check_oracle_depth(depth)?;
    let alpha = constant.alpha;
    let obstacle = constant.c_alpha.powf(alpha) * q.abs().powf(alpha) - p.abs().powf(alpha);
    let (op, profiles) = davis_profiles(constant, depth, grid)?;
    let q = q.abs();
    let mut out = vec![obstacle];
    for k in 1..=depth {
        let v = if q > T::zero() {
            q.powf(alpha) * op.interpolate(&profiles[k], p / q)
        } else if p == T::zero() {
            T::zero()
        } else {
            // first step from q = 0 explicitly, with a = τ|p|
            let prev = &profiles[k - 1];
            grid.taus.iter().fold(obstacle, |best, &tau| {
                let a = tau * p.abs();
                let v = T::lit(0.5) * a.powf(alpha) * (op.interpolate(prev, (p + a) / a) + op.interpolate(prev, (p - a) / a));
                best.max(v)
            })
        };
        out.push(v.max(out[k - 1]));
    }
    Ok(out)
}

/// Upper bound for the Bollobás Bellman function: infimum of `⟨|φ|⟩` over
/// test functions of depth at most `depth` with `⟨φ⟩ = x` and `S²φ ≥ λ`.
/// `+∞` is reported as [`SENTINEL`]. Nonincreasing in depth.
pub fn inf_oracle_bollobas<T: Scalar>(x: T, lambda: T, depth: usize, grid: &OracleGrid<T>) -> Result<T> {
    Ok(*inf_oracle_bollobas_by_depth(x, lambda, depth, grid)?.last().unwrap())
}

pub fn inf_oracle_bollobas_by_depth<T: Scalar>(x: T, lambda: T, depth: usize, grid: &OracleGrid<T>) -> Result<Vec<T>> {
    check_oracle_depth(depth)?;
    if lambda <= T::zero() {
        return Ok(vec![x.abs(); depth + 1]);
    }
    let op = ReducedOperator::new(ReducedKind::Bollobas, grid.axis, &grid.taus)?;
    let root = lambda.sqrt();
    let sentinel = T::lit(SENTINEL);
    let mut b = vec![sentinel; op.xs().len()];
    let mut out = vec![sentinel];
    for k in 1..=depth {
        let mut next = vec![T::zero(); b.len()];
        op.apply_with(&b, &mut next, k == 1);
        b = next;
        let v = (root * op.interpolate(&b, x / root)).min(sentinel);
        out.push(v.min(out[k - 1]));
    }
    Ok(out)
}

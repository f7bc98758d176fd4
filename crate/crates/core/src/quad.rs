//! One-dimensional quadrature helpers used by the kernel models.
//!
//! Finite pieces go through double-exponential (tanh-sinh) quadrature, which
//! copes with the algebraic endpoint singularities of power-law kernels.
//! Intervals whose error estimate misses the target are bisected.

use crate::error::{Error, Result};

/// Relative accuracy requested from every kernel-derived integral.
pub const REL_TOL: f64 = 1e-8;

const MAX_DEPTH: u32 = 18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;
    fn add(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
        }
    }
}

impl std::ops::Sub for QuadResult {
    type Output = QuadResult;
    fn sub(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value - other.value,
            error: self.error + other.error,
        }
    }
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult {
        value: 0.0,
        error: 0.0,
    };

    /// Fails with a diagnostic when the accumulated error estimate exceeds
    /// `rel_tol` relative to the value (or `abs_floor`, whichever is larger).
    pub fn checked(self, rel_tol: f64, abs_floor: f64) -> Result<f64> {
        let allowed = (rel_tol * self.value.abs()).max(abs_floor);
        if self.error <= allowed && self.value.is_finite() {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                achieved: self.error,
                requested: allowed,
            })
        }
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// An interval starting at zero is treated as possibly singular there and is
/// summed over dyadic shells with a geometric remainder.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> QuadResult {
    if !(b > a) {
        return QuadResult::ZERO;
    }
    if a == 0.0 {
        return integrate_from_zero(f, b, rel_tol, abs_floor);
    }
    integrate_rec(f, a, b, rel_tol, abs_floor, 0)
}

fn integrate_from_zero<F: Fn(f64) -> f64>(
    f: &F,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> QuadResult {
    const MAX_SHELLS: u32 = 400;
    let mut total = QuadResult::ZERO;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut hi = b;
    for _ in 0..MAX_SHELLS {
        let lo = 0.5 * hi;
        let shell = integrate_rec(f, lo, hi, rel_tol, abs_floor * 1e-3, 0);
        total = total + shell;
        hi = lo;
        let s = shell.value;
        if s == 0.0 {
            return total;
        }
        if let Some(p) = prev.filter(|&p| p != 0.0) {
            let ratio = s / p;
            if ratio > 0.0 && ratio < 1.0 {
                let remainder = s * ratio / (1.0 - ratio);
                let settled = prev_ratio.is_some_and(|q| (ratio - q).abs() <= 1e-7 * q);
                if settled || remainder.abs() <= 1e-3 * (rel_tol * total.value.abs()).max(abs_floor)
                {
                    return QuadResult {
                        value: total.value + remainder,
                        error: total.error + 1e-7 * remainder.abs(),
                    };
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(s);
    }
    let tail = prev.unwrap_or(0.0).abs();
    QuadResult {
        value: total.value,
        error: total.error + tail,
    }
}

fn integrate_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
    depth: u32,
) -> QuadResult {
    let out = quadrature::double_exponential::integrate(f, a, b, abs_floor.max(1e-300));
    let allowed = (rel_tol * out.integral.abs()).max(abs_floor);
    if out.error_estimate <= allowed || depth >= MAX_DEPTH {
        return QuadResult {
            value: out.integral,
            error: out.error_estimate,
        };
    }
    let mid = 0.5 * (a + b);
    let left = integrate_rec(f, a, mid, rel_tol, 0.5 * abs_floor, depth + 1);
    let right = integrate_rec(f, mid, b, rel_tol, 0.5 * abs_floor, depth + 1);
    left + right
}

/// Integrates `f` over `[a, ∞)` with `a > 0` through the substitution `r = a / u`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> QuadResult {
    debug_assert!(a > 0.0);
    let g = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            let r = a / u;
            f(r) * a / (u * u)
        }
    };
    integrate(&g, 0.0, 1.0, rel_tol, abs_floor)
}

/// Integrates over `[a, b]`, splitting at the supplied breakpoints.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_floor: f64,
) -> QuadResult {
    let mut knots = vec![a];
    knots.extend(breaks.iter().copied().filter(|&r| r > a && r < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    knots
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], rel_tol, abs_floor))
        .fold(QuadResult::ZERO, std::ops::Add::add)
}

/// Limit of a slowly converging, nearly alternating sequence of partial sums
/// by repeated averaging of neighbours (Euler transform).
pub fn euler_limit(partial_sums: &[f64]) -> (f64, f64) {
    match partial_sums.len() {
        0 => (0.0, 0.0),
        1 => (partial_sums[0], f64::INFINITY),
        _ => {
            let mut row = partial_sums.to_vec();
            let mut prev_last = row[row.len() - 1];
            while row.len() > 1 {
                prev_last = row[row.len() - 1];
                row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            }
            (row[0], (row[0] - prev_last).abs())
        }
    }
}

use serde::Serialize;

use super::{solve_general, GridFunction, GridOperator};
use crate::error::{arg, Result};
use crate::geometry::{Domain, Shape};
use crate::kernel::JumpKernel;

/// Slope of `log(u/δ)` against `log δ` below which `u/δ` is said to blow up.
pub const BLOWUP_SLOPE: f64 = -0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub eta_lower: f64,
    pub c_upper: f64,
    /// Least-squares slope of `log(u/δ)` on `log δ` over the band.
    pub log_slope: f64,
    pub n_nodes: usize,
    pub pass: bool,
}

fn ball_radius(domain: &Domain) -> Option<f64> {
    match domain.shape() {
        Shape::Ball { radius, .. } => Some(*radius),
        Shape::Interval { a, b } => Some(0.5 * (b - a)),
        _ => None,
    }
}

/// Two-sided linear boundary behaviour `η δ ≤ u ≤ C δ` on `δ ∈ [2h, R/4]`.
pub fn boundary_decay_check(op: &GridOperator, u: &GridFunction) -> Result<DecayReport> {
    let Some(radius) = ball_radius(&op.domain) else {
        return arg("boundary decay is checked on balls only");
    };
    let h = op.h();
    let (mut eta, mut cup) = (f64::INFINITY, 0.0f64);
    let mut pts = Vec::new();
    for (x, v) in u.points().iter().zip(&u.values) {
        let delta = op.domain.boundary_distance(x);
        if delta >= 2.0 * h - 1e-12 && delta <= 0.25 * radius {
            let ratio = v / delta;
            eta = eta.min(ratio);
            cup = cup.max(ratio);
            if ratio > 0.0 {
                pts.push((delta.ln(), ratio.ln()));
            }
        }
    }
    if pts.len() < 2 {
        return arg("too few nodes in the boundary band; decrease h");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let pass = eta > 0.0 && cup.is_finite() && slope > BLOWUP_SLOPE;
    Ok(DecayReport {
        eta_lower: eta,
        c_upper: cup,
        log_slope: slope,
        n_nodes: pts.len(),
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// `max |u(x) − ū(|x|)| / max|u|`, with `ū` the piecewise-linear profile of bin means.
    pub max_deviation: f64,
    pub bin_radii: Vec<f64>,
    pub bin_means: Vec<f64>,
    pub strictly_decreasing: bool,
    pub pass: bool,
}

/// Radial-symmetry and monotonicity check for `u` on a ball centred at the origin.
pub fn symmetry_check(domain: &Domain, u: &GridFunction, tolerance: f64) -> Result<SymmetryReport> {
    let centered = match domain.shape() {
        Shape::Ball { center, .. } => center.iter().all(|c| *c == 0.0),
        Shape::Interval { a, b } => *a == -*b,
        _ => false,
    };
    if !centered {
        return arg("symmetry is checked on balls centred at the origin");
    }
    let h = u.h();
    let pts = u.points();
    let radii: Vec<f64> = pts
        .iter()
        .map(|p| p.iter().map(|c| c * c).sum::<f64>().sqrt())
        .collect();
    let nbins = radii
        .iter()
        .map(|r| (r / h).floor() as usize)
        .max()
        .unwrap_or(0)
        + 1;
    let mut sum_r = vec![0.0; nbins];
    let mut sum_u = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for (r, v) in radii.iter().zip(&u.values) {
        let b = (r / h).floor() as usize;
        sum_r[b] += r;
        sum_u[b] += v;
        count[b] += 1;
    }
    let (mut br, mut bu) = (Vec::new(), Vec::new());
    for b in 0..nbins {
        if count[b] > 0 {
            br.push(sum_r[b] / count[b] as f64);
            bu.push(sum_u[b] / count[b] as f64);
        }
    }
    let profile = |r: f64| -> f64 {
        if br.len() == 1 {
            return bu[0];
        }
        let i = br.partition_point(|&x| x <= r).clamp(1, br.len() - 1);
        let (r0, r1, u0, u1) = (br[i - 1], br[i], bu[i - 1], bu[i]);
        u0 + (u1 - u0) * (r - r0) / (r1 - r0)
    };
    let scale = u.max_abs().max(f64::MIN_POSITIVE);
    let dev = radii
        .iter()
        .zip(&u.values)
        .map(|(r, v)| (v - profile(*r)).abs())
        .fold(0.0, f64::max)
        / scale;
    let decreasing = bu.windows(2).all(|w| w[1] < w[0]);
    Ok(SymmetryReport {
        max_deviation: dev,
        bin_radii: br.clone(),
        bin_means: bu.clone(),
        strictly_decreasing: decreasing,
        pass: dev <= tolerance && decreasing,
    })
}

/// Slab `(−1,1)^{d−1} × (0, w)`; the interval `(0, w)` in one dimension.
pub fn slab(dim: usize, width: f64) -> Result<Domain> {
    if dim == 1 {
        return Domain::interval(0.0, width);
    }
    let mut lo = vec![-1.0; dim];
    let mut hi = vec![1.0; dim];
    lo[dim - 1] = 0.0;
    hi[dim - 1] = width;
    Domain::axis_box(lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NarrowDomainReport {
    pub c: f64,
    pub widths: Vec<f64>,
    /// `max u` per width; `+∞` where the solve failed.
    pub max_u: Vec<f64>,
    /// Largest tested width such that every width up to it gave `u ≤ 0`.
    pub threshold: Option<f64>,
}

/// Solves `(L + c)u = 0` in slabs of the given widths with `g ≡ −1`, `c > 0`,
/// and locates the widths where the maximum principle `u ≤ 0` still holds.
pub fn narrow_domain_scan(
    kernel: &JumpKernel,
    c: f64,
    widths: &[f64],
    h: f64,
    r_max: Option<f64>,
) -> Result<NarrowDomainReport> {
    if !(c > 0.0) {
        return arg("the narrow-domain experiment needs c > 0");
    }
    let mut sorted = widths.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut max_u = Vec::new();
    let minus_one = |_: &[f64]| -1.0;
    let zero = |_: &[f64]| 0.0;
    let cfield = move |_: &[f64]| c;
    for &w in &sorted {
        let dom = slab(kernel.dimension(), w)?;
        let op = GridOperator::assemble(&dom, kernel, Some(&cfield), h, r_max, -1.0)?;
        let m = match solve_general(&op, &zero, &minus_one) {
            Ok((u, _)) => u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Err(_) => f64::INFINITY,
        };
        max_u.push(m);
    }
    let mut threshold = None;
    for (w, m) in sorted.iter().zip(&max_u) {
        if *m <= 1e-10 {
            threshold = Some(*w);
        } else {
            break;
        }
    }
    Ok(NarrowDomainReport {
        c,
        widths: sorted,
        max_u,
        threshold,
    })
}

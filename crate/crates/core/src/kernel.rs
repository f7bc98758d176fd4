//! Jump kernels `j(y)` for the nonlocal part of the operator
//!
//! ```text
//! L u(x) = Δu(x) + ∫ (u(x+y) − u(x) − 1{|y|≤1} y·∇u(x)) j(y) dy
//! ```
//!
//! Every supported family is radial, so integrals reduce to one-dimensional
//! radial quadrature weighted by the area of the unit sphere. Closed forms are
//! used wherever the family admits them. Tempered second moments reduce to
//! incomplete gamma functions; its masses and symbol go through quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::quad::{self, QuadResult, REL_TOL};

/// Spatial dimensions supported by the laboratory.
pub const MAX_DIMENSION: usize = 3;

/// Integrals beyond this magnitude are reported as divergent.
pub const DIVERGENCE_CAP: f64 = 1e12;

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => f64::NAN,
    }
}

/// Radial profile given by a table, interpolated piecewise log-log
/// (a power law between neighbouring knots) and extrapolated with the
/// end segments' power laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileTable")]
pub struct RadialProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct ProfileTable {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<ProfileTable> for RadialProfile {
    type Error = Error;

    fn try_from(t: ProfileTable) -> Result<Self> {
        Self::new(t.radii, t.values)
    }
}

impl RadialProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() < 2 || radii.len() != values.len() {
            return arg(
                "tabulated profile needs at least two (radius, value) pairs of equal length",
            );
        }
        if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return arg("tabulated radii must be positive and finite");
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return arg("tabulated radii must be strictly increasing");
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return arg("tabulated values must be positive and finite (log-log interpolation)");
        }
        Ok(Self { radii, values })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] / self.values[i]).ln() / (self.radii[i + 1] / self.radii[i]).ln()
    }

    fn eval(&self, r: f64) -> f64 {
        let n = self.radii.len();
        let i = match self.radii.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let anchor = if r >= self.radii[n - 1] { n - 1 } else { i };
        self.values[anchor] * (r / self.radii[anchor]).powf(self.slope(i))
    }

    fn pieces(&self) -> Vec<PowerPiece> {
        let n = self.radii.len();
        let mut out = Vec::with_capacity(n + 1);
        let p0 = self.slope(0);
        out.push(PowerPiece::new(
            0.0,
            self.radii[0],
            self.values[0] * self.radii[0].powf(-p0),
            p0,
        ));
        for i in 0..n - 1 {
            let p = self.slope(i);
            out.push(PowerPiece::new(
                self.radii[i],
                self.radii[i + 1],
                self.values[i] * self.radii[i].powf(-p),
                p,
            ));
        }
        let pl = self.slope(n - 2);
        out.push(PowerPiece::new(
            self.radii[n - 1],
            f64::INFINITY,
            self.values[n - 1] * self.radii[n - 1].powf(-pl),
            pl,
        ));
        out
    }

    fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Kernel families. Fractional profiles carry no normalising constant:
/// `j(y) = |y|^{-d-2s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    Zero,
    Fractional {
        s: f64,
    },
    TruncatedFractional {
        s: f64,
        r_trunc: f64,
    },
    TemperedFractional {
        s: f64,
        beta: f64,
    },
    /// `j(y) = (1 − |y|²/(2r∘)²)²` on `|y| < 2r∘`, positive on `|y| ≤ r∘`.
    CompactBump {
        r_pos: f64,
    },
    Tabulated(RadialProfile),
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Zero => "zero",
            KernelFamily::Fractional { .. } => "fractional",
            KernelFamily::TruncatedFractional { .. } => "truncated-fractional",
            KernelFamily::TemperedFractional { .. } => "tempered-fractional",
            KernelFamily::CompactBump { .. } => "compact-bump",
            KernelFamily::Tabulated(_) => "tabulated",
        }
    }
}

/// `c · r^p` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerPiece {
    a: f64,
    b: f64,
    c: f64,
    p: f64,
}

impl PowerPiece {
    fn new(a: f64, b: f64, c: f64, p: f64) -> Self {
        Self { a, b, c, p }
    }
}

/// `∫_a^b r^q dr`, infinite when the integral diverges.
fn power_integral(q: f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let e = q + 1.0;
    if e.abs() < 1e-14 {
        return if a == 0.0 || b.is_infinite() {
            f64::INFINITY
        } else {
            (b / a).ln()
        };
    }
    let upper = if b.is_infinite() {
        if e < 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        b.powf(e)
    };
    let lower = if a == 0.0 {
        if e > 0.0 {
            0.0
        } else {
            return f64::INFINITY;
        }
    } else {
        a.powf(e)
    };
    (upper - lower) / e
}

/// Small-jump/big-jump split of the kernel at radius `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallJumpStats {
    pub epsilon: f64,
    /// `λ_ε = ∫_{|y|>ε} j(y) dy`
    pub big_rate: f64,
    /// `Σ_ε = ∫_{|y|≤ε} y yᵀ j(y) dy`, row-major `d × d`.
    pub small_cov: Vec<f64>,
    /// `b_ε = ∫_{ε<|y|≤1} y j(y) dy`.
    pub compensator_drift: Vec<f64>,
}

impl SmallJumpStats {
    pub fn small_cov_trace(&self) -> f64 {
        let d = self.compensator_drift.len();
        (0..d).map(|i| self.small_cov[i * d + i]).sum()
    }
}

/// Value of `∫ (1 ∧ |y|²) j(y) dy` split at `|y| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    pub value: f64,
    /// `∫_{|y|≤1} |y|² j`
    pub near: f64,
    /// `∫_{|y|>1} j`
    pub tail: f64,
}

/// Outcome of the symbol-growth check on spheres of given radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A1Report {
    pub radii: Vec<f64>,
    /// `max |Im ψ(p)| / (|p|² + |Re ψ(p)|)` over all sampled `p`.
    pub im_ratio_max: f64,
    /// Minimum of `|p|² + Re ψ(p)` over each sphere.
    pub re_inf_per_radius: Vec<f64>,
    pub ratio_threshold: f64,
    pub pass: bool,
}

/// A Lévy jump density together with its structural flags.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpKernel {
    family: KernelFamily,
    dimension: usize,
    isotropic: bool,
    radially_decreasing: bool,
    symmetric: bool,
    positivity_radius: Option<f64>,
}

impl JumpKernel {
    pub fn new(family: KernelFamily, dimension: usize) -> Result<Self> {
        if !(1..=MAX_DIMENSION).contains(&dimension) {
            return arg(format!("dimension must be 1, 2 or 3, got {dimension}"));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let positivity_radius = match &family {
            KernelFamily::Zero => None,
            KernelFamily::Fractional { s } => {
                if !positive(*s) {
                    return arg(format!("fractional order s must be positive, got {s}"));
                }
                Some(f64::INFINITY)
            }
            KernelFamily::TruncatedFractional { s, r_trunc } => {
                if !(positive(*s) && *s < 1.0) {
                    return arg(format!("truncated-fractional needs s in (0,1), got {s}"));
                }
                if !positive(*r_trunc) {
                    return arg(format!("r_trunc must be positive, got {r_trunc}"));
                }
                Some(*r_trunc)
            }
            KernelFamily::TemperedFractional { s, beta } => {
                if !(positive(*s) && *s < 1.0) {
                    return arg(format!("tempered-fractional needs s in (0,1), got {s}"));
                }
                if !positive(*beta) {
                    return arg(format!("tempering rate beta must be positive, got {beta}"));
                }
                Some(f64::INFINITY)
            }
            KernelFamily::CompactBump { r_pos } => {
                if !positive(*r_pos) {
                    return arg(format!(
                        "bump positivity radius must be positive, got {r_pos}"
                    ));
                }
                Some(*r_pos)
            }
            KernelFamily::Tabulated(_) => Some(f64::INFINITY),
        };
        let radially_decreasing = match &family {
            KernelFamily::Tabulated(p) => p.is_nonincreasing(),
            _ => true,
        };
        Ok(Self {
            family,
            dimension,
            isotropic: true,
            radially_decreasing,
            symmetric: true,
            positivity_radius,
        })
    }

    pub fn zero(dimension: usize) -> Result<Self> {
        Self::new(KernelFamily::Zero, dimension)
    }

    pub fn fractional(s: f64, dimension: usize) -> Result<Self> {
        Self::new(KernelFamily::Fractional { s }, dimension)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    pub fn is_radially_decreasing(&self) -> bool {
        self.radially_decreasing
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn positivity_radius(&self) -> Option<f64> {
        self.positivity_radius
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, KernelFamily::Zero)
    }

    /// Radial profile `j(r)` for `r > 0`.
    pub fn profile(&self, r: f64) -> f64 {
        let d = self.dimension as f64;
        match &self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::Fractional { s } => r.powf(-d - 2.0 * s),
            KernelFamily::TruncatedFractional { s, r_trunc } => {
                if r <= *r_trunc {
                    r.powf(-d - 2.0 * s)
                } else {
                    0.0
                }
            }
            KernelFamily::TemperedFractional { s, beta } => {
                r.powf(-d - 2.0 * s) * (-beta * r).exp()
            }
            KernelFamily::CompactBump { r_pos } => {
                let q = r / (2.0 * r_pos);
                if q < 1.0 {
                    let t = 1.0 - q * q;
                    t * t
                } else {
                    0.0
                }
            }
            KernelFamily::Tabulated(p) => p.eval(r),
        }
    }

    /// `j(y)`; the kernel is singular (or undefined) at the origin.
    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        let r = norm(y);
        if r == 0.0 {
            return Err(Error::Domain("jump kernel is not defined at y = 0".into()));
        }
        Ok(self.profile(r))
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension {
            return arg(format!(
                "expected a {}-vector, got length {}",
                self.dimension,
                v.len()
            ));
        }
        Ok(())
    }

    /// Radii at which the profile has kinks or ends.
    fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            KernelFamily::TruncatedFractional { r_trunc, .. } => vec![*r_trunc],
            KernelFamily::CompactBump { r_pos } => vec![2.0 * r_pos],
            KernelFamily::Tabulated(p) => p.radii.clone(),
            _ => Vec::new(),
        }
    }

    fn support_radius(&self) -> f64 {
        match &self.family {
            KernelFamily::Zero => 0.0,
            KernelFamily::TruncatedFractional { r_trunc, .. } => *r_trunc,
            KernelFamily::CompactBump { r_pos } => 2.0 * r_pos,
            _ => f64::INFINITY,
        }
    }

    fn power_pieces(&self) -> Option<Vec<PowerPiece>> {
        let d = self.dimension as f64;
        match &self.family {
            KernelFamily::Zero => Some(Vec::new()),
            KernelFamily::Fractional { s } => {
                Some(vec![PowerPiece::new(0.0, f64::INFINITY, 1.0, -d - 2.0 * s)])
            }
            KernelFamily::TruncatedFractional { s, r_trunc } => {
                Some(vec![PowerPiece::new(0.0, *r_trunc, 1.0, -d - 2.0 * s)])
            }
            KernelFamily::TemperedFractional { .. } => None,
            KernelFamily::CompactBump { r_pos } => {
                let big = 2.0 * r_pos;
                let b2 = big * big;
                Some(vec![
                    PowerPiece::new(0.0, big, 1.0, 0.0),
                    PowerPiece::new(0.0, big, -2.0 / b2, 2.0),
                    PowerPiece::new(0.0, big, 1.0 / (b2 * b2), 4.0),
                ])
            }
            KernelFamily::Tabulated(p) => Some(p.pieces()),
        }
    }

    /// `∫_a^b r^{d−1+m} j(r) dr`, using closed forms where available.
    fn radial_moment(&self, m: f64, a: f64, b: f64) -> Result<f64> {
        let d = self.dimension as f64;
        if let Some(pieces) = self.power_pieces() {
            let mut total = 0.0;
            for pc in pieces {
                let lo = a.max(pc.a);
                let hi = b.min(pc.b);
                if hi > lo {
                    total += pc.c * power_integral(d - 1.0 + m + pc.p, lo, hi);
                }
            }
            return Ok(total);
        }
        if let KernelFamily::TemperedFractional { s, beta } = self.family {
            // r^q e^{−βr} with q > −1 integrates to incomplete gamma functions
            let a1 = m - 2.0 * s;
            if a1 > 0.0 {
                let (xa, xb) = (beta * a, beta * b);
                let scale = puruspe::gamma(a1) * beta.powf(-a1);
                let part = if xa > a1 {
                    puruspe::gammq(a1, xa)
                        - if xb.is_infinite() {
                            0.0
                        } else {
                            puruspe::gammq(a1, xb)
                        }
                } else {
                    (if xb.is_infinite() {
                        1.0
                    } else {
                        puruspe::gammp(a1, xb)
                    }) - puruspe::gammp(a1, xa)
                };
                return Ok(scale * part);
            }
        }
        let f = |r: f64| r.powf(d - 1.0 + m) * self.profile(r);
        let breaks = self.breakpoints();
        let res = if b.is_infinite() {
            let hi = if a > 0.0 { a } else { 1.0 };
            let head = if a == 0.0 {
                quad::integrate_split(&f, 0.0, 1.0, &breaks, 1e-11, 1e-300)
            } else {
                QuadResult::ZERO
            };
            head + quad::integrate_to_infinity(&f, hi, 1e-11, 1e-300)
        } else {
            quad::integrate_split(&f, a, b, &breaks, 1e-11, 1e-300)
        };
        res.checked(REL_TOL, 1e-14)
    }

    /// Mass `∫_{|y|>r} j(y) dy` for any `r > 0`.
    pub fn mass_beyond(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return arg(format!("radius must be positive, got {r}"));
        }
        Ok(unit_sphere_area(self.dimension) * self.radial_moment(0.0, r, f64::INFINITY)?)
    }

    /// Second moment `∫_{|y|<r} |y|² j(y) dy`.
    pub fn second_moment_within(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return arg(format!("radius must be positive, got {r}"));
        }
        Ok(unit_sphere_area(self.dimension) * self.radial_moment(2.0, 0.0, r)?)
    }

    /// `∫ (1 ∧ |y|²) j(y) dy` by radial quadrature over dyadic shells, split at `|y| = 1`.
    ///
    /// A piece is declared divergent when its shell masses stop decaying for
    /// three successive halvings (doublings for the tail), or when the partial
    /// sum exceeds [`DIVERGENCE_CAP`].
    pub fn levy_integrability(&self) -> Result<Integrability> {
        if self.is_zero() {
            return Ok(Integrability {
                value: 0.0,
                near: 0.0,
                tail: 0.0,
            });
        }
        let d = self.dimension as f64;
        let omega = unit_sphere_area(self.dimension);
        let breaks = self.breakpoints();
        let near_f = |r: f64| r.powf(d + 1.0) * self.profile(r);
        let tail_f = |r: f64| r.powf(d - 1.0) * self.profile(r);
        let near = shell_sum("near-origin", |k| {
            let hi = 0.5f64.powi(k as i32);
            quad::integrate_split(&near_f, 0.5 * hi, hi, &breaks, 1e-12, 1e-300)
        })?;
        let support = self.support_radius();
        let tail = shell_sum("tail", |k| {
            let lo = 2f64.powi(k as i32);
            if lo >= support {
                QuadResult::ZERO
            } else {
                quad::integrate_split(&tail_f, lo, 2.0 * lo, &breaks, 1e-12, 1e-300)
            }
        })?;
        let near = omega * near;
        let tail = omega * tail;
        Ok(Integrability {
            value: near + tail,
            near,
            tail,
        })
    }

    /// Lévy-Khinchine exponent `ψ(z)` of the jump part.
    ///
    /// Symmetric kernels use the cosine form, so the imaginary part is exactly zero.
    pub fn symbol(&self, z: &[f64]) -> Result<Complex64> {
        self.check_len(z)?;
        if let KernelFamily::Fractional { s } = self.family {
            if s < 1.0 {
                return Ok(Complex64::new(
                    fractional_symbol_constant(self.dimension, s) * norm(z).powf(2.0 * s),
                    0.0,
                ));
            }
        }
        self.symbol_quadrature(z)
    }

    /// `ψ(z)` by radial quadrature, bypassing every closed form.
    pub fn symbol_quadrature(&self, z: &[f64]) -> Result<Complex64> {
        self.check_len(z)?;
        let k = norm(z);
        if k == 0.0 || self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.levy_integrability()?;
        let d = self.dimension;
        let df = d as f64;
        let omega = unit_sphere_area(d);
        let breaks = self.breakpoints();
        let support = self.support_radius();
        let one_minus =
            |r: f64| r.powf(df - 1.0) * self.profile(r) * one_minus_sphere_average(d, k * r);
        let first = spherical_zero(d, 0) / k;

        if support.is_finite() {
            // Finite support: integrate the whole thing in half-period chunks.
            let mut total = QuadResult::ZERO;
            let mut lo = 0.0;
            let mut n = 0;
            while lo < support {
                let hi = (spherical_zero(d, n) / k).min(support);
                total = total + quad::integrate_split(&one_minus, lo, hi, &breaks, 1e-12, 1e-300);
                lo = hi;
                n += 1;
            }
            return Ok(Complex64::new(omega * total.checked(REL_TOL, 1e-14)?, 0.0));
        }

        let head = quad::integrate_split(&one_minus, 0.0, first, &breaks, 1e-12, 1e-300)
            .checked(REL_TOL, 1e-15)?;
        let mass = self.radial_moment(0.0, first, f64::INFINITY)?;
        let osc = |r: f64| r.powf(df - 1.0) * self.profile(r) * sphere_average(d, k * r);
        let mut partial = Vec::new();
        let mut acc = 0.0;
        let mut err = 0.0;
        let mut lo = first;
        for n in 1..400 {
            let hi = spherical_zero(d, n) / k;
            let piece = quad::integrate_split(&osc, lo, hi, &breaks, 1e-12, 1e-300);
            acc += piece.value;
            err += piece.error;
            partial.push(acc);
            lo = hi;
            let envelope = hi.powf(df - 1.0) * self.profile(hi) / k;
            if n >= 24 && envelope < 1e-13 * (mass.abs() + head.abs()) {
                break;
            }
            if n >= 60 {
                break;
            }
        }
        let tail_len = partial.len().min(24);
        let (osc_value, accel_err) = quad::euler_limit(&partial[partial.len() - tail_len..]);
        let value = head + mass - osc_value;
        let achieved = err + accel_err;
        let allowed = REL_TOL * value.abs().max(1e-300);
        if achieved > allowed.max(1e-14) {
            return Err(Error::Quadrature {
                achieved,
                requested: allowed,
            });
        }
        Ok(Complex64::new(omega * value, 0.0))
    }

    /// Checks `sup_{|p|≤r} (|p|² + Re ψ(p)) > 0` on each tested sphere and
    /// reports the ratio `|Im ψ| / (|p|² + |Re ψ|)`.
    ///
    /// `ratio_threshold` bounds the ratio (the growth constant is not known a
    /// priori); `None` only requires it to be finite.
    pub fn check_a1(&self, radii: &[f64], ratio_threshold: Option<f64>) -> Result<A1Report> {
        if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return arg("check_a1 needs a non-empty list of positive radii");
        }
        let dirs = sphere_directions(self.dimension);
        let mut im_ratio_max: f64 = 0.0;
        let mut re_inf = Vec::with_capacity(radii.len());
        let mut all_positive = true;
        for &r in radii {
            let mut inf = f64::INFINITY;
            let mut sup = f64::NEG_INFINITY;
            let mut cached: Option<Complex64> = None;
            for dir in &dirs {
                let p: Vec<f64> = dir.iter().map(|c| c * r).collect();
                let psi = match (self.isotropic, cached) {
                    (true, Some(v)) => v,
                    _ => {
                        let v = self.symbol(&p)?;
                        cached = Some(v);
                        v
                    }
                };
                let growth = r * r + psi.re;
                inf = inf.min(growth);
                sup = sup.max(growth);
                let ratio = psi.im.abs() / (r * r + psi.re.abs());
                im_ratio_max = im_ratio_max.max(ratio);
            }
            all_positive &= sup > 0.0;
            re_inf.push(inf);
        }
        let threshold = ratio_threshold.unwrap_or(f64::INFINITY);
        let pass = all_positive && im_ratio_max.is_finite() && im_ratio_max <= threshold;
        Ok(A1Report {
            radii: radii.to_vec(),
            im_ratio_max,
            re_inf_per_radius: re_inf,
            ratio_threshold: threshold,
            pass,
        })
    }

    /// Splits the kernel at radius `epsilon ∈ (0, 1]`.
    pub fn small_jump_stats(&self, epsilon: f64) -> Result<SmallJumpStats> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return arg(format!("epsilon must lie in (0, 1], got {epsilon}"));
        }
        let d = self.dimension;
        let mut small_cov = vec![0.0; d * d];
        if self.is_zero() {
            return Ok(SmallJumpStats {
                epsilon,
                big_rate: 0.0,
                small_cov,
                compensator_drift: vec![0.0; d],
            });
        }
        let big_rate = self.mass_beyond(epsilon)?;
        let second = self.second_moment_within(epsilon)?;
        if !big_rate.is_finite() || !second.is_finite() {
            return Err(Error::Divergent {
                piece: if big_rate.is_finite() {
                    "near-origin"
                } else {
                    "tail"
                },
                partial: if big_rate.is_finite() {
                    second
                } else {
                    big_rate
                },
            });
        }
        for i in 0..d {
            small_cov[i * d + i] = second / d as f64;
        }
        // Radial kernels are even, so the compensator drift vanishes.
        Ok(SmallJumpStats {
            epsilon,
            big_rate,
            small_cov,
            compensator_drift: vec![0.0; d],
        })
    }

    /// Draws one jump with density `j(y) 1{|y|>ε} / λ_ε`.
    pub fn sample_big_jump<R: Rng + ?Sized>(&self, epsilon: f64, rng: &mut R) -> Result<Vec<f64>> {
        let sampler = BigJumpSampler::new(self, epsilon)?;
        let mut out = vec![0.0; self.dimension];
        sampler.sample_into(rng, &mut out);
        Ok(out)
    }
}

/// Accumulates dyadic shell integrals, detecting divergence and adding a
/// geometric remainder once the shell ratio has settled.
fn shell_sum<F: Fn(u32) -> QuadResult>(piece: &'static str, shell: F) -> Result<f64> {
    const MAX_SHELLS: u32 = 1000;
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut stalled = 0;
    for k in 0..MAX_SHELLS {
        let s = shell(k).checked(1e-6, 1e-300)?;
        total += s;
        if !total.is_finite() || total > DIVERGENCE_CAP {
            return Err(Error::Divergent {
                piece,
                partial: total,
            });
        }
        if s == 0.0 {
            if k > 0 || total == 0.0 {
                return Ok(total);
            }
            prev = Some(s);
            continue;
        }
        if let Some(p) = prev.filter(|&p| p > 0.0) {
            let ratio = s / p;
            if ratio >= 0.99 {
                stalled += 1;
                if stalled >= 3 {
                    return Err(Error::Divergent {
                        piece,
                        partial: total,
                    });
                }
            } else {
                stalled = 0;
                let settled = prev_ratio.is_some_and(|q| (ratio - q).abs() <= 1e-6 * q.max(1e-300));
                let remainder = s * ratio / (1.0 - ratio);
                if settled || remainder <= 1e-13 * total {
                    return Ok(total + remainder);
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(s);
    }
    Err(Error::Divergent {
        piece,
        partial: total,
    })
}

/// `C` in `∫ (1 − cos(z·y)) |y|^{-d-2s} dy = C |z|^{2s}` for `0 < s < 1`.
pub fn fractional_symbol_constant(d: usize, s: f64) -> f64 {
    let alpha = 2.0 * s;
    // Γ(−s) = Γ(1 − s) / (−s)
    let gamma_neg = puruspe::gamma(1.0 - s) / s;
    PI.powf(d as f64 / 2.0) * gamma_neg
        / (2f64.powf(alpha) * puruspe::gamma((d as f64 + alpha) / 2.0))
}

/// Average of `cos(t ω·e)` over unit directions `ω` in `R^d`.
pub fn sphere_average(d: usize, t: f64) -> f64 {
    match d {
        1 => t.cos(),
        2 => puruspe::Jn(0, t.abs()),
        _ => {
            if t.abs() < 1e-4 {
                1.0 - t * t / 6.0
            } else {
                t.sin() / t
            }
        }
    }
}

/// `1 − sphere_average(d, t)` without cancellation for small `t`.
pub fn one_minus_sphere_average(d: usize, t: f64) -> f64 {
    match d {
        1 => {
            let h = (0.5 * t).sin();
            2.0 * h * h
        }
        2 => {
            if t.abs() < 0.5 {
                // 1 − J0(t) = Σ_{k≥1} (−1)^{k+1} (t²/4)^k / (k!)²
                let q = t * t / 4.0;
                let mut term = 1.0;
                let mut sum = 0.0;
                for k in 1..12 {
                    term *= -q / (k as f64 * k as f64);
                    sum -= term;
                }
                sum
            } else {
                1.0 - puruspe::Jn(0, t.abs())
            }
        }
        _ => {
            if t.abs() < 0.1 {
                let t2 = t * t;
                t2 / 6.0 - t2 * t2 / 120.0 + t2 * t2 * t2 / 5040.0
            } else {
                1.0 - t.sin() / t
            }
        }
    }
}

/// Approximate `n`-th positive zero of the spherical average (exact for d = 1, 3).
fn spherical_zero(d: usize, n: usize) -> f64 {
    let n = n as f64;
    match d {
        1 => (n + 0.5) * PI,
        2 => {
            // McMahon expansion for zeros of J0
            let b = (n + 0.75) * PI;
            b + 1.0 / (8.0 * b) - 31.0 / (384.0 * b.powi(3))
        }
        _ => (n + 1.0) * PI,
    }
}

/// Deterministic direction set used for sphere sampling in the symbol checks.
fn sphere_directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / 16.0;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            let n = 26;
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
enum RadialSampler {
    Pareto {
        eps: f64,
        inv_alpha: f64,
    },
    TruncatedPareto {
        lo: f64,
        hi: f64,
        inv_alpha: f64,
    },
    Tempered {
        eps: f64,
        inv_alpha: f64,
        beta: f64,
    },
    Bump {
        eps: f64,
        big: f64,
        dim: i32,
        envelope: f64,
    },
    Pieces {
        cumulative: Vec<f64>,
        pieces: Vec<(f64, f64, f64)>,
    },
}

/// Sampler for the compound-Poisson (big jump) component, fixed at one cut radius.
#[derive(Debug, Clone)]
pub struct BigJumpSampler {
    dim: usize,
    rate: f64,
    radial: RadialSampler,
}

impl BigJumpSampler {
    pub fn new(kernel: &JumpKernel, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return arg(format!("epsilon must be positive, got {epsilon}"));
        }
        let rate = if kernel.is_zero() {
            0.0
        } else {
            kernel.mass_beyond(epsilon)?
        };
        if !(rate > 0.0) {
            return Err(Error::Logic(format!(
                "no jump mass beyond epsilon = {epsilon}; big jumps cannot be sampled"
            )));
        }
        if !rate.is_finite() {
            return Err(Error::Divergent {
                piece: "tail",
                partial: rate,
            });
        }
        let d = kernel.dimension;
        let radial = match kernel.family() {
            KernelFamily::Zero => unreachable!("zero kernel has no mass"),
            KernelFamily::Fractional { s } => RadialSampler::Pareto {
                eps: epsilon,
                inv_alpha: 1.0 / (2.0 * s),
            },
            KernelFamily::TruncatedFractional { s, r_trunc } => RadialSampler::TruncatedPareto {
                lo: epsilon.powf(-2.0 * s),
                hi: r_trunc.powf(-2.0 * s),
                inv_alpha: -1.0 / (2.0 * s),
            },
            KernelFamily::TemperedFractional { s, beta } => RadialSampler::Tempered {
                eps: epsilon,
                inv_alpha: 1.0 / (2.0 * s),
                beta: *beta,
            },
            KernelFamily::CompactBump { r_pos } => {
                let big = 2.0 * r_pos;
                let dens = |r: f64| {
                    let q = 1.0 - (r / big).powi(2);
                    r.powi(d as i32 - 1) * q * q
                };
                let r_star = big * ((d as f64 - 1.0) / (d as f64 + 3.0)).sqrt();
                let mut envelope = dens(epsilon);
                if r_star > epsilon {
                    envelope = envelope.max(dens(r_star));
                }
                RadialSampler::Bump {
                    eps: epsilon,
                    big,
                    dim: d as i32,
                    envelope: envelope * (1.0 + 1e-12),
                }
            }
            KernelFamily::Tabulated(_) => {
                let mut pieces = Vec::new();
                let mut cumulative = Vec::new();
                let mut acc = 0.0;
                for pc in kernel.power_pieces().unwrap_or_default() {
                    let lo = pc.a.max(epsilon);
                    if pc.b <= lo {
                        continue;
                    }
                    let q = d as f64 - 1.0 + pc.p;
                    let m = pc.c * power_integral(q, lo, pc.b);
                    if !m.is_finite() {
                        return Err(Error::Divergent {
                            piece: "tail",
                            partial: m,
                        });
                    }
                    acc += m;
                    cumulative.push(acc);
                    pieces.push((lo, pc.b, q));
                }
                RadialSampler::Pieces { cumulative, pieces }
            }
        };
        Ok(Self {
            dim: d,
            rate,
            radial,
        })
    }

    /// `λ_ε`, the intensity of jumps larger than the cut radius.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sample_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // 1 − U lies in (0, 1]
        fn open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
            1.0 - rng.random::<f64>()
        }
        match &self.radial {
            RadialSampler::Pareto { eps, inv_alpha } => eps * open(rng).powf(-inv_alpha),
            RadialSampler::TruncatedPareto { lo, hi, inv_alpha } => {
                let u = open(rng);
                (lo - u * (lo - hi)).powf(*inv_alpha)
            }
            RadialSampler::Tempered {
                eps,
                inv_alpha,
                beta,
            } => loop {
                let r = eps * open(rng).powf(-inv_alpha);
                if open(rng) <= (-beta * (r - eps)).exp() {
                    break r;
                }
            },
            RadialSampler::Bump {
                eps,
                big,
                dim,
                envelope,
            } => loop {
                let r = eps + (big - eps) * rng.random::<f64>();
                let q = 1.0 - (r / big).powi(2);
                let dens = r.powi(dim - 1) * q * q;
                if rng.random::<f64>() * envelope <= dens {
                    break r;
                }
            },
            RadialSampler::Pieces { cumulative, pieces } => {
                let total = *cumulative.last().expect("non-empty");
                let u = rng.random::<f64>() * total;
                let i = cumulative
                    .partition_point(|&c| c <= u)
                    .min(pieces.len() - 1);
                let (a, b, q) = pieces[i];
                let v = open(rng);
                let e = q + 1.0;
                if e.abs() < 1e-14 {
                    a * (b / a).powf(1.0 - v)
                } else if b.is_infinite() {
                    a * v.powf(1.0 / e)
                } else {
                    let (ae, be) = (a.powf(e), b.powf(e));
                    (ae + (1.0 - v) * (be - ae)).powf(1.0 / e)
                }
            }
        }
    }

    /// Writes one jump vector into `out` (length `d`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let r = self.sample_radius(rng);
        uniform_direction_into(self.dim, rng, out);
        for c in out.iter_mut() {
            *c *= r;
        }
    }
}

/// Uniform unit vector in `R^d`.
pub fn uniform_direction_into<R: Rng + ?Sized>(d: usize, rng: &mut R, out: &mut [f64]) {
    match d {
        1 => out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 },
        2 => {
            let th = 2.0 * PI * rng.random::<f64>();
            out[0] = th.cos();
            out[1] = th.sin();
        }
        _ => {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let ph = 2.0 * PI * rng.random::<f64>();
            let rho = (1.0 - z * z).max(0.0).sqrt();
            out[0] = rho * ph.cos();
            out[1] = rho * ph.sin();
            out[2] = z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frac(s: f64, d: usize) -> JumpKernel {
        JumpKernel::fractional(s, d).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let z = JumpKernel::zero(2).unwrap();
        assert_eq!(z.evaluate(&[1.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(
            frac(0.5, 1).evaluate(&[2.0]).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        let bump = JumpKernel::new(KernelFamily::CompactBump { r_pos: 1.0 }, 2).unwrap();
        assert_eq!(bump.evaluate(&[2.0, 0.0]).unwrap(), 0.0);
        assert!(bump.evaluate(&[1.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn evaluate_rejects_origin_and_bad_length() {
        assert!(matches!(
            frac(0.5, 2).evaluate(&[0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            frac(0.5, 2).evaluate(&[1.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn constructor_validation() {
        assert!(JumpKernel::fractional(0.5, 4).is_err());
        assert!(JumpKernel::fractional(-0.1, 1).is_err());
        assert!(
            JumpKernel::new(KernelFamily::TemperedFractional { s: 1.2, beta: 1.0 }, 1).is_err()
        );
        assert!(RadialProfile::new(vec![1.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(RadialProfile::new(vec![0.5, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn integrability_fractional_half_1d() {
        let r = frac(0.5, 1).levy_integrability().unwrap();
        assert_relative_eq!(r.value, 4.0, max_relative = 1e-8);
        assert_relative_eq!(r.near, 2.0, max_relative = 1e-8);
        assert_relative_eq!(r.tail, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn integrability_zero_kernel() {
        assert_eq!(
            JumpKernel::zero(3)
                .unwrap()
                .levy_integrability()
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn integrability_detects_log_divergence() {
        // |y|^{-3} in d = 1, once as formal s = 1 and once as a table.
        let formal = frac(1.0, 1).levy_integrability();
        assert!(
            matches!(
                formal,
                Err(Error::Divergent {
                    piece: "near-origin",
                    ..
                })
            ),
            "{formal:?}"
        );
        let table = RadialProfile::new(vec![0.5, 1.0, 2.0], vec![8.0, 1.0, 0.125]).unwrap();
        let k = JumpKernel::new(KernelFamily::Tabulated(table), 1).unwrap();
        assert!(matches!(
            k.levy_integrability(),
            Err(Error::Divergent { .. })
        ));
    }

    #[test]
    fn integrability_slow_but_convergent() {
        // s = 0.95: shells shrink by 2^{-0.1} per halving, still finite.
        let r = frac(0.95, 1).levy_integrability().unwrap();
        let exact = 2.0 / (2.0 - 1.9) + 2.0 / 1.9;
        assert_relative_eq!(r.value, exact, max_relative = 1e-6);
    }

    #[test]
    fn integrability_tail_divergence() {
        // j ~ r^{-1} in d = 1: not integrable at infinity
        let table = RadialProfile::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
        let k = JumpKernel::new(KernelFamily::Tabulated(table), 1).unwrap();
        assert!(matches!(
            k.levy_integrability(),
            Err(Error::Divergent { piece: "tail", .. })
        ));
    }

    #[test]
    fn integrability_matches_closed_moments() {
        for kernel in [
            JumpKernel::new(KernelFamily::TemperedFractional { s: 0.3, beta: 1.0 }, 2).unwrap(),
            JumpKernel::new(
                KernelFamily::TruncatedFractional {
                    s: 0.4,
                    r_trunc: 2.0,
                },
                3,
            )
            .unwrap(),
            JumpKernel::new(KernelFamily::CompactBump { r_pos: 0.7 }, 2).unwrap(),
            frac(0.7, 3),
        ] {
            let r = kernel.levy_integrability().unwrap();
            let stats = kernel.small_jump_stats(1.0).unwrap();
            assert_relative_eq!(r.near, stats.small_cov_trace(), max_relative = 1e-7);
            assert_relative_eq!(r.tail, stats.big_rate, max_relative = 1e-7);
        }
    }

    #[test]
    fn symbol_fractional_closed_form_and_quadrature() {
        let k = frac(0.5, 1);
        assert_relative_eq!(k.symbol(&[3.0]).unwrap().re, 3.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(
            k.symbol_quadrature(&[3.0]).unwrap().re,
            3.0 * PI,
            max_relative = 1e-7
        );
        for (d, s) in [(2, 0.5), (3, 0.3), (2, 0.8)] {
            let k = frac(s, d);
            let mut z = vec![0.0; d];
            z[0] = 1.7;
            let closed = k.symbol(&z).unwrap().re;
            let quad = k.symbol_quadrature(&z).unwrap().re;
            assert_relative_eq!(closed, quad, max_relative = 1e-6);
        }
    }

    #[test]
    fn symbol_zero_and_symmetric() {
        let z = JumpKernel::zero(2).unwrap();
        assert_eq!(z.symbol(&[1.0, 2.0]).unwrap(), Complex64::new(0.0, 0.0));
        let t = JumpKernel::new(KernelFamily::TemperedFractional { s: 0.3, beta: 1.0 }, 2).unwrap();
        let v = t.symbol(&[0.4, -1.1]).unwrap();
        assert_eq!(v.im, 0.0);
        assert!(v.re > 0.0);
        assert_eq!(t.symbol(&[0.0, 0.0]).unwrap().re, 0.0);
    }

    #[test]
    fn symbol_bump_matches_small_z_expansion() {
        // ψ(z) ≈ |z|² ∫|y|² j / (2d) for small |z|
        let k = JumpKernel::new(KernelFamily::CompactBump { r_pos: 0.5 }, 3).unwrap();
        let m2 = k.second_moment_within(1.0).unwrap();
        let z = 1e-3;
        let v = k.symbol(&[z, 0.0, 0.0]).unwrap().re;
        assert_relative_eq!(v, z * z * m2 / 6.0, max_relative = 1e-5);
    }

    #[test]
    fn a1_examples() {
        let sym = frac(0.5, 2).check_a1(&[0.5, 2.0], None).unwrap();
        assert_eq!(sym.im_ratio_max, 0.0);
        assert!(sym.pass);
        let zero = JumpKernel::zero(1)
            .unwrap()
            .check_a1(&[0.1, 1.0], Some(0.0))
            .unwrap();
        assert!(zero.pass);
        let tempered =
            JumpKernel::new(KernelFamily::TemperedFractional { s: 0.3, beta: 1.0 }, 2).unwrap();
        let rep = tempered.check_a1(&[0.1, 1.0, 10.0], None).unwrap();
        assert!(rep.pass);
        assert!(rep.re_inf_per_radius.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn small_jump_stats_examples() {
        let st = frac(0.5, 1).small_jump_stats(0.1).unwrap();
        assert_relative_eq!(st.big_rate, 20.0, max_relative = 1e-12);
        assert_relative_eq!(st.small_cov[0], 0.2, max_relative = 1e-12);
        assert_eq!(st.compensator_drift, vec![0.0]);
        let z = JumpKernel::zero(2).unwrap().small_jump_stats(0.5).unwrap();
        assert_eq!(z.big_rate, 0.0);
        assert!(z.small_cov.iter().all(|&v| v == 0.0));
        assert!(frac(0.5, 1).small_jump_stats(0.0).is_err());
        assert!(frac(0.5, 1).small_jump_stats(1.5).is_err());
    }

    #[test]
    fn tempered_rate_nonincreasing() {
        let k = JumpKernel::new(KernelFamily::TemperedFractional { s: 0.6, beta: 2.0 }, 1).unwrap();
        let rates: Vec<f64> = [0.05, 0.1, 0.2, 0.5, 1.0]
            .iter()
            .map(|&e| k.small_jump_stats(e).unwrap().big_rate)
            .collect();
        assert!(rates.windows(2).all(|w| w[1] <= w[0]));
    }

    /// Kolmogorov-Smirnov distance of |jump| draws against the Pareto CDF
    /// `1 − (ε/r)^{2s}`, plus a sign balance check.
    #[test]
    fn pareto_big_jumps_ks() {
        let k = frac(0.5, 1);
        let sampler = BigJumpSampler::new(&k, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut radii = Vec::with_capacity(n);
        let mut positives = 0usize;
        let mut y = [0.0];
        for _ in 0..n {
            sampler.sample_into(&mut rng, &mut y);
            if y[0] > 0.0 {
                positives += 1;
            }
            radii.push(y[0].abs());
        }
        radii.sort_by(f64::total_cmp);
        let ks = radii
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let cdf = 1.0 - 0.1 / r;
                ((i + 1) as f64 / n as f64 - cdf)
                    .abs()
                    .max((cdf - i as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS = {ks}");
        assert!((positives as f64 / n as f64 - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn truncated_jumps_respect_support() {
        let k = JumpKernel::new(
            KernelFamily::TruncatedFractional {
                s: 0.5,
                r_trunc: 2.0,
            },
            2,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let y = k.sample_big_jump(1.0, &mut rng).unwrap();
            let r = norm(&y);
            assert!(r > 1.0 && r <= 2.0 + 1e-12, "{r}");
        }
    }

    #[test]
    fn symmetric_jump_mean_vanishes() {
        // tempered kernel has finite mean
        let k = JumpKernel::new(KernelFamily::TemperedFractional { s: 0.4, beta: 1.0 }, 2).unwrap();
        let sampler = BigJumpSampler::new(&k, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        let mut y = [0.0; 2];
        for _ in 0..n {
            sampler.sample_into(&mut rng, &mut y);
            for i in 0..2 {
                sum[i] += y[i];
                sq[i] += y[i] * y[i];
            }
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            let se = ((sq[i] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(mean.abs() < 3.0 * se, "axis {i}: mean {mean} se {se}");
        }
    }

    #[test]
    fn zero_mass_sampling_is_logic_error() {
        let k = JumpKernel::new(KernelFamily::CompactBump { r_pos: 0.25 }, 1).unwrap();
        assert!(matches!(BigJumpSampler::new(&k, 0.6), Err(Error::Logic(_))));
        assert!(matches!(
            BigJumpSampler::new(&JumpKernel::zero(1).unwrap(), 0.1),
            Err(Error::Logic(_))
        ));
    }

    /// Binned radial histogram of tabulated and bump draws against the
    /// normalised density `ω r^{d-1} j(r) / λ_ε`.
    #[test]
    fn sampled_density_matches_profile() {
        let table =
            RadialProfile::new(vec![0.2, 0.5, 1.0, 3.0], vec![30.0, 4.0, 1.0, 0.02]).unwrap();
        for kernel in [
            JumpKernel::new(KernelFamily::Tabulated(table), 2).unwrap(),
            JumpKernel::new(KernelFamily::CompactBump { r_pos: 0.5 }, 3).unwrap(),
            JumpKernel::new(KernelFamily::TemperedFractional { s: 0.5, beta: 2.0 }, 1).unwrap(),
        ] {
            let eps = 0.3;
            let sampler = BigJumpSampler::new(&kernel, eps).unwrap();
            let lambda = sampler.rate();
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let n = 200_000;
            let edges: Vec<f64> = (0..=8).map(|i| eps + 0.1 * i as f64).collect();
            let mut counts = vec![0usize; edges.len() - 1];
            for _ in 0..n {
                let r = sampler.sample_radius(&mut rng);
                if let Some(b) = edges.windows(2).position(|w| r >= w[0] && r < w[1]) {
                    counts[b] += 1;
                }
            }
            let d = kernel.dimension();
            for (b, w) in edges.windows(2).enumerate() {
                let p =
                    unit_sphere_area(d) * kernel.radial_moment(0.0, w[0], w[1]).unwrap() / lambda;
                let expected = p * n as f64;
                let sd = (expected * (1.0 - p)).sqrt().max(1.0);
                assert!(
                    (counts[b] as f64 - expected).abs() < 4.0 * sd,
                    "{}: bin {b} count {} expected {expected}",
                    kernel.family().name(),
                    counts[b]
                );
            }
        }
    }

    #[test]
    fn tabulated_flags() {
        let bumpy = RadialProfile::new(vec![0.5, 1.0, 2.0], vec![1.0, 2.0, 0.5]).unwrap();
        let k = JumpKernel::new(KernelFamily::Tabulated(bumpy), 2).unwrap();
        assert!(!k.is_radially_decreasing());
        assert!(k.is_isotropic());
    }
    #[test]
    fn tempered_second_moment_matches_quadrature() {
        for (s, beta, d) in [
            (0.3, 1.0, 2usize),
            (0.745, 1.54, 2),
            (0.5, 0.5, 1),
            (0.9, 2.0, 3),
        ] {
            let k = JumpKernel::new(KernelFamily::TemperedFractional { s, beta }, d).unwrap();
            let df = d as f64;
            let f = |r: f64| r.powf(df + 1.0) * k.profile(r);
            for (a, b) in [(0.0, 1e-4), (0.0, 0.3), (0.1, 2.0), (1.0, 30.0)] {
                let quad = quad::integrate(&f, a, b, 1e-12, 1e-300).value;
                let closed = k.radial_moment(2.0, a, b).unwrap();
                assert!(
                    (closed - quad).abs() <= 1e-7 * quad.abs(),
                    "s={s} [{a},{b}]: {closed} vs {quad}"
                );
            }
        }
    }
}

//! Bounded domains: membership, measure, signed boundary distance and the
//! equal-volume ball.
//!
//! The boundary counts as exterior everywhere, so `contains(x)` is strict and
//! agrees with `boundary_distance(x) > 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::kernel::{norm, unit_ball_volume, MAX_DIMENSION};

/// Rejection samples used for polytope volume and centroid.
pub const POLYTOPE_SAMPLES: usize = 1_000_000;
const POLYTOPE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Shape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ellipsoid {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
    },
    /// `{x : normals[i]·x < offsets[i] for all i}`
    Polytope {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Interval {
        a: f64,
        b: f64,
    },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Ball { .. } => "ball",
            Shape::Box { .. } => "box",
            Shape::Ellipsoid { .. } => "ellipsoid",
            Shape::Polytope { .. } => "polytope",
            Shape::Interval { .. } => "interval",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
    volume: f64,
    volume_std_error: f64,
    centroid: Vec<f64>,
    bbox_lo: Vec<f64>,
    bbox_hi: Vec<f64>,
}

impl Domain {
    pub fn new(shape: Shape) -> Result<Self> {
        Self::with_polytope_samples(shape, POLYTOPE_SAMPLES)
    }

    /// Same as [`Domain::new`] with an explicit rejection-sample count for polytopes.
    pub fn with_polytope_samples(shape: Shape, samples: usize) -> Result<Self> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let check_dim = |d: usize| -> Result<()> {
            if !(1..=MAX_DIMENSION).contains(&d) {
                return arg(format!("dimension must be 1, 2 or 3, got {d}"));
            }
            Ok(())
        };
        let (dim, volume, se, centroid, lo, hi) = match &shape {
            Shape::Ball { center, radius } => {
                check_dim(center.len())?;
                if !(*radius > 0.0 && radius.is_finite()) || !finite(center) {
                    return arg(format!("ball radius must be positive, got {radius}"));
                }
                let d = center.len();
                let lo = center.iter().map(|c| c - radius).collect();
                let hi = center.iter().map(|c| c + radius).collect();
                (
                    d,
                    unit_ball_volume(d) * radius.powi(d as i32),
                    0.0,
                    center.clone(),
                    lo,
                    hi,
                )
            }
            Shape::Box { lo, hi } => {
                check_dim(lo.len())?;
                if lo.len() != hi.len() || !finite(lo) || !finite(hi) {
                    return arg("box corners must be finite vectors of equal length");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return arg("box has zero volume: every hi must exceed lo");
                }
                let vol = lo.iter().zip(hi).map(|(a, b)| b - a).product();
                let c = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                (lo.len(), vol, 0.0, c, lo.clone(), hi.clone())
            }
            Shape::Ellipsoid { center, semi_axes } => {
                check_dim(center.len())?;
                if center.len() != semi_axes.len() || !finite(center) {
                    return arg("ellipsoid center and semi-axes must have equal length");
                }
                if semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                    return arg("ellipsoid semi-axes must be positive");
                }
                let d = center.len();
                let vol = unit_ball_volume(d) * semi_axes.iter().product::<f64>();
                let lo = center.iter().zip(semi_axes).map(|(c, a)| c - a).collect();
                let hi = center.iter().zip(semi_axes).map(|(c, a)| c + a).collect();
                (d, vol, 0.0, center.clone(), lo, hi)
            }
            Shape::Interval { a, b } => {
                if !(b > a) || !a.is_finite() || !b.is_finite() {
                    return arg(format!("interval ({a}, {b}) is empty"));
                }
                (1, b - a, 0.0, vec![0.5 * (a + b)], vec![*a], vec![*b])
            }
            Shape::Polytope { normals, offsets } => {
                let d = normals.first().map(|n| n.len()).unwrap_or(0);
                check_dim(d)?;
                if normals.len() != offsets.len()
                    || normals.iter().any(|n| n.len() != d || !finite(n))
                {
                    return arg(
                        "polytope needs one offset per normal, all normals of equal dimension",
                    );
                }
                if normals.iter().any(|n| norm(n) == 0.0) {
                    return arg("polytope normals must be nonzero");
                }
                let (lo, hi) = polytope_bbox(normals, offsets)?;
                let (vol, se, c) = polytope_volume(normals, offsets, &lo, &hi, samples);
                if vol <= 0.0 {
                    return arg("polytope has zero volume");
                }
                (d, vol, se, c, lo, hi)
            }
        };
        Ok(Self {
            shape,
            dim,
            volume,
            volume_std_error: se,
            centroid,
            bbox_lo: lo,
            bbox_hi: hi,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(Shape::Ball { center, radius })
    }

    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(Shape::Box { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(Shape::Interval { a, b })
    }

    /// Convex polygon from counter-clockwise vertices.
    pub fn polygon(vertices: &[[f64; 2]]) -> Result<Self> {
        if vertices.len() < 3 {
            return arg("a polygon needs at least three vertices");
        }
        let mut normals = Vec::new();
        let mut offsets = Vec::new();
        for i in 0..vertices.len() {
            let p = vertices[i];
            let q = vertices[(i + 1) % vertices.len()];
            // outward normal of a counter-clockwise edge
            let n = vec![q[1] - p[1], p[0] - q[0]];
            offsets.push(n[0] * p[0] + n[1] * p[1]);
            normals.push(n);
        }
        Self::new(Shape::Polytope { normals, offsets })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Zero for shapes with an exact volume formula.
    pub fn volume_std_error(&self) -> f64 {
        self.volume_std_error
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.bbox_lo, &self.bbox_hi)
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Ellipsoid { semi_axes, .. } => {
                2.0 * semi_axes.iter().cloned().fold(0.0, f64::max)
            }
            _ => self
                .bbox_lo
                .iter()
                .zip(&self.bbox_hi)
                .map(|(a, b)| (b - a).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Whether the shape satisfies a uniform exterior sphere condition.
    /// Boxes and polytopes fail it at corners; results on them are
    /// hypothesis-extended.
    pub fn has_exterior_sphere(&self) -> bool {
        matches!(
            self.shape,
            Shape::Ball { .. } | Shape::Ellipsoid { .. } | Shape::Interval { .. }
        )
    }

    /// Strict interior membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Ball { center, radius } => dist2(x, center) < radius * radius,
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| v > a && v < b),
            Shape::Interval { a, b } => x[0] > *a && x[0] < *b,
            Shape::Ellipsoid { center, semi_axes } => {
                x.iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((v, c), a)| ((v - c) / a).powi(2))
                    .sum::<f64>()
                    < 1.0
            }
            Shape::Polytope { normals, offsets } => {
                normals.iter().zip(offsets).all(|(n, b)| dot(n, x) < *b)
            }
        }
    }

    /// Signed Euclidean distance to the boundary, positive inside.
    ///
    /// Exact for balls, boxes, intervals and ellipsoids; for polytopes the
    /// supporting-hyperplane value `min_i (b_i − a_i·x)/|a_i|`, which is exact
    /// inside and a lower bound on the magnitude outside.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => radius - dist2(x, center).sqrt(),
            Shape::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Shape::Box { lo, hi } => box_signed_distance(x, lo, hi),
            Shape::Ellipsoid { center, semi_axes } => {
                let y: Vec<f64> = x.iter().zip(center).map(|(v, c)| v - c).collect();
                let dist = ellipsoid_distance(&y, semi_axes);
                if self.contains(x) {
                    dist
                } else {
                    -dist
                }
            }
            Shape::Polytope { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .map(|(n, b)| (b - dot(n, x)) / norm(n))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Ball centred at the origin with the same volume.
    pub fn equal_volume_ball(&self) -> Domain {
        let d = self.dim;
        let radius = (self.volume / unit_ball_volume(d)).powf(1.0 / d as f64);
        Domain::ball(vec![0.0; d], radius).expect("positive volume gives a valid ball")
    }

    /// The same shape moved by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Domain> {
        if shift.len() != self.dim {
            return arg("shift has the wrong dimension");
        }
        let add = |v: &[f64]| v.iter().zip(shift).map(|(a, b)| a + b).collect::<Vec<_>>();
        let shape = match &self.shape {
            Shape::Ball { center, radius } => Shape::Ball {
                center: add(center),
                radius: *radius,
            },
            Shape::Box { lo, hi } => Shape::Box {
                lo: add(lo),
                hi: add(hi),
            },
            Shape::Ellipsoid { center, semi_axes } => Shape::Ellipsoid {
                center: add(center),
                semi_axes: semi_axes.clone(),
            },
            Shape::Interval { a, b } => Shape::Interval {
                a: a + shift[0],
                b: b + shift[0],
            },
            Shape::Polytope { normals, offsets } => Shape::Polytope {
                normals: normals.clone(),
                offsets: normals
                    .iter()
                    .zip(offsets)
                    .map(|(n, b)| b + dot(n, shift))
                    .collect(),
            },
        };
        let mut out = Domain {
            shape,
            dim: self.dim,
            volume: self.volume,
            volume_std_error: self.volume_std_error,
            centroid: add(&self.centroid),
            bbox_lo: add(&self.bbox_lo),
            bbox_hi: add(&self.bbox_hi),
        };
        if let Shape::Ball { .. }
        | Shape::Box { .. }
        | Shape::Interval { .. }
        | Shape::Ellipsoid { .. } = out.shape
        {
            out = Domain::new(out.shape)?;
        }
        Ok(out)
    }

    /// Regular lattice of `n_per_axis^d` cell centres over the bounding box,
    /// keeping points with boundary distance above `min_distance`.
    pub fn lattice(&self, n_per_axis: usize, min_distance: f64) -> Vec<Vec<f64>> {
        let n = n_per_axis.max(1);
        let mut out = Vec::new();
        let mut idx = vec![0usize; self.dim];
        loop {
            let x: Vec<f64> = (0..self.dim)
                .map(|k| {
                    let (a, b) = (self.bbox_lo[k], self.bbox_hi[k]);
                    a + (idx[k] as f64 + 0.5) * (b - a) / n as f64
                })
                .collect();
            if self.contains(&x) && self.boundary_distance(&x) > min_distance {
                out.push(x);
            }
            let mut k = 0;
            loop {
                if k == self.dim {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Probability that a Brownian bridge with per-coordinate variance `var`
    /// between interior points `x0` and `x1` leaves the domain, using the
    /// tangent half-space at each nearby face. `None` for shapes without a
    /// correction (ellipsoids, polytopes).
    pub(crate) fn bridge_exit_probability(&self, x0: &[f64], x1: &[f64], var: f64) -> Option<f64> {
        let cross = |d0: f64, d1: f64| (-2.0 * d0 * d1 / var).exp();
        match &self.shape {
            Shape::Ball { center, radius } => {
                let d0 = radius - dist2(x0, center).sqrt();
                let d1 = radius - dist2(x1, center).sqrt();
                Some(cross(d0, d1))
            }
            Shape::Interval { a, b } => {
                let stay =
                    (1.0 - cross(x0[0] - a, x1[0] - a)) * (1.0 - cross(b - x0[0], b - x1[0]));
                Some(1.0 - stay)
            }
            Shape::Box { lo, hi } => {
                let mut stay = 1.0;
                for k in 0..self.dim {
                    stay *= (1.0 - cross(x0[k] - lo[k], x1[k] - lo[k]))
                        * (1.0 - cross(hi[k] - x0[k], hi[k] - x1[k]));
                }
                Some(1.0 - stay)
            }
            _ => None,
        }
    }

    /// A point outside the domain (on or just beyond the boundary) closest to `x`.
    pub(crate) fn nearest_exterior_point(&self, x: &[f64]) -> Vec<f64> {
        let mut p = x.to_vec();
        match &self.shape {
            Shape::Ball { center, radius } => {
                let r = dist2(x, center).sqrt();
                if r == 0.0 {
                    p[0] = center[0] + radius;
                } else {
                    let mut scale = radius / r;
                    loop {
                        for k in 0..self.dim {
                            p[k] = center[k] + (x[k] - center[k]) * scale;
                        }
                        if !self.contains(&p) {
                            break;
                        }
                        scale *= 1.0 + 1e-15;
                    }
                }
            }
            Shape::Interval { a, b } => {
                p[0] = if x[0] - a < b - x[0] { *a } else { *b };
            }
            Shape::Box { lo, hi } => {
                let (mut best, mut k_best, mut to_hi) = (f64::INFINITY, 0, false);
                for k in 0..self.dim {
                    if x[k] - lo[k] < best {
                        (best, k_best, to_hi) = (x[k] - lo[k], k, false);
                    }
                    if hi[k] - x[k] < best {
                        (best, k_best, to_hi) = (hi[k] - x[k], k, true);
                    }
                }
                p[k_best] = if to_hi { hi[k_best] } else { lo[k_best] };
            }
            _ => {}
        }
        p
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn box_signed_distance(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut outside2 = 0.0;
    let mut inside = f64::INFINITY;
    for k in 0..x.len() {
        let below = lo[k] - x[k];
        let above = x[k] - hi[k];
        let excess = below.max(above);
        if excess > 0.0 {
            outside2 += excess * excess;
        }
        inside = inside.min(-excess);
    }
    if outside2 > 0.0 {
        -outside2.sqrt()
    } else {
        inside
    }
}

/// Unsigned distance from `y` (relative to the centre) to the ellipsoid
/// surface with semi-axes `a`, via bisection on the Lagrange multiplier.
fn ellipsoid_distance(y: &[f64], a: &[f64]) -> f64 {
    let y: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let a_min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let f = |t: f64| -> f64 {
        y.iter()
            .zip(a)
            .map(|(yi, ai)| (ai * yi / (t + ai * ai)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let on_min_axis = y.iter().zip(a).any(|(yi, ai)| *ai == a_min && *yi > 0.0);
    let limit: f64 = y
        .iter()
        .zip(a)
        .filter(|(_, ai)| **ai > a_min)
        .map(|(yi, ai)| (ai * yi / (ai * ai - a_min * a_min)).powi(2))
        .sum::<f64>()
        - 1.0;
    let inside = y
        .iter()
        .zip(a)
        .map(|(yi, ai)| (yi / ai).powi(2))
        .sum::<f64>()
        < 1.0;
    if inside && !on_min_axis && limit <= 0.0 {
        // Closest point lies off the plane of the shortest axis.
        let mut x: Vec<f64> = y
            .iter()
            .zip(a)
            .map(|(yi, ai)| {
                if *ai > a_min {
                    ai * ai * yi / (ai * ai - a_min * a_min)
                } else {
                    0.0
                }
            })
            .collect();
        let rest: f64 = x.iter().zip(a).map(|(xi, ai)| (xi / ai).powi(2)).sum();
        if let Some(k) = a.iter().position(|&ai| ai == a_min) {
            x[k] = a_min * (1.0 - rest).max(0.0).sqrt();
        }
        return dist2(&x, &y).sqrt();
    }
    let (mut lo, mut hi) = if inside {
        (-a_min * a_min, 0.0)
    } else {
        (
            0.0,
            y.iter()
                .zip(a)
                .map(|(yi, ai)| (ai * yi).powi(2))
                .sum::<f64>()
                .sqrt(),
        )
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let x: Vec<f64> = y
        .iter()
        .zip(a)
        .map(|(yi, ai)| {
            if *yi == 0.0 {
                0.0
            } else {
                ai * ai * yi / (t + ai * ai)
            }
        })
        .collect();
    dist2(&x, &y).sqrt()
}

fn solve_small(m: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let d = rhs.len();
    let det = |m: &[Vec<f64>]| -> f64 {
        match d {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        }
    };
    let full = det(m);
    let scale: f64 = m
        .iter()
        .flatten()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .powi(d as i32);
    if full.abs() <= 1e-12 * scale {
        return None;
    }
    // Cramer's rule
    Some(
        (0..d)
            .map(|col| {
                let replaced: Vec<Vec<f64>> = m
                    .iter()
                    .zip(rhs)
                    .map(|(row, r)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, v)| if j == col { *r } else { *v })
                            .collect()
                    })
                    .collect();
                det(&replaced) / full
            })
            .collect(),
    )
}

fn polytope_bbox(normals: &[Vec<f64>], offsets: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = normals[0].len();
    // Unbounded iff some nonzero direction v has a_i·v ≤ 0 for all i; extreme
    // rays of that cone are orthogonal to d−1 of the normals.
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    match d {
        1 => candidates.push(vec![1.0]),
        2 => candidates.extend(normals.iter().map(|n| vec![-n[1], n[0]])),
        _ => {
            for i in 0..normals.len() {
                for j in i + 1..normals.len() {
                    let (a, b) = (&normals[i], &normals[j]);
                    candidates.push(vec![
                        a[1] * b[2] - a[2] * b[1],
                        a[2] * b[0] - a[0] * b[2],
                        a[0] * b[1] - a[1] * b[0],
                    ]);
                }
            }
        }
    }
    if normals.len() <= d {
        return arg("polytope is unbounded: need more than d half-spaces");
    }
    for v in &candidates {
        let nv = norm(v);
        if nv == 0.0 {
            continue;
        }
        for sign in [1.0, -1.0] {
            if normals
                .iter()
                .all(|n| sign * dot(n, v) <= 1e-12 * norm(n) * nv)
            {
                return arg("polytope is unbounded");
            }
        }
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut any = false;
    let m = normals.len();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| normals[i].clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| offsets[i]).collect();
        if let Some(v) = solve_small(&rows, &rhs) {
            let feasible = normals
                .iter()
                .zip(offsets)
                .all(|(n, b)| dot(n, &v) <= b + 1e-9 * (1.0 + b.abs()));
            if feasible {
                any = true;
                for k in 0..d {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
        }
        // next combination
        let mut k = d;
        loop {
            if k == 0 {
                if !any {
                    return arg("polytope is empty");
                }
                return Ok((lo, hi));
            }
            k -= 1;
            if idx[k] < m - d + k {
                idx[k] += 1;
                for j in k + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn polytope_volume(
    normals: &[Vec<f64>],
    offsets: &[f64],
    lo: &[f64],
    hi: &[f64],
    samples: usize,
) -> (f64, f64, Vec<f64>) {
    let d = lo.len();
    let box_vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    if box_vol <= 0.0 || samples == 0 {
        return (0.0, 0.0, vec![0.0; d]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POLYTOPE_SEED);
    let mut hits = 0usize;
    let mut csum = vec![0.0; d];
    let mut x = vec![0.0; d];
    for _ in 0..samples {
        for k in 0..d {
            x[k] = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
        }
        if normals.iter().zip(offsets).all(|(n, b)| dot(n, &x) < *b) {
            hits += 1;
            for k in 0..d {
                csum[k] += x[k];
            }
        }
    }
    let p = hits as f64 / samples as f64;
    let centroid = if hits > 0 {
        csum.iter().map(|c| c / hits as f64).collect()
    } else {
        vec![0.0; d]
    };
    (
        p * box_vol,
        box_vol * (p * (1.0 - p) / samples as f64).sqrt(),
        centroid,
    )
}

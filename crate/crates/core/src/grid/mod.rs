//! Finite-difference discretization of `L + c` on a uniform grid `hZ^d`.
//!
//! The Laplacian uses the standard second-difference stencil. The jump
//! integral uses midpoint quadrature over grid offsets `y_k` with
//! `2h ≤ |y_k| ≤ R_max`; offsets inside `2h` are folded into the Laplacian
//! coefficient and the tail beyond `R_max` becomes a killing rate `κ_tail`
//! plus a far-field load. Exterior nodes referenced by an interior stencil
//! form the collar carrying the exterior data `g`.

mod checks;
mod eigen;
pub mod linalg;
mod semilinear;

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{arg, Error, Result};
use crate::geometry::Domain;
use crate::kernel::JumpKernel;
use crate::path::Field;
use crate::stats::CompensatedSum;
use linalg::{bicgstab, cg, Csr, SolveStats};

pub use checks::{
    boundary_decay_check, narrow_domain_scan, slab, symmetry_check, DecayReport,
    NarrowDomainReport, SymmetryReport,
};
pub use eigen::{principal_eigenpair, Eigenpair};
pub use semilinear::{solve_semilinear, SemilinearResult};

/// Relative residual required of linear solves.
pub const SOLVE_TOL: f64 = 1e-10;

/// Translation-invariant part of the discrete operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub h: f64,
    pub dim: usize,
    /// `1 + (1/2d)∫_{|y|<2h} |y|² j`
    pub laplacian_coef: f64,
    /// Jump offsets (in units of `h`) with weights `j(y_k)·h^d`.
    pub jumps: Vec<(Vec<i64>, f64)>,
    /// `Σ_{|y_k|≤1} y_k w_k`, paired with the central-difference gradient.
    pub compensator: Vec<f64>,
    pub kappa_tail: f64,
    pub r_max: f64,
}

impl Stencil {
    pub fn new(kernel: &JumpKernel, h: f64, r_max: Option<f64>) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return arg(format!("grid spacing must be positive, got {h}"));
        }
        let d = kernel.dimension();
        if !kernel.is_zero() && !kernel.is_isotropic() {
            return Err(Error::Unsupported(
                "near-origin absorption needs an isotropic kernel".into(),
            ));
        }
        let r_max = match r_max {
            Some(r) if !(r >= 1.0) => return arg(format!("R_max must be at least 1, got {r}")),
            Some(r) => r,
            None => default_r_max(kernel, h)?,
        };
        if kernel.is_zero() {
            return Ok(Self {
                h,
                dim: d,
                laplacian_coef: 1.0,
                jumps: Vec::new(),
                compensator: vec![0.0; d],
                kappa_tail: 0.0,
                r_max,
            });
        }
        let near = kernel.second_moment_within(2.0 * h)?;
        let kappa_tail = kernel.mass_beyond(r_max)?;
        if !near.is_finite() || !kappa_tail.is_finite() {
            return Err(Error::Divergent {
                piece: if near.is_finite() {
                    "tail"
                } else {
                    "near-origin"
                },
                partial: f64::INFINITY,
            });
        }
        let kmax = (r_max / h).floor() as i64;
        let cell = h.powi(d as i32);
        let mut jumps = Vec::new();
        let mut grad: Vec<CompensatedSum> = vec![CompensatedSum::new(); d];
        let mut grad_scale = 0.0;
        let mut k = vec![-kmax; d];
        loop {
            let n2: i64 = k.iter().map(|v| v * v).sum();
            let r = (n2 as f64).sqrt() * h;
            if n2 >= 4 && r <= r_max {
                let w = kernel.profile(r) * cell;
                if w > 0.0 {
                    if r <= 1.0 {
                        for i in 0..d {
                            grad[i].add(k[i] as f64 * h * w);
                        }
                        grad_scale += r * w;
                    }
                    jumps.push((k.clone(), w));
                }
            }
            let mut i = 0;
            loop {
                if i == d {
                    let mut compensator: Vec<f64> = grad.iter().map(|g| g.value()).collect();
                    // symmetric stencils cancel exactly; drop the rounding residue
                    if compensator.iter().all(|g| g.abs() <= 1e-12 * grad_scale) {
                        compensator.iter_mut().for_each(|g| *g = 0.0);
                    }
                    return Ok(Self {
                        h,
                        dim: d,
                        laplacian_coef: 1.0 + near / (2.0 * d as f64),
                        jumps,
                        compensator,
                        kappa_tail,
                        r_max,
                    });
                }
                k[i] += 1;
                if k[i] <= kmax {
                    break;
                }
                k[i] = -kmax;
                i += 1;
            }
        }
    }

    /// All nonzero off-centre entries (offset, coefficient) and the centre coefficient.
    pub fn entries(&self) -> (Vec<(Vec<i64>, f64)>, f64) {
        let d = self.dim;
        let h2 = self.h * self.h;
        let lap = self.laplacian_coef / h2;
        let mut out = Vec::with_capacity(2 * d + self.jumps.len());
        for i in 0..d {
            let g = self.compensator[i] / (2.0 * self.h);
            let mut e = vec![0i64; d];
            e[i] = -1;
            out.push((e.clone(), lap + g));
            e[i] = 1;
            out.push((e, lap - g));
        }
        let mut total = CompensatedSum::new();
        for (k, w) in &self.jumps {
            out.push((k.clone(), *w));
            total.add(*w);
        }
        let center = -2.0 * d as f64 * lap - total.value() - self.kappa_tail;
        (out, center)
    }

    /// Multiplier `m(z)` with `A e^{iz·x} = m(z) e^{iz·x}` on the infinite grid.
    pub fn symbol(&self, z: &[f64]) -> Complex64 {
        let h = self.h;
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for (zi, comp) in z.iter().zip(&self.compensator).take(self.dim) {
            re.add(self.laplacian_coef / (h * h) * (2.0 * (zi * h).cos() - 2.0));
            im.add(-comp * (zi * h).sin() / h);
        }
        for (k, w) in &self.jumps {
            let phase: f64 = k.iter().zip(z).map(|(ki, zi)| *ki as f64 * h * zi).sum();
            re.add(w * (phase.cos() - 1.0));
            im.add(w * phase.sin());
        }
        re.add(-self.kappa_tail);
        Complex64::new(re.value(), im.value())
    }
}

/// Smallest `R ≥ 1` with `κ_tail(R) ≤ 10⁻³·h⁻²`.
pub fn default_r_max(kernel: &JumpKernel, h: f64) -> Result<f64> {
    if kernel.is_zero() {
        return Ok(1.0);
    }
    let target = 1e-3 / (h * h);
    if kernel.mass_beyond(1.0)? <= target {
        return Ok(1.0);
    }
    let mut hi = 2.0;
    while kernel.mass_beyond(hi)? > target {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Numeric("kernel tail too heavy to truncate".into()));
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kernel.mass_beyond(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Classification of grid nodes in a bounding index box.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMap {
    pub dim: usize,
    pub h: f64,
    lo: Vec<i64>,
    shape: Vec<usize>,
    /// `≥ 0` interior index, `-1` unused, `≤ -2` collar index `-2 - slot`.
    slot: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Interior(usize),
    Collar(usize),
    Outside,
}

impl NodeMap {
    fn position(&self, idx: &[i64]) -> Option<usize> {
        let mut pos = 0usize;
        for ((i, lo), n) in idx.iter().zip(&self.lo).zip(&self.shape).take(self.dim) {
            let off = i - lo;
            if off < 0 || off as usize >= *n {
                return None;
            }
            pos = pos * n + off as usize;
        }
        Some(pos)
    }

    pub fn node(&self, idx: &[i64]) -> Node {
        match self.position(idx).map(|p| self.slot[p]) {
            Some(s) if s >= 0 => Node::Interior(s as usize),
            Some(s) if s <= -2 => Node::Collar((-2 - s) as usize),
            _ => Node::Outside,
        }
    }
}

/// Sparse `L + c` restricted to interior nodes, with collar couplings.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub stencil: Stencil,
    pub domain: Domain,
    map: Arc<NodeMap>,
    pub interior: Vec<Vec<i64>>,
    pub collar: Vec<Vec<i64>>,
    /// Interior-to-interior block of the pure operator (without `c`).
    pub a_ii: Csr,
    /// Interior-to-collar couplings, rows aligned with `a_ii`.
    pub a_ic_ptr: Vec<usize>,
    pub a_ic_cols: Vec<usize>,
    pub a_ic_vals: Vec<f64>,
    pub c: Vec<f64>,
    pub far_field: f64,
    symmetric: bool,
}

impl GridOperator {
    /// Discretizes `L + c` on `domain ∩ hZ^d`. `c` defaults to zero.
    pub fn assemble(
        domain: &Domain,
        kernel: &JumpKernel,
        c: Option<Field>,
        h: f64,
        r_max: Option<f64>,
        far_field: f64,
    ) -> Result<Self> {
        if kernel.dimension() != domain.dimension() {
            return arg("kernel and domain dimensions differ");
        }
        let stencil = Stencil::new(kernel, h, r_max)?;
        let d = domain.dimension();
        let (entries, center) = stencil.entries();
        let reach = entries
            .iter()
            .flat_map(|(k, _)| k.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(1);
        let (blo, bhi) = domain.bounding_box();
        let lo: Vec<i64> = blo
            .iter()
            .map(|v| (v / h).floor() as i64 - reach - 1)
            .collect();
        let hi: Vec<i64> = bhi
            .iter()
            .map(|v| (v / h).ceil() as i64 + reach + 1)
            .collect();
        let shape: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a + 1) as usize)
            .collect();
        let total: usize = shape.iter().product();
        if total > 200_000_000 {
            return arg(format!(
                "grid of {total} nodes is too large; increase h or decrease R_max"
            ));
        }
        let mut map = NodeMap {
            dim: d,
            h,
            lo: lo.clone(),
            shape,
            slot: vec![-1; total],
        };
        let mut interior = Vec::new();
        let mut idx = lo.clone();
        let mut x = vec![0.0; d];
        'scan: loop {
            for k in 0..d {
                x[k] = idx[k] as f64 * h;
            }
            if domain.contains(&x) {
                let p = map.position(&idx).expect("inside box");
                map.slot[p] = interior.len() as i64;
                interior.push(idx.clone());
            }
            let mut k = d;
            loop {
                if k == 0 {
                    break 'scan;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
            }
        }
        if interior.is_empty() {
            return arg("no grid nodes inside the domain; decrease h");
        }
        let n = interior.len();
        let mut collar = Vec::new();
        let mut row_ptr = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        let mut ic_ptr = vec![0];
        let (mut ic_cols, mut ic_vals) = (Vec::new(), Vec::new());
        let mut nb = vec![0i64; d];
        for (row, node) in interior.iter().enumerate() {
            cols.push(row);
            vals.push(center);
            for (off, w) in &entries {
                for k in 0..d {
                    nb[k] = node[k] + off[k];
                }
                let p = map
                    .position(&nb)
                    .expect("collar padding covers the stencil");
                let s = map.slot[p];
                if s >= 0 {
                    cols.push(s as usize);
                    vals.push(*w);
                } else {
                    let ci = if s == -1 {
                        map.slot[p] = -2 - collar.len() as i64;
                        collar.push(nb.clone());
                        collar.len() - 1
                    } else {
                        (-2 - s) as usize
                    };
                    ic_cols.push(ci);
                    ic_vals.push(*w);
                }
            }
            row_ptr.push(cols.len());
            ic_ptr.push(ic_cols.len());
        }
        let mut cvals = vec![0.0; n];
        if let Some(cf) = c {
            for (i, node) in interior.iter().enumerate() {
                let x: Vec<f64> = node.iter().map(|v| *v as f64 * h).collect();
                let v = cf(&x);
                if !v.is_finite() {
                    return Err(Error::Data(format!("c is not finite at {x:?}")));
                }
                cvals[i] = v;
            }
        }
        let symmetric = stencil.compensator.iter().all(|g| *g == 0.0);
        Ok(Self {
            stencil,
            domain: domain.clone(),
            map: Arc::new(map),
            interior,
            collar,
            a_ii: Csr {
                n,
                row_ptr,
                cols,
                vals,
            },
            a_ic_ptr: ic_ptr,
            a_ic_cols: ic_cols,
            a_ic_vals: ic_vals,
            c: cvals,
            far_field,
            symmetric,
        })
    }

    pub fn h(&self) -> f64 {
        self.stencil.h
    }

    pub fn dim(&self) -> usize {
        self.stencil.dim
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn kappa_tail(&self) -> f64 {
        self.stencil.kappa_tail
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn node_map(&self) -> &NodeMap {
        &self.map
    }

    pub fn coords(&self, idx: &[i64]) -> Vec<f64> {
        idx.iter().map(|v| *v as f64 * self.h()).collect()
    }

    pub fn interior_points(&self) -> Vec<Vec<f64>> {
        self.interior.iter().map(|i| self.coords(i)).collect()
    }

    /// Same operator with a different zeroth-order term.
    pub fn with_c(&self, c: Field) -> Result<Self> {
        let mut out = self.clone();
        for (i, node) in self.interior.iter().enumerate() {
            let x = self.coords(node);
            let v = c(&x);
            if !v.is_finite() {
                return Err(Error::Data(format!("c is not finite at {x:?}")));
            }
            out.c[i] = v;
        }
        Ok(out)
    }

    /// `M = −(A_II + c)`, the matrix of the linear solves.
    pub fn system_matrix(&self) -> Csr {
        let neg_c: Vec<f64> = self.c.iter().map(|v| -v).collect();
        self.a_ii.scaled_plus_diagonal(-1.0, &neg_c)
    }

    /// `A_IC g + κ_tail·far_field` per interior row.
    pub fn exterior_load(&self, g_collar: &[f64]) -> Vec<f64> {
        (0..self.n_interior())
            .map(|i| {
                let mut s = self.stencil.kappa_tail * self.far_field;
                for k in self.a_ic_ptr[i]..self.a_ic_ptr[i + 1] {
                    s += self.a_ic_vals[k] * g_collar[self.a_ic_cols[k]];
                }
                s
            })
            .collect()
    }

    /// `(A + c)u + load` at interior nodes, with collar values `g_collar`.
    pub fn apply(&self, u: &[f64], g_collar: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_interior()];
        self.a_ii.matvec(u, &mut out);
        let load = self.exterior_load(g_collar);
        for i in 0..out.len() {
            out[i] += self.c[i] * u[i] + load[i];
        }
        out
    }

    pub fn sample_collar(&self, g: Field) -> Result<Vec<f64>> {
        self.collar
            .iter()
            .map(|idx| {
                let x = self.coords(idx);
                let v = g(&x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Data(format!("exterior data is not finite at {x:?}")))
                }
            })
            .collect()
    }

    pub fn sample_interior(&self, f: Field) -> Result<Vec<f64>> {
        self.interior
            .iter()
            .map(|idx| {
                let x = self.coords(idx);
                let v = f(&x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Data(format!("field is not finite at {x:?}")))
                }
            })
            .collect()
    }

    pub(crate) fn solve_system(
        &self,
        m: &Csr,
        rhs: &[f64],
        x: &mut [f64],
        spd: bool,
    ) -> Result<SolveStats> {
        let max_iter = 20 * m.n + 1000;
        if spd && self.symmetric {
            cg(m, rhs, x, SOLVE_TOL, max_iter)
        } else {
            bicgstab(m, rhs, x, SOLVE_TOL, max_iter)
        }
    }

    /// Wraps interior values into a grid function with the given collar values.
    pub fn grid_function(
        &self,
        values: Vec<f64>,
        collar_values: Vec<f64>,
        outside: f64,
    ) -> GridFunction {
        GridFunction {
            map: self.map.clone(),
            interior: self.interior.clone(),
            values,
            collar_values,
            outside,
        }
    }

    /// Coordinate-format dump: one `row col value` line per stored entry;
    /// collar columns are numbered after the interior ones.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# rows {} interior {} collar {}",
            self.n_interior(),
            self.n_interior(),
            self.collar.len()
        )?;
        let n = self.n_interior();
        for i in 0..n {
            for k in self.a_ii.row_ptr[i]..self.a_ii.row_ptr[i + 1] {
                let mut v = self.a_ii.vals[k];
                if self.a_ii.cols[k] == i {
                    v += self.c[i];
                }
                writeln!(w, "{} {} {:e}", i, self.a_ii.cols[k], v)?;
            }
            for k in self.a_ic_ptr[i]..self.a_ic_ptr[i + 1] {
                writeln!(w, "{} {} {:e}", i, n + self.a_ic_cols[k], self.a_ic_vals[k])?;
            }
        }
        Ok(())
    }
}

/// Node values on interior and collar nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    map: Arc<NodeMap>,
    pub interior: Vec<Vec<i64>>,
    pub values: Vec<f64>,
    pub collar_values: Vec<f64>,
    /// Value assumed at nodes beyond the collar.
    pub outside: f64,
}

impl GridFunction {
    pub fn h(&self) -> f64 {
        self.map.h
    }

    pub fn dim(&self) -> usize {
        self.map.dim
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.interior
            .iter()
            .map(|i| i.iter().map(|v| *v as f64 * self.map.h).collect())
            .collect()
    }

    pub fn node_value(&self, idx: &[i64]) -> f64 {
        match self.map.node(idx) {
            Node::Interior(i) => self.values[i],
            Node::Collar(c) => self.collar_values.get(c).copied().unwrap_or(self.outside),
            Node::Outside => self.outside,
        }
    }

    /// Multilinear interpolation between grid nodes.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let h = self.map.h;
        let base: Vec<i64> = x.iter().map(|v| (v / h).floor() as i64).collect();
        let frac: Vec<f64> = x
            .iter()
            .zip(&base)
            .map(|(v, b)| v / h - *b as f64)
            .collect();
        let mut acc = 0.0;
        let mut corner = vec![0i64; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let bit = (mask >> k) & 1;
                corner[k] = base[k] + bit as i64;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                acc += w * self.node_value(&corner);
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.collar_values.iter_mut().for_each(|v| *v *= s);
        out.outside *= s;
        out
    }

    /// CSV rows `x1,…,xd,value` over interior nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim())
            .map(|k| format!("x{k}"))
            .chain(["value".to_string()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (p, v) in self.points().iter().zip(&self.values) {
            let row: Vec<String> = p
                .iter()
                .map(|c| format!("{c}"))
                .chain([format!("{v}")])
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Solves `(A + c)u = −f` in the interior with `u = g` on the collar.
pub fn solve_dirichlet(
    op: &GridOperator,
    f: Field,
    g: Field,
) -> Result<(GridFunction, SolveStats)> {
    if op.c.iter().any(|v| *v > 0.0) {
        return Err(Error::Hypothesis("Dirichlet solves require c ≤ 0".into()));
    }
    let fv = op.sample_interior(f)?;
    let gv = op.sample_collar(g)?;
    let load = op.exterior_load(&gv);
    let rhs: Vec<f64> = fv.iter().zip(&load).map(|(a, b)| a + b).collect();
    let m = op.system_matrix();
    let mut u = vec![0.0; op.n_interior()];
    let stats = op.solve_system(&m, &rhs, &mut u, true)?;
    Ok((op.grid_function(u, gv, op.far_field), stats))
}

/// Same as [`solve_dirichlet`] without the sign condition on `c`.
pub fn solve_general(op: &GridOperator, f: Field, g: Field) -> Result<(GridFunction, SolveStats)> {
    let fv = op.sample_interior(f)?;
    let gv = op.sample_collar(g)?;
    let load = op.exterior_load(&gv);
    let rhs: Vec<f64> = fv.iter().zip(&load).map(|(a, b)| a + b).collect();
    let m = op.system_matrix();
    let mut u = vec![0.0; op.n_interior()];
    let spd = op.c.iter().all(|v| *v <= 0.0);
    let stats = op.solve_system(&m, &rhs, &mut u, spd)?;
    Ok((op.grid_function(u, gv, op.far_field), stats))
}

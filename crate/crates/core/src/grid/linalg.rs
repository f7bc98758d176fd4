//! Compressed-row matrices and Krylov solvers used by the grid oracle.

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Returns `scale·self + diag(shift)`.
    pub fn scaled_plus_diagonal(&self, scale: f64, shift: &[f64]) -> Csr {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= scale;
        }
        out.add_diagonal(|i| shift[i]);
        out
    }

    /// Adds `shift(i)` to each stored diagonal entry in place.
    pub fn add_diagonal(&mut self, shift: impl Fn(usize) -> f64) {
        for i in 0..self.n {
            let k = (self.row_ptr[i]..self.row_ptr[i + 1])
                .find(|&k| self.cols[k] == i)
                .expect("diagonal entry stored");
            self.vals[k] += shift(i);
        }
    }

    /// Lower bound on the spectrum from Gershgorin discs.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut center = 0.0;
                let mut radius = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    if self.cols[k] == i {
                        center += self.vals[k];
                    } else {
                        radius += self.vals[k].abs();
                    }
                }
                center - radius
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let back = (self.row_ptr[j]..self.row_ptr[j + 1])
                    .find(|&m| self.cols[m] == i)
                    .map(|m| self.vals[m])
                    .unwrap_or(0.0);
                if (back - self.vals[k]).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn true_residual(m: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; m.n];
    m.matvec(x, &mut r);
    let bn = norm2(b);
    let rn = norm2(&r.iter().zip(b).map(|(a, c)| c - a).collect::<Vec<_>>());
    if bn > 0.0 {
        rn / bn
    } else {
        rn
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `m`.
pub fn cg(m: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = m.n;
    let inv_diag: Vec<f64> = m
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bn = norm2(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    m.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        let rn = norm2(&r) / bn;
        if rn <= tol {
            let res = true_residual(m, x, b);
            if res <= 10.0 * tol {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: res,
                });
            }
            // drifted recurrence: restart from the true residual
            m.matvec(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        m.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Numeric(format!(
                "conjugate gradients broke down (pᵀAp = {pq:e}); matrix is not positive definite"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = true_residual(m, x, b);
    if res <= tol {
        return Ok(SolveStats {
            iterations: max_iter,
            relative_residual: res,
        });
    }
    Err(Error::Numeric(format!("conjugate gradients did not converge: relative residual {res:e} after {max_iter} iterations")))
}

/// Jacobi-preconditioned BiCGSTAB for general nonsingular `m`.
pub fn bicgstab(
    m: &Csr,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = m.n;
    let inv_diag: Vec<f64> = m
        .diagonal()
        .iter()
        .map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bn = norm2(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    let (mut p, mut v, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut phat, mut shat) = (vec![0.0; n], vec![0.0; n]);
    let mut restarts = 0;
    'outer: loop {
        m.matvec(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        p.iter_mut().for_each(|e| *e = 0.0);
        v.iter_mut().for_each(|e| *e = 0.0);
        for it in 0..max_iter {
            if norm2(&r) / bn <= tol {
                let res = true_residual(m, x, b);
                if res <= 10.0 * tol {
                    return Ok(SolveStats {
                        iterations: it,
                        relative_residual: res,
                    });
                }
                restarts += 1;
                if restarts > 5 {
                    break 'outer;
                }
                continue 'outer;
            }
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 || omega == 0.0 {
                restarts += 1;
                if restarts > 5 {
                    break 'outer;
                }
                continue 'outer;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                phat[i] = p[i] * inv_diag[i];
            }
            m.matvec(&phat, &mut v);
            let r0v = dot(&r0, &v);
            if r0v == 0.0 {
                restarts += 1;
                if restarts > 5 {
                    break 'outer;
                }
                continue 'outer;
            }
            alpha = rho / r0v;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
                shat[i] = s[i] * inv_diag[i];
            }
            m.matvec(&shat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
        }
        break;
    }
    let res = true_residual(m, x, b);
    if res <= tol {
        return Ok(SolveStats {
            iterations: max_iter,
            relative_residual: res,
        });
    }
    Err(Error::Numeric(format!(
        "BiCGSTAB did not converge: relative residual {res:e}"
    )))
}

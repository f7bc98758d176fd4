use super::linalg::{bicgstab, Csr};
use super::{GridFunction, GridOperator};
use crate::error::{arg, Error, Result};

/// Max-norm residual at which Newton stops.
pub const NEWTON_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone)]
pub struct SemilinearResult {
    pub u: GridFunction,
    pub iterations: usize,
    pub residual: f64,
}

fn residual(op: &GridOperator, u: &[f64], load: &[f64], f: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    op.a_ii.matvec(u, &mut out);
    for i in 0..u.len() {
        out[i] += op.c[i] * u[i] + load[i] - f(u[i]);
    }
    out
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton for `(A + c)u = f(u)` with zero exterior data.
pub fn solve_semilinear(
    op: &GridOperator,
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    u_init: &[f64],
) -> Result<SemilinearResult> {
    let n = op.n_interior();
    if u_init.len() != n {
        return arg(format!(
            "initial guess has {} values for {n} interior nodes",
            u_init.len()
        ));
    }
    let load = op.exterior_load(&vec![0.0; op.collar.len()]);
    let base: Csr = op.system_matrix();
    let mut u = u_init.to_vec();
    let mut res = residual(op, &u, &load, f);
    let mut rn = max_norm(&res);
    for it in 0..MAX_NEWTON {
        if !rn.is_finite() {
            break;
        }
        if rn <= NEWTON_TOL {
            let collar = vec![0.0; op.collar.len()];
            return Ok(SemilinearResult {
                u: op.grid_function(u, collar, 0.0),
                iterations: it,
                residual: rn,
            });
        }
        // −J = −(A + c) + diag f'(u)
        let shift: Vec<f64> = u.iter().map(|v| df(*v)).collect();
        let neg_j = base.scaled_plus_diagonal(1.0, &shift);
        let mut delta = vec![0.0; n];
        bicgstab(&neg_j, &res, &mut delta, 1e-12, 20 * n + 1000)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
            let tr = residual(op, &trial, &load, f);
            let tn = max_norm(&tr);
            if tn <= (1.0 - 1e-4 * t) * rn || t < 1e-6 {
                u = trial;
                res = tr;
                rn = tn;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Numeric(format!(
        "Newton did not converge (residual {rn:e}); try another initial guess or stronger damping"
    )))
}

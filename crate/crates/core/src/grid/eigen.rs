use super::linalg::{cg, dot, norm2};
use super::{GridFunction, GridOperator};
use crate::error::{Error, Result};

/// Relative eigen-residual `‖Mψ − λψ‖ / (|λ|‖ψ‖)` at convergence.
pub const EIGEN_TOL: f64 = 1e-10;
const MAX_OUTER: usize = 1000;

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    /// Normalized to `max ψ = 1`, zero on the collar.
    pub psi: GridFunction,
    pub iterations: usize,
    pub residual: f64,
    pub shift: f64,
    /// `ψ` at the interior node nearest the domain centroid.
    pub value_at_centroid: f64,
}

/// Smallest `λ` with `(A + c)ψ = −λψ`, `ψ = 0` off the interior, by shifted
/// inverse iteration. Fails with [`Error::PerronViolation`] if the converged
/// vector changes sign.
pub fn principal_eigenpair(op: &GridOperator) -> Result<Eigenpair> {
    if !op.is_symmetric() {
        return Err(Error::Unsupported(
            "eigenpairs need a symmetric stencil".into(),
        ));
    }
    // one dense-ish copy only: long-range stencils make this the largest allocation
    let mut b = op.system_matrix();
    let n = b.n;
    let g = b.gershgorin_lower();
    let shift = g - 0.1 * g.abs();
    b.add_diagonal(|_| -shift);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut mv = vec![0.0; n];
    let mut lambda = f64::NAN;
    let mut residual = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();
    for it in 1..=MAX_OUTER {
        let mut y = v.clone();
        cg(&b, &v, &mut y, 1e-12, 20 * n + 1000)?;
        let ny = norm2(&y);
        if !(ny > 0.0 && ny.is_finite()) {
            return Err(Error::Numeric(
                "inverse iteration produced a zero or non-finite vector".into(),
            ));
        }
        for i in 0..n {
            v[i] = y[i] / ny;
        }
        b.matvec(&v, &mut mv);
        for i in 0..n {
            mv[i] += shift * v[i];
        }
        lambda = dot(&v, &mv);
        let r: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect();
        residual = norm2(&r) / lambda.abs().max(f64::MIN_POSITIVE);
        if residual <= EIGEN_TOL {
            return finish(op, v, lambda, it, residual, shift);
        }
        history.push(residual);
        if it > 50 && history[it - 51] <= residual * 1.000_001 {
            break;
        }
    }
    Err(Error::Numeric(format!(
        "inverse iteration stagnated at eigen-residual {residual:e} (λ ≈ {lambda})"
    )))
}

fn finish(
    op: &GridOperator,
    mut v: Vec<f64>,
    lambda: f64,
    iterations: usize,
    residual: f64,
    shift: f64,
) -> Result<Eigenpair> {
    let sum: f64 = v.iter().sum();
    if sum < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    v.iter_mut().for_each(|x| *x /= max);
    let negative = v.iter().filter(|x| **x <= 0.0).count();
    if negative > 0 {
        return Err(Error::PerronViolation {
            negative,
            total: v.len(),
        });
    }
    let centroid = op.domain.centroid();
    let nearest = op
        .interior_points()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                i,
                p.iter()
                    .zip(centroid)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            )
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("non-empty interior");
    let value_at_centroid = v[nearest];
    let collar = vec![0.0; op.collar.len()];
    Ok(Eigenpair {
        lambda,
        psi: op.grid_function(v, collar, 0.0),
        iterations,
        residual,
        shift,
        value_at_centroid,
    })
}

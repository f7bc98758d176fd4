//! Monte Carlo solution of `Lu = −f` in `D`, `u = g` outside, by
//! `u(x) = E_x[∫₀^τ f(X_t) dt + g(X_τ)]`, plus the exit-moment, ABP and
//! comparison checks built on it.

use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::geometry::Domain;
use crate::kernel::JumpKernel;
use crate::path::{ExitSample, Field, PathConfig, PathSimulator};
use crate::rng::stream_id;
use crate::stats::{compensated_sum, EstimatorResult};

/// Averages `occupation + g(exit)` over the non-censored paths of `samples`.
fn payoff_estimate(samples: &[ExitSample], g: Field, t_max: f64) -> Result<EstimatorResult> {
    let mut values = Vec::with_capacity(samples.len());
    let (mut g_sup, mut f_sup) = (0.0f64, 0.0f64);
    for s in samples {
        if s.exit_time > 0.0 {
            f_sup = f_sup.max((s.occupation / s.exit_time).abs());
        }
        if s.censored {
            continue;
        }
        let gv = g(&s.exit_location);
        if !gv.is_finite() {
            return Err(Error::Data(format!(
                "exterior data is not finite at {:?}",
                s.exit_location
            )));
        }
        g_sup = g_sup.max(gv.abs());
        values.push(s.occupation + gv);
    }
    let censored = samples.len() - values.len();
    if values.is_empty() {
        return Err(Error::Estimation(format!(
            "all {} paths were censored at t_max = {t_max}; increase t_max",
            samples.len()
        )));
    }
    // The censored fraction estimates P(τ > t_max).
    let bias = censored as f64 / samples.len() as f64 * (g_sup + t_max * f_sup);
    Ok(EstimatorResult::from_values(&values, censored, bias))
}

/// Estimate of `u(x0)`.
pub fn solve_at(
    domain: &Domain,
    f: Option<Field>,
    g: Field,
    x0: &[f64],
    kernel: &JumpKernel,
    n_paths: usize,
    config: &PathConfig,
) -> Result<EstimatorResult> {
    let sim = PathSimulator::new(domain, kernel, config)?;
    solve_with(&sim, f, g, x0, n_paths, 0)
}

/// Estimate of `u(x0)` on streams belonging to start point `start`.
pub fn solve_with(
    sim: &PathSimulator,
    f: Option<Field>,
    g: Field,
    x0: &[f64],
    n_paths: usize,
    start: u64,
) -> Result<EstimatorResult> {
    if n_paths == 0 {
        return arg("n_paths must be positive");
    }
    let samples = sim.run_paths(x0, f, n_paths, stream_id(start, 0))?;
    payoff_estimate(&samples, g, sim.config().t_max)
}

/// Estimates at each start point; start `i` uses its own block of streams.
pub fn solve_at_points(
    domain: &Domain,
    f: Option<Field>,
    g: Field,
    starts: &[Vec<f64>],
    kernel: &JumpKernel,
    n_paths: usize,
    config: &PathConfig,
) -> Result<Vec<EstimatorResult>> {
    let sim = PathSimulator::new(domain, kernel, config)?;
    starts
        .iter()
        .enumerate()
        .map(|(i, x)| solve_with(&sim, f, g, x, n_paths, i as u64))
        .collect()
}

/// Start lattice with `n_per_axis` cells per bounding-box axis, keeping points
/// farther than `2√dt` from the boundary.
pub fn start_lattice(domain: &Domain, n_per_axis: usize, config: &PathConfig) -> Vec<Vec<f64>> {
    domain.lattice(n_per_axis, 2.0 * config.dt.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartMoments {
    pub x0: Vec<f64>,
    /// `E[τ^k]` for `k = 1..=k_max`.
    pub moments: Vec<EstimatorResult>,
    /// Censored paths enter with `τ = t_max`, so the moments are lower bounds.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitMoments {
    pub per_start: Vec<StartMoments>,
    /// `θ = max_x E_x[τ]`
    pub sup_mean_exit: f64,
    /// Per `k`, whether `max_x E[τ^k] ≤ k!·θ^k` within three standard errors.
    pub verdicts: Vec<bool>,
    pub pass: bool,
}

/// Moments `E_x[τ^k]` for `k ≤ k_max ≤ 4` at each start, with the factorial
/// moment-bound verdict `sup E[τ^k] ≤ k!(sup E τ)^k`.
pub fn exit_moments(
    domain: &Domain,
    starts: &[Vec<f64>],
    kernel: &JumpKernel,
    k_max: usize,
    n_paths: usize,
    config: &PathConfig,
) -> Result<ExitMoments> {
    if !(1..=4).contains(&k_max) {
        return arg(format!("k_max must lie in 1..=4, got {k_max}"));
    }
    if starts.is_empty() || n_paths == 0 {
        return arg("need at least one start point and one path");
    }
    let sim = PathSimulator::new(domain, kernel, config)?;
    let mut per_start = Vec::new();
    for (i, x0) in starts.iter().enumerate() {
        let samples = sim.run_paths(x0, None, n_paths, stream_id(i as u64, 0))?;
        let censored = samples.iter().filter(|s| s.censored).count();
        let moments = (1..=k_max)
            .map(|k| {
                let vals: Vec<f64> = samples.iter().map(|s| s.exit_time.powi(k as i32)).collect();
                let mut r = EstimatorResult::from_values(&vals, censored, 0.0);
                r.n_effective = samples.len() - censored;
                r
            })
            .collect();
        per_start.push(StartMoments {
            x0: x0.clone(),
            moments,
            lower_bound: censored > 0,
        });
    }
    let best = per_start
        .iter()
        .map(|s| &s.moments[0])
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .expect("non-empty");
    let theta = best.mean;
    let theta_hi = theta + 3.0 * best.std_error;
    let mut verdicts = Vec::new();
    let mut fact = 1.0;
    for k in 1..=k_max {
        fact *= k as f64;
        let lhs = per_start
            .iter()
            .map(|s| s.moments[k - 1].mean - 3.0 * s.moments[k - 1].std_error)
            .fold(f64::NEG_INFINITY, f64::max);
        verdicts.push(lhs <= fact * theta_hi.powi(k as i32));
    }
    let pass = verdicts.iter().all(|&v| v);
    Ok(ExitMoments {
        per_start,
        sup_mean_exit: theta,
        verdicts,
        pass,
    })
}

/// Midpoint-rule `L^p(D)` norm of `f` on `cells^d` cells of the bounding box.
pub fn lp_norm(domain: &Domain, f: Field, p: f64, cells: usize) -> Result<f64> {
    let (lo, hi) = domain.bounding_box();
    let cell_vol: f64 = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (b - a) / cells as f64)
        .product();
    let mut acc = Vec::new();
    for x in domain.lattice(cells, 0.0) {
        let v = f(&x);
        if !v.is_finite() {
            return Err(Error::Data(format!("field is not finite at {x:?}")));
        }
        acc.push(v.abs().powf(p) * cell_vol);
    }
    Ok(compensated_sum(acc).powf(1.0 / p))
}

/// Quadrature cells per axis used for `L^p` norms.
pub fn default_norm_cells(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 512,
        _ => 96,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbpResult {
    pub sup_u_estimate: f64,
    pub sup_u_std_error: f64,
    pub argmax: Vec<f64>,
    pub lp_norm_f: f64,
    pub ratio: f64,
    pub starts: Vec<Vec<f64>>,
    pub estimates: Vec<EstimatorResult>,
}

/// Empirical ABP constant `sup_D u / ‖f‖_{L^p(D)}` for `g ≡ 0`, `p > d/2`.
pub fn abp_ratio(
    domain: &Domain,
    f: Field,
    p: f64,
    kernel: &JumpKernel,
    n_per_axis: usize,
    n_paths: usize,
    config: &PathConfig,
) -> Result<AbpResult> {
    let d = domain.dimension() as f64;
    if !(p > d / 2.0) {
        return Err(Error::Hypothesis(format!(
            "the ABP bound needs p > d/2 = {}, got p = {p}",
            d / 2.0
        )));
    }
    let cells = default_norm_cells(domain.dimension());
    if domain
        .lattice(cells.min(64), 0.0)
        .iter()
        .any(|x| f(x) < 0.0)
    {
        return arg("f must be nonnegative");
    }
    let norm = lp_norm(domain, f, p, cells)?;
    let starts = start_lattice(domain, n_per_axis, config);
    if starts.is_empty() {
        return arg("start lattice is empty; use more lattice points or a smaller dt");
    }
    let zero = |_: &[f64]| 0.0;
    let estimates = solve_at_points(domain, Some(f), &zero, &starts, kernel, n_paths, config)?;
    let (i, best) = estimates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
        .expect("non-empty");
    Ok(AbpResult {
        sup_u_estimate: best.mean,
        sup_u_std_error: best.std_error,
        argmax: starts[i].clone(),
        lp_norm_f: norm,
        ratio: if norm > 0.0 {
            best.mean / norm
        } else {
            f64::NAN
        },
        starts,
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub max_interior: f64,
    pub max_interior_std_error: f64,
    /// Supremum of `g` over an exterior lattice and all observed exit points.
    pub sup_exterior: f64,
    pub pass: bool,
    pub starts: Vec<Vec<f64>>,
    pub estimates: Vec<EstimatorResult>,
}

/// Checks `sup_D u ≤ sup_{D^c} g` for `f ≡ 0`, allowing three standard errors.
pub fn comparison_check(
    domain: &Domain,
    g: Field,
    kernel: &JumpKernel,
    n_per_axis: usize,
    n_paths: usize,
    config: &PathConfig,
) -> Result<ComparisonResult> {
    let starts = start_lattice(domain, n_per_axis, config);
    if starts.is_empty() {
        return arg("start lattice is empty; use more lattice points or a smaller dt");
    }
    let sim = PathSimulator::new(domain, kernel, config)?;
    let mut estimates = Vec::new();
    let mut sup = f64::NEG_INFINITY;
    for (i, x0) in starts.iter().enumerate() {
        let samples = sim.run_paths(x0, None, n_paths, stream_id(i as u64, 0))?;
        for s in samples.iter().filter(|s| !s.censored) {
            sup = sup.max(g(&s.exit_location));
        }
        estimates.push(payoff_estimate(&samples, g, config.t_max)?);
    }
    for x in exterior_lattice(domain, 33) {
        sup = sup.max(g(&x));
    }
    let best = estimates
        .iter()
        .max_by(|a, b| a.mean.total_cmp(&b.mean))
        .expect("non-empty");
    let pass = best.mean - 3.0 * best.std_error <= sup + 1e-12 * sup.abs().max(1.0);
    Ok(ComparisonResult {
        max_interior: best.mean,
        max_interior_std_error: best.std_error,
        sup_exterior: sup,
        pass,
        starts,
        estimates,
    })
}

/// Exterior points of a lattice on the bounding box enlarged by one diameter per side.
pub fn exterior_lattice(domain: &Domain, n_per_axis: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = domain.bounding_box();
    let d = domain.dimension();
    let pad = domain.diameter();
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    let n = n_per_axis.max(2);
    loop {
        let x: Vec<f64> = (0..d)
            .map(|k| {
                let (a, b) = (lo[k] - pad, hi[k] + pad);
                a + (b - a) * idx[k] as f64 / (n - 1) as f64
            })
            .collect();
        if !domain.contains(&x) {
            out.push(x);
        }
        let mut k = 0;
        loop {
            if k == d {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;

    fn disk() -> Domain {
        Domain::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn constant_payoff_is_exact() {
        let k = JumpKernel::fractional(0.5, 2).unwrap();
        let cfg = PathConfig::new(1e-3, 20.0, 1);
        let seven = |_: &[f64]| 7.0;
        let r = solve_at(&disk(), None, &seven, &[0.2, 0.0], &k, 500, &cfg).unwrap();
        assert_eq!(r.mean, 7.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.n_effective + r.censored_count, 500);
    }

    #[test]
    fn harmonic_data_reproduced() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-3, 20.0, 2).with_bridge(true);
        let g = |x: &[f64]| x[0];
        let r = solve_at(&disk(), None, &g, &[0.3, 0.0], &k, 20_000, &cfg).unwrap();
        assert!((r.mean - 0.3).abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn all_censored_is_an_estimation_error() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-3, 2e-3, 2);
        let g = |_: &[f64]| 1.0;
        assert!(matches!(
            solve_at(&disk(), None, &g, &[0.0, 0.0], &k, 10, &cfg),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn interval_exit_moments_and_bound() {
        let k = JumpKernel::zero(1).unwrap();
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let cfg = PathConfig::new(1e-4, 20.0, 3).with_bridge(true);
        let m = exit_moments(&dom, &[vec![0.0]], &k, 2, 20_000, &cfg).unwrap();
        let e1 = &m.per_start[0].moments[0];
        let e2 = &m.per_start[0].moments[1];
        assert!((e1.mean - 0.5).abs() < 3.0 * e1.std_error + 0.01, "{e1:?}");
        // E[τ²] at the centre is 5/12
        assert!(
            (e2.mean - 5.0 / 12.0).abs() < 3.0 * e2.std_error + 0.02,
            "{e2:?}"
        );
        assert!(m.pass);
        assert!(!m.per_start[0].lower_bound);
    }

    #[test]
    fn short_horizon_moments_are_flagged_lower_bounds() {
        let k = JumpKernel::zero(1).unwrap();
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let cfg = PathConfig::new(1e-3, 0.2, 3);
        let m = exit_moments(&dom, &[vec![0.0]], &k, 3, 2000, &cfg).unwrap();
        let s = &m.per_start[0];
        assert!(s.lower_bound);
        assert!(s.moments[0].censored_count > 0);
        assert!(s.moments[0].mean <= 0.2);
        assert!(exit_moments(&dom, &[vec![0.0]], &k, 5, 10, &cfg).is_err());
    }

    #[test]
    fn abp_rejects_small_p_and_negative_f() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-3, 5.0, 3);
        let one = |_: &[f64]| 1.0;
        assert!(matches!(
            abp_ratio(&disk(), &one, 1.0, &k, 3, 10, &cfg),
            Err(Error::Hypothesis(_))
        ));
        let neg = |x: &[f64]| x[0];
        assert!(abp_ratio(&disk(), &neg, 2.0, &k, 3, 10, &cfg).is_err());
    }

    #[test]
    fn lp_norm_of_one_on_disk() {
        let one = |_: &[f64]| 1.0;
        let n = lp_norm(&disk(), &one, 2.0, 512).unwrap();
        assert!((n - std::f64::consts::PI.sqrt()).abs() < 2e-3, "{n}");
        let sq = Domain::axis_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let x = |x: &[f64]| x[0];
        // ∫∫ x³ = 2/4
        assert!((lp_norm(&sq, &x, 3.0, 256).unwrap() - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-4);
    }

    #[test]
    fn abp_ratio_scales_linearly() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-3, 10.0, 4).with_bridge(true);
        let one = |_: &[f64]| 1.0;
        let ten = |_: &[f64]| 10.0;
        let a = abp_ratio(&disk(), &one, 2.0, &k, 3, 2000, &cfg).unwrap();
        let b = abp_ratio(&disk(), &ten, 2.0, &k, 3, 2000, &cfg).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-12 * a.ratio);
    }

    #[test]
    fn comparison_with_constant_and_indicator() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-3, 10.0, 5);
        let c = |_: &[f64]| 2.5;
        let r = comparison_check(&disk(), &c, &k, 3, 200, &cfg).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_interior, 2.5);
        let ind = |x: &[f64]| if x[0] > 0.5 { 1.0 } else { 0.0 };
        let r = comparison_check(&disk(), &ind, &k, 3, 500, &cfg).unwrap();
        assert!(r.pass);
        assert!(r.estimates.iter().all(|e| (0.0..=1.0).contains(&e.mean)));
    }

    #[test]
    fn comparison_with_jumps_in_one_dimension() {
        let k = JumpKernel::fractional(0.5, 1).unwrap();
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let cfg = PathConfig::new(1e-3, 10.0, 6);
        let g = |x: &[f64]| x[0].sin();
        assert!(comparison_check(&dom, &g, &k, 5, 1000, &cfg).unwrap().pass);
    }

    #[test]
    fn payoff_is_nonnegative_for_nonnegative_data() {
        let k = JumpKernel::new(KernelFamily::TemperedFractional { s: 0.4, beta: 1.0 }, 2).unwrap();
        let cfg = PathConfig::new(1e-3, 10.0, 7);
        let f = |x: &[f64]| x[0] * x[0];
        let g = |x: &[f64]| x[1].abs();
        let dom = disk();
        let sim = PathSimulator::new(&dom, &k, &cfg).unwrap();
        for s in sim.run_paths(&[0.1, 0.1], Some(&f), 200, 0).unwrap() {
            assert!(s.occupation + g(&s.exit_location) >= 0.0);
        }
    }

    #[test]
    fn shared_seeds_make_the_estimator_linear() {
        let k = JumpKernel::fractional(0.5, 2).unwrap();
        let cfg = PathConfig::new(1e-3, 10.0, 8);
        let f1 = |x: &[f64]| 1.0 + x[0];
        let g1 = |x: &[f64]| x[1];
        let f2 = |x: &[f64]| 2.0 * (1.0 + x[0]);
        let g2 = |x: &[f64]| 2.0 * x[1];
        let a = solve_at(&disk(), Some(&f1), &g1, &[0.0, 0.2], &k, 300, &cfg).unwrap();
        let b = solve_at(&disk(), Some(&f2), &g2, &[0.0, 0.2], &k, 300, &cfg).unwrap();
        assert!((2.0 * a.mean - b.mean).abs() < 1e-12);
    }
}

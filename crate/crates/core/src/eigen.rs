//! Principal eigenvalue from the decay rate of the survival function
//! `P_x(τ > t) ~ C e^{−λt}`, and the ball-comparison experiments built on it.

use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::geometry::Domain;
use crate::grid::GridFunction;
use crate::kernel::JumpKernel;
use crate::path::{survival_curve, Field, PathConfig, PathSimulator, SurvivalCurve};
use crate::rng::stream_id;
use crate::stats::{EstimatorResult, Z95};

/// Survival level where the fit window opens.
pub const WINDOW_START: f64 = 0.5;
/// Survival level where the fit window closes.
pub const WINDOW_END: f64 = 0.02;
const FIT_POINTS: usize = 40;
const CURVE_POINTS: usize = 200;
const WINDOW_SHIFT: f64 = 0.2;
const MIN_FIT_POINTS: usize = 4;
/// Offset between the seeds of the domain and ball runs in the comparisons.
const BALL_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenDiagnostics {
    pub censored_fraction: f64,
    /// Largest change of `λ̂` when either window end moves by ±20%.
    pub window_sensitivity: f64,
    /// Whether `window_sensitivity` stays below the CI half-width.
    pub window_robust: bool,
    pub fit_points: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub lambda_hat: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub fit_window: (f64, f64),
    pub fit_r2: f64,
    pub n_paths: usize,
    pub x0: Vec<f64>,
    pub diagnostics: EigenDiagnostics,
    /// `Ŝ` tabulated on a regular grid over `(0, t_max]`.
    pub curve: SurvivalCurve,
}

impl EigenEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci95.1 - self.ci95.0)
    }
}

struct Fit {
    lambda: f64,
    std_error: f64,
    r2: f64,
    points: usize,
}

fn survival_at(sorted_exits: &[f64], n: usize, t: f64) -> f64 {
    (n - sorted_exits.partition_point(|&e| e <= t)) as f64 / n as f64
}

/// First time the empirical survival drops to `level` or below, if it does.
fn crossing_time(sorted_exits: &[f64], n: usize, level: f64) -> Option<f64> {
    let needed = ((1.0 - level) * n as f64).ceil() as usize;
    if needed == 0 {
        return Some(0.0);
    }
    sorted_exits.get(needed - 1).copied()
}

/// Inverse-variance weighted fit of `log Ŝ(t) = a − λt` on `[t0, t1]`. The slope
/// variance uses the full delta-method covariance
/// `Cov(log Ŝ(s), log Ŝ(t)) = (1 − S(s)) / (n S(s))` for `s ≤ t`.
fn fit_decay(sorted_exits: &[f64], n: usize, t0: f64, t1: f64) -> Result<Fit> {
    if !(t1 > t0) {
        return Err(Error::Estimation(format!("empty fit window [{t0}, {t1}]")));
    }
    let mut ts = Vec::with_capacity(FIT_POINTS);
    let mut ss = Vec::with_capacity(FIT_POINTS);
    for i in 0..FIT_POINTS {
        let t = t0 + (t1 - t0) * i as f64 / (FIT_POINTS - 1) as f64;
        let s = survival_at(sorted_exits, n, t);
        if s > 0.0 && s < 1.0 {
            ts.push(t);
            ss.push(s);
        }
    }
    if ts.len() < MIN_FIT_POINTS {
        return Err(Error::Estimation(format!(
            "only {} usable survival points in the fit window; use more paths or a longer t_max",
            ts.len()
        )));
    }
    let nf = n as f64;
    let var: Vec<f64> = ss.iter().map(|s| (1.0 - s) / (nf * s)).collect();
    let w: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let y: Vec<f64> = ss.iter().map(|s| s.ln()).collect();
    let sw: f64 = w.iter().sum();
    let t_bar = w.iter().zip(&ts).map(|(w, t)| w * t).sum::<f64>() / sw;
    let y_bar = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w
        .iter()
        .zip(&ts)
        .map(|(w, t)| w * (t - t_bar).powi(2))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::Estimation(
            "fit window collapsed to a single time".into(),
        ));
    }
    let c: Vec<f64> = w
        .iter()
        .zip(&ts)
        .map(|(w, t)| w * (t - t_bar) / sxx)
        .collect();
    let slope: f64 = c.iter().zip(&y).map(|(c, y)| c * y).sum();
    // Times are increasing, so the covariance of (i, j) is the variance at min(i, j).
    let m = ts.len();
    let mut slope_var = 0.0;
    for i in 0..m {
        slope_var += c[i] * c[i] * var[i];
        for j in i + 1..m {
            slope_var += 2.0 * c[i] * c[j] * var[i];
        }
    }
    let intercept = y_bar - slope * t_bar;
    let ss_res: f64 = (0..m)
        .map(|i| w[i] * (y[i] - intercept - slope * ts[i]).powi(2))
        .sum();
    let ss_tot: f64 = (0..m).map(|i| w[i] * (y[i] - y_bar).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(Fit {
        lambda: -slope,
        std_error: slope_var.max(0.0).sqrt(),
        r2,
        points: m,
    })
}

fn kernel_warnings(kernel: &JumpKernel) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let a1 = kernel.check_a1(&[0.1, 1.0, 10.0], None)?;
    if !a1.pass {
        warnings.push(format!(
            "symbol sector check failed (Im/Re ratio {:.3} above {:.3}); decay rate may not be a principal eigenvalue",
            a1.im_ratio_max, a1.ratio_threshold
        ));
    }
    Ok(warnings)
}

/// Estimates `λ_D` from the survival decay of paths started at `x0`
/// (the centroid when `None`).
pub fn estimate_lambda(
    domain: &Domain,
    kernel: &JumpKernel,
    x0: Option<&[f64]>,
    n_paths: usize,
    config: &PathConfig,
) -> Result<EigenEstimate> {
    let x0 = x0.unwrap_or_else(|| domain.centroid()).to_vec();
    if !domain.contains(&x0) {
        return Err(Error::Domain(format!(
            "start point {x0:?} is not inside the domain"
        )));
    }
    if n_paths == 0 {
        return arg("n_paths must be positive");
    }
    let warnings = kernel_warnings(kernel)?;
    let sim = PathSimulator::new(domain, kernel, config)?;
    let samples = sim.run_paths(&x0, None, n_paths, 0)?;

    let mut exits: Vec<f64> = samples
        .iter()
        .filter(|s| !s.censored)
        .map(|s| s.exit_time)
        .collect();
    exits.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    let censored = n - exits.len();
    let t_max = config.t_max;

    let t0 = crossing_time(&exits, n, WINDOW_START).ok_or_else(|| {
        Error::Estimation(format!(
            "survival never fell to {WINDOW_START} before t_max = {t_max}; increase t_max"
        ))
    })?;
    let t1 = crossing_time(&exits, n, WINDOW_END).unwrap_or(t_max);
    let fit = fit_decay(&exits, n, t0, t1)?;

    let variants = [
        ((1.0 - WINDOW_SHIFT) * t0, t1),
        ((1.0 + WINDOW_SHIFT) * t0, t1),
        (t0, (1.0 - WINDOW_SHIFT) * t1),
        (t0, ((1.0 + WINDOW_SHIFT) * t1).min(t_max)),
    ];
    let mut sensitivity: f64 = 0.0;
    for (a, b) in variants {
        if let Ok(v) = fit_decay(&exits, n, a, b) {
            sensitivity = sensitivity.max((v.lambda - fit.lambda).abs());
        }
    }

    let grid: Vec<f64> = (1..=CURVE_POINTS)
        .map(|i| t_max * i as f64 / CURVE_POINTS as f64)
        .collect();
    let curve = SurvivalCurve::from_samples(&samples, &grid)?;
    let hw = Z95 * fit.std_error;
    Ok(EigenEstimate {
        lambda_hat: fit.lambda,
        std_error: fit.std_error,
        ci95: (fit.lambda - hw, fit.lambda + hw),
        fit_window: (t0, t1),
        fit_r2: fit.r2,
        n_paths: n,
        x0,
        diagnostics: EigenDiagnostics {
            censored_fraction: censored as f64 / n as f64,
            window_sensitivity: sensitivity,
            window_robust: sensitivity < hw,
            fit_points: fit.points,
            warnings,
        },
        curve,
    })
}

fn require_rearrangement_hypotheses(kernel: &JumpKernel) -> Result<()> {
    if !kernel.is_isotropic() {
        return Err(Error::Hypothesis(
            "ball comparison requires an isotropic kernel".into(),
        ));
    }
    if !kernel.is_radially_decreasing() {
        return Err(Error::Hypothesis(
            "ball comparison requires a radially_decreasing kernel".into(),
        ));
    }
    Ok(())
}

fn ball_config(config: &PathConfig) -> PathConfig {
    let mut c = config.clone();
    c.base_seed = config.base_seed.wrapping_add(BALL_SEED_OFFSET);
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaberKrahnResult {
    pub lambda_domain: EigenEstimate,
    pub lambda_ball: EigenEstimate,
    pub ball_radius: f64,
    /// `λ̂_D ≥ λ̂_B − (hw_D + hw_B)`.
    pub pass: bool,
}

/// Compares `λ_D` with `λ_B` for the ball of equal volume, both started at
/// their centres of mass.
pub fn faber_krahn_compare(
    domain: &Domain,
    kernel: &JumpKernel,
    n_paths: usize,
    config: &PathConfig,
) -> Result<FaberKrahnResult> {
    require_rearrangement_hypotheses(kernel)?;
    let ball = domain.equal_volume_ball();
    let lambda_domain = estimate_lambda(domain, kernel, None, n_paths, config)?;
    let lambda_ball = estimate_lambda(&ball, kernel, None, n_paths, &ball_config(config))?;
    let slack = lambda_domain.half_width() + lambda_ball.half_width();
    let pass = lambda_domain.lambda_hat >= lambda_ball.lambda_hat - slack;
    let ball_radius = match ball.shape() {
        crate::geometry::Shape::Ball { radius, .. } => *radius,
        crate::geometry::Shape::Interval { a, b } => 0.5 * (b - a),
        _ => {
            return Err(Error::Logic(
                "equal-volume ball has an unexpected shape".into(),
            ))
        }
    };
    Ok(FaberKrahnResult {
        lambda_domain,
        lambda_ball,
        ball_radius,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub t: Vec<f64>,
    pub s_domain: Vec<f64>,
    pub s_ball: Vec<f64>,
    /// `sqrt(Var Ŝ_D + Var Ŝ_B)` at each time.
    pub joint_std_error: Vec<f64>,
    pub pass_per_t: Vec<bool>,
    pub pass: bool,
    pub curve_domain: SurvivalCurve,
    pub curve_ball: SurvivalCurve,
}

/// Checks `P_0(τ_D > t) ≤ P_0(τ_B > t)` with `D` translated so its centroid
/// sits at the origin and `B` its equal-volume ball about the origin.
pub fn survival_domination_check(
    domain: &Domain,
    kernel: &JumpKernel,
    t_grid: &[f64],
    n_paths: usize,
    config: &PathConfig,
) -> Result<DominationReport> {
    require_rearrangement_hypotheses(kernel)?;
    let shift: Vec<f64> = domain.centroid().iter().map(|c| -c).collect();
    let centred = domain.translated(&shift)?;
    let origin = vec![0.0; domain.dimension()];
    if !centred.contains(&origin) {
        return Err(Error::Domain("the centroid lies outside the domain".into()));
    }
    let ball = centred.equal_volume_ball();
    let curve_domain = survival_curve(&centred, &origin, kernel, t_grid, n_paths, config)?;
    let curve_ball = survival_curve(
        &ball,
        &origin,
        kernel,
        t_grid,
        n_paths,
        &ball_config(config),
    )?;
    let (vd, vb) = (curve_domain.variance(), curve_ball.variance());
    let joint_std_error: Vec<f64> = vd.iter().zip(&vb).map(|(a, b)| (a + b).sqrt()).collect();
    let pass_per_t: Vec<bool> = (0..t_grid.len())
        .map(|i| curve_domain.s_hat[i] <= curve_ball.s_hat[i] + 3.0 * joint_std_error[i])
        .collect();
    Ok(DominationReport {
        t: t_grid.to_vec(),
        s_domain: curve_domain.s_hat.clone(),
        s_ball: curve_ball.s_hat.clone(),
        joint_std_error,
        pass: pass_per_t.iter().all(|&p| p),
        pass_per_t,
        curve_domain,
        curve_ball,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub t: f64,
    pub lambda: f64,
    pub points: Vec<Vec<f64>>,
    pub psi_values: Vec<f64>,
    /// Estimates of `E_x[e^{λt} ψ(X_t) 1{τ > t}]`.
    pub estimates: Vec<EstimatorResult>,
    pub relative_deviation: Vec<f64>,
    pub max_relative_deviation: f64,
    /// Largest `std_error / ψ(x)` over the points.
    pub max_relative_std_error: f64,
}

/// Only lattice points with `ψ ≥ PSI_FLOOR · max ψ` enter the residual.
pub const PSI_FLOOR: f64 = 0.25;

/// Residual of `ψ(x) = E_x[e^{λt} ψ(X_t) 1{τ > t}]` for a grid eigenfunction,
/// interpolated multilinearly between nodes.
#[allow(clippy::too_many_arguments)]
pub fn eigen_identity_residual(
    domain: &Domain,
    kernel: &JumpKernel,
    psi: &GridFunction,
    lambda: f64,
    t: f64,
    n_per_axis: usize,
    n_paths: usize,
    config: &PathConfig,
) -> Result<IdentityReport> {
    let eval = |x: &[f64]| psi.interpolate(x);
    eigen_identity_residual_field(
        domain, kernel, &eval, lambda, t, n_per_axis, n_paths, config,
    )
}

/// As [`eigen_identity_residual`] for an eigenfunction given as a field.
#[allow(clippy::too_many_arguments)]
pub fn eigen_identity_residual_field(
    domain: &Domain,
    kernel: &JumpKernel,
    psi: Field,
    lambda: f64,
    t: f64,
    n_per_axis: usize,
    n_paths: usize,
    config: &PathConfig,
) -> Result<IdentityReport> {
    if !(t > 0.0) || t >= config.t_max {
        return arg(format!(
            "t must lie in (0, t_max = {}), got {t}",
            config.t_max
        ));
    }
    if t < config.dt {
        return arg(format!(
            "t = {t} is shorter than one time step dt = {}",
            config.dt
        ));
    }
    if !lambda.is_finite() || n_paths == 0 {
        return arg("lambda must be finite and n_paths positive");
    }
    let mut horizon = config.clone();
    horizon.t_max = t;
    let sim = PathSimulator::new(domain, kernel, &horizon)?;

    let lattice = domain.lattice(n_per_axis, 2.0 * config.dt.sqrt());
    let values: Vec<f64> = lattice.iter().map(|x| psi(x)).collect();
    let top = values.iter().cloned().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return Err(Error::Argument(
            "eigenfunction is not positive anywhere on the start lattice".into(),
        ));
    }
    let growth = (lambda * t).exp();
    let mut report = IdentityReport {
        t,
        lambda,
        points: Vec::new(),
        psi_values: Vec::new(),
        estimates: Vec::new(),
        relative_deviation: Vec::new(),
        max_relative_deviation: 0.0,
        max_relative_std_error: 0.0,
    };
    let kept = lattice
        .into_iter()
        .zip(values)
        .filter(|(_, v)| *v >= PSI_FLOOR * top);
    for (i, (x, v)) in kept.enumerate() {
        let samples = sim.run_paths(&x, None, n_paths, stream_id(i as u64, 0))?;
        let payoff: Vec<f64> = samples
            .iter()
            .map(|s| {
                if s.censored {
                    growth * psi(&s.exit_location)
                } else {
                    0.0
                }
            })
            .collect();
        let est = EstimatorResult::from_values(&payoff, 0, 0.0);
        let dev = (est.mean - v).abs() / v;
        report.max_relative_deviation = report.max_relative_deviation.max(dev);
        report.max_relative_std_error = report.max_relative_std_error.max(est.std_error / v);
        report.relative_deviation.push(dev);
        report.psi_values.push(v);
        report.estimates.push(est);
        report.points.push(x);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use std::f64::consts::PI;

    const DISK_LAMBDA: f64 = 5.783_185_962_946_784;

    fn cfg(dt: f64, t_max: f64, seed: u64) -> PathConfig {
        PathConfig::new(dt, t_max, seed).with_bridge(true)
    }

    #[test]
    fn decay_fit_recovers_an_exact_exponential() {
        // Exit times placed at the exact quantiles of an Exp(3) law.
        let n = 100_000;
        let exits: Vec<f64> = (1..=n)
            .map(|k| -(1.0 - (k as f64 - 0.5) / n as f64).ln() / 3.0)
            .collect();
        let fit = fit_decay(&exits, n, 0.23, 1.3).unwrap();
        assert!((fit.lambda - 3.0).abs() < 1e-2, "{}", fit.lambda);
        assert!(fit.r2 > 0.9999);
        assert!(fit.std_error > 0.0);
    }

    #[test]
    fn crossing_times_follow_the_order_statistics() {
        let exits = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(crossing_time(&exits, 4, 0.5), Some(2.0));
        assert_eq!(crossing_time(&exits, 8, 0.5), Some(4.0));
        assert_eq!(crossing_time(&exits, 8, 0.25), None);
        assert_eq!(survival_at(&exits, 4, 2.5), 0.5);
    }

    #[test]
    fn too_few_points_is_an_estimation_error() {
        let exits = [1.0, 1.01];
        assert!(matches!(
            fit_decay(&exits, 2, 0.5, 3.0),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn interval_lambda_is_pi_squared_over_four() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let k = JumpKernel::zero(1).unwrap();
        let est = estimate_lambda(&d, &k, None, 20_000, &cfg(4e-4, 3.0, 11)).unwrap();
        let exact = PI * PI / 4.0;
        assert!((est.lambda_hat / exact - 1.0).abs() < 0.05, "{est:?}");
        assert!(est.ci95.0 < est.lambda_hat && est.lambda_hat < est.ci95.1);
        assert!(est.fit_window.0 > 0.0 && est.fit_window.1 <= 3.0);
        assert!(est.fit_r2 > 0.99);
        assert_eq!(est.curve.t.len(), CURVE_POINTS);
    }

    #[test]
    fn interval_lambda_scales_diffusively() {
        let d = Domain::interval(-2.0, 2.0).unwrap();
        let k = JumpKernel::zero(1).unwrap();
        let est = estimate_lambda(&d, &k, None, 20_000, &cfg(1.6e-3, 12.0, 12)).unwrap();
        assert!(
            (est.lambda_hat / (PI * PI / 16.0) - 1.0).abs() < 0.05,
            "{}",
            est.lambda_hat
        );
    }

    #[test]
    fn disk_lambda_matches_the_bessel_zero() {
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let k = JumpKernel::zero(2).unwrap();
        let est = estimate_lambda(&d, &k, None, 20_000, &cfg(4e-4, 1.5, 13)).unwrap();
        assert!(
            (est.lambda_hat / DISK_LAMBDA - 1.0).abs() < 0.05,
            "{}",
            est.lambda_hat
        );
    }

    #[test]
    fn start_outside_and_short_horizon_are_rejected() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let k = JumpKernel::zero(1).unwrap();
        assert!(matches!(
            estimate_lambda(&d, &k, Some(&[2.0]), 10, &cfg(1e-3, 1.0, 1)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            estimate_lambda(&d, &k, None, 200, &cfg(1e-3, 0.05, 1)),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn square_eigenvalue_dominates_the_disk() {
        let half = PI.sqrt() / 2.0;
        let sq = Domain::axis_box(vec![-half, -half], vec![half, half]).unwrap();
        let k = JumpKernel::zero(2).unwrap();
        let fk = faber_krahn_compare(&sq, &k, 20_000, &cfg(4e-4, 1.5, 14)).unwrap();
        assert!(fk.pass);
        assert!((fk.ball_radius - 1.0).abs() < 1e-12);
        assert!((fk.lambda_domain.lambda_hat / (2.0 * PI) - 1.0).abs() < 0.05);
        assert!(fk.lambda_domain.lambda_hat > fk.lambda_ball.lambda_hat);
    }

    #[test]
    fn non_decreasing_kernel_fails_the_hypothesis_by_name() {
        let profile =
            crate::kernel::RadialProfile::new(vec![0.1, 0.5, 1.0, 2.0], vec![0.1, 1.0, 0.5, 0.1])
                .unwrap();
        let k = JumpKernel::new(KernelFamily::Tabulated(profile), 2).unwrap();
        let d = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        match faber_krahn_compare(&d, &k, 10, &cfg(1e-3, 1.0, 1)) {
            Err(Error::Hypothesis(msg)) => assert!(msg.contains("radially_decreasing")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn square_survival_is_dominated_by_the_disk() {
        let sq = Domain::axis_box(vec![0.0, 0.0], vec![PI.sqrt(), PI.sqrt()]).unwrap();
        let k = JumpKernel::zero(2).unwrap();
        let rep = survival_domination_check(&sq, &k, &[0.1, 0.3, 1.0], 10_000, &cfg(4e-4, 1.0, 15))
            .unwrap();
        assert!(rep.pass, "{:?} {:?}", rep.s_domain, rep.s_ball);
        assert!(rep.s_domain[1] < rep.s_ball[1]);
    }

    #[test]
    fn identity_holds_for_the_interval_cosine() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let k = JumpKernel::zero(1).unwrap();
        let psi = |x: &[f64]| (PI * x[0] / 2.0).cos();
        let rep = eigen_identity_residual_field(
            &d,
            &k,
            &psi,
            PI * PI / 4.0,
            0.5,
            9,
            40_000,
            &cfg(1e-3, 1.0, 16),
        )
        .unwrap();
        assert!(!rep.points.is_empty());
        assert!(rep.psi_values.iter().all(|&v| v >= PSI_FLOOR));
        assert!(rep.max_relative_deviation < 0.05, "{rep:?}");
    }

    #[test]
    fn identity_rejects_t_at_or_beyond_the_horizon() {
        let d = Domain::interval(-1.0, 1.0).unwrap();
        let k = JumpKernel::zero(1).unwrap();
        let psi = |x: &[f64]| (PI * x[0] / 2.0).cos();
        let r = eigen_identity_residual_field(&d, &k, &psi, 2.0, 1.0, 5, 10, &cfg(1e-3, 1.0, 1));
        assert!(matches!(r, Err(Error::Argument(_))));
    }
}

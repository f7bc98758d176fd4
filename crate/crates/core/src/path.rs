//! Time-stepping simulation of `X = B + Y`, where `B` is Brownian motion with
//! generator `Δ` (covariance `2t·I`) and `Y` is the pure-jump process of the
//! kernel, compensated on `|y| ≤ 1`.
//!
//! Jumps above the cut radius ε are a compound Poisson process; jumps below ε
//! are either replaced by a Gaussian with covariance `Σ_ε` or dropped.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::geometry::Domain;
use crate::kernel::{BigJumpSampler, JumpKernel};
use crate::rng::path_rng;
use crate::stats::{wilson_interval, CompensatedSum, Z95};

/// Scalar field evaluated at points of `R^d`.
pub type Field<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SmallJumpMode {
    #[default]
    GaussianApprox,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub dt: f64,
    /// Small-jump cut radius; `None` picks the default from `dt`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub small_jump_mode: SmallJumpMode,
    #[serde(default)]
    pub bridge_correction: bool,
    pub t_max: f64,
    #[serde(default)]
    pub base_seed: u64,
}

impl PathConfig {
    pub fn new(dt: f64, t_max: f64, base_seed: u64) -> Self {
        Self {
            dt,
            epsilon: None,
            small_jump_mode: SmallJumpMode::GaussianApprox,
            bridge_correction: false,
            t_max,
            base_seed,
        }
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return arg(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return arg(format!("t_max must be positive, got {}", self.t_max));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return arg(format!("epsilon must lie in (0, 1], got {e}"));
            }
        }
        Ok(())
    }

    /// Number of whole steps that fit in the horizon.
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize
    }
}

/// Largest ε ≤ 1 whose small-jump variance per unit time is at most a tenth
/// of the Brownian variance `2d`, so `dt·tr Σ_ε ≤ 0.1·(2·dt·d)`.
pub fn default_epsilon(kernel: &JumpKernel) -> Result<f64> {
    if kernel.is_zero() {
        return Ok(1.0);
    }
    let budget = 0.2 * kernel.dimension() as f64;
    let tr = |e: f64| kernel.second_moment_within(e);
    if tr(1.0)? <= budget {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1e-12f64.ln(), 0.0f64);
    if tr(lo.exp())? > budget {
        return Err(Error::Numeric(
            "small-jump variance does not vanish near the origin".into(),
        ));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tr(mid.exp())? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp())
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitSample {
    pub exit_time: f64,
    /// Exit position, or the last interior position when censored.
    pub exit_location: Vec<f64>,
    /// `∫₀^τ f(X_t) dt` by the left-endpoint rule.
    pub occupation: f64,
    pub censored: bool,
}

/// Simulator with kernel-derived quantities fixed for one (domain, kernel, config).
pub struct PathSimulator<'a> {
    domain: &'a Domain,
    config: PathConfig,
    epsilon: f64,
    step_sd: f64,
    drift: Vec<f64>,
    bridge_var: f64,
    jumps: Option<(BigJumpSampler, f64)>,
}

impl<'a> PathSimulator<'a> {
    pub fn new(domain: &'a Domain, kernel: &JumpKernel, config: &PathConfig) -> Result<Self> {
        config.validate()?;
        let d = domain.dimension();
        if kernel.dimension() != d {
            return arg(format!(
                "kernel dimension {} does not match domain dimension {d}",
                kernel.dimension()
            ));
        }
        kernel.levy_integrability()?;
        let epsilon = match config.epsilon {
            Some(e) => e,
            None => default_epsilon(kernel)?,
        };
        let stats = kernel.small_jump_stats(epsilon)?;
        let small_var = match config.small_jump_mode {
            SmallJumpMode::GaussianApprox => stats.small_cov_trace() / d as f64,
            SmallJumpMode::Drop => 0.0,
        };
        let var = (2.0 + small_var) * config.dt;
        let jumps = if stats.big_rate > 0.0 {
            Some((
                BigJumpSampler::new(kernel, epsilon)?,
                stats.big_rate * config.dt,
            ))
        } else {
            None
        };
        let drift = stats
            .compensator_drift
            .iter()
            .map(|b| b * config.dt)
            .collect();
        Ok(Self {
            domain,
            config: config.clone(),
            epsilon,
            step_sd: var.sqrt(),
            drift,
            bridge_var: var,
            jumps,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn config(&self) -> &PathConfig {
        &self.config
    }

    pub fn domain(&self) -> &Domain {
        self.domain
    }

    /// Simulates one path on stream `stream` of the configured base seed.
    pub fn simulate_exit(&self, x0: &[f64], f: Option<Field>, stream: u64) -> Result<ExitSample> {
        if x0.len() != self.domain.dimension() {
            return arg("start point has the wrong dimension");
        }
        if !self.domain.contains(x0) {
            return arg(format!("start point {x0:?} is not inside the domain"));
        }
        let mut rng = path_rng(self.config.base_seed, stream);
        let dt = self.config.dt;
        let d = x0.len();
        let mut x = x0.to_vec();
        let mut prev = x0.to_vec();
        let mut jump = vec![0.0; d];
        let mut occ = CompensatedSum::new();
        let n_steps = self.config.n_steps();
        for k in 0..n_steps {
            if let Some(f) = f {
                let v = f(&x);
                if !v.is_finite() {
                    return Err(Error::Data(format!("running cost is not finite at {x:?}")));
                }
                occ.add(v * dt);
            }
            let t_end = (k + 1) as f64 * dt;
            let exit = |loc: Vec<f64>, occ: &CompensatedSum| ExitSample {
                exit_time: t_end,
                exit_location: loc,
                occupation: occ.value(),
                censored: false,
            };
            prev.copy_from_slice(&x);
            for (xi, drift) in x.iter_mut().zip(&self.drift).take(d) {
                let z: f64 = rng.sample(StandardNormal);
                *xi += self.step_sd * z - drift;
            }
            if !self.domain.contains(&x) {
                return Ok(exit(x, &occ));
            }
            if self.config.bridge_correction {
                // drawn on every step so both coupled runs stay in lockstep
                let u: f64 = rng.random();
                if let Some(p) = self
                    .domain
                    .bridge_exit_probability(&prev, &x, self.bridge_var)
                {
                    if u < p {
                        return Ok(exit(self.domain.nearest_exterior_point(&x), &occ));
                    }
                }
            }
            if let Some((sampler, mean)) = &self.jumps {
                let n = poisson(*mean, &mut rng);
                for _ in 0..n {
                    sampler.sample_into(&mut rng, &mut jump);
                    for i in 0..d {
                        x[i] += jump[i];
                    }
                    if !self.domain.contains(&x) {
                        return Ok(exit(x, &occ));
                    }
                }
            }
        }
        Ok(ExitSample {
            exit_time: self.config.t_max,
            exit_location: x,
            occupation: occ.value(),
            censored: true,
        })
    }

    /// Runs streams `first_stream .. first_stream + n` in parallel, in stream order.
    pub fn run_paths(
        &self,
        x0: &[f64],
        f: Option<Field>,
        n: usize,
        first_stream: u64,
    ) -> Result<Vec<ExitSample>> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| self.simulate_exit(x0, f, first_stream + i))
            .collect()
    }
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean > 30.0 {
        return Poisson::new(mean)
            .map(|p| p.sample(rng) as u64)
            .unwrap_or(0);
    }
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf && k < 1000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

/// Single-path entry point; see [`PathSimulator::simulate_exit`].
pub fn simulate_exit(
    domain: &Domain,
    x0: &[f64],
    f: Option<Field>,
    kernel: &JumpKernel,
    config: &PathConfig,
    path_index: u64,
) -> Result<ExitSample> {
    PathSimulator::new(domain, kernel, config)?.simulate_exit(x0, f, path_index)
}

/// Empirical survival function `Ŝ(t) = P(τ > t)` with 95% Wilson intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub t: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub survivors: Vec<usize>,
    pub n_paths: usize,
    pub censored_count: usize,
}

impl SurvivalCurve {
    /// Builds the curve from per-path exit records; censored paths survive every grid time.
    pub fn from_samples(samples: &[ExitSample], t_grid: &[f64]) -> Result<Self> {
        if t_grid.is_empty() {
            return arg("t_grid is empty");
        }
        if t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
            return arg("t_grid must be positive and strictly increasing");
        }
        let mut times: Vec<f64> = samples
            .iter()
            .filter(|s| !s.censored)
            .map(|s| s.exit_time)
            .collect();
        times.sort_by(|a, b| a.total_cmp(b));
        let n = samples.len();
        let censored_count = n - times.len();
        let mut out = Self {
            t: t_grid.to_vec(),
            s_hat: Vec::new(),
            ci_lo: Vec::new(),
            ci_hi: Vec::new(),
            survivors: Vec::new(),
            n_paths: n,
            censored_count,
        };
        for &t in t_grid {
            let exited = times.partition_point(|&e| e <= t);
            let alive = n - exited;
            let (lo, hi) = wilson_interval(alive, n, Z95);
            out.survivors.push(alive);
            out.s_hat.push(alive as f64 / n.max(1) as f64);
            out.ci_lo.push(lo);
            out.ci_hi.push(hi);
        }
        Ok(out)
    }

    /// Binomial variance of each `Ŝ(t)`.
    pub fn variance(&self) -> Vec<f64> {
        self.s_hat
            .iter()
            .map(|s| s * (1.0 - s) / self.n_paths.max(1) as f64)
            .collect()
    }
}

/// Simulates `n_paths` from `x0` and tabulates the survival function on `t_grid`.
pub fn survival_curve(
    domain: &Domain,
    x0: &[f64],
    kernel: &JumpKernel,
    t_grid: &[f64],
    n_paths: usize,
    config: &PathConfig,
) -> Result<SurvivalCurve> {
    if t_grid.is_empty() {
        return arg("t_grid is empty");
    }
    if t_grid.last().copied().unwrap_or(0.0) > config.t_max * (1.0 + 1e-12) {
        return arg("t_grid extends beyond t_max");
    }
    let sim = PathSimulator::new(domain, kernel, config)?;
    let samples = sim.run_paths(x0, None, n_paths, 0)?;
    SurvivalCurve::from_samples(&samples, t_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use crate::stats::{ks_statistic, mean_and_se};
    use std::f64::consts::PI;

    fn disk() -> Domain {
        Domain::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn zero_cost_gives_zero_occupation() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-3, 10.0, 1);
        let zero = |_: &[f64]| 0.0;
        let dom = disk();
        let sim = PathSimulator::new(&dom, &k, &cfg).unwrap();
        for s in sim.run_paths(&[0.2, 0.1], Some(&zero), 50, 0).unwrap() {
            assert_eq!(s.occupation, 0.0);
            assert!(!s.censored);
            assert!(!disk().contains(&s.exit_location));
        }
    }

    #[test]
    fn horizon_shorter_than_step_censors_immediately() {
        let k = JumpKernel::fractional(0.5, 2).unwrap();
        let cfg = PathConfig::new(1e-2, 1e-3, 1);
        let s = simulate_exit(&disk(), &[0.0, 0.0], None, &k, &cfg, 0).unwrap();
        assert!(s.censored);
        assert_eq!(s.exit_time, 1e-3);
        assert_eq!(s.exit_location, vec![0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-2, 1.0, 1);
        assert!(matches!(
            simulate_exit(&disk(), &[1.5, 0.0], None, &k, &cfg, 0),
            Err(Error::Argument(_))
        ));
        let bad = |_: &[f64]| f64::NAN;
        assert!(matches!(
            simulate_exit(&disk(), &[0.0, 0.0], Some(&bad), &k, &cfg, 0),
            Err(Error::Data(_))
        ));
        let div = JumpKernel::fractional(1.0, 2).unwrap();
        assert!(simulate_exit(&disk(), &[0.0, 0.0], None, &div, &cfg, 0).is_err());
        assert!(PathSimulator::new(&disk(), &k, &PathConfig::new(0.0, 1.0, 0)).is_err());
    }

    #[test]
    fn deterministic_per_stream_and_order_free() {
        let k = JumpKernel::fractional(0.5, 2).unwrap();
        let cfg = PathConfig::new(1e-3, 5.0, 42).with_bridge(true);
        let dom = disk();
        let sim = PathSimulator::new(&dom, &k, &cfg).unwrap();
        let one = |x: &[f64]| 1.0 + x[0];
        let all = sim.run_paths(&[0.1, 0.0], Some(&one), 64, 100).unwrap();
        for i in [0usize, 17, 63] {
            let again = sim
                .simulate_exit(&[0.1, 0.0], Some(&one), 100 + i as u64)
                .unwrap();
            assert_eq!(all[i], again);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let threaded = pool.install(|| sim.run_paths(&[0.1, 0.0], Some(&one), 64, 100).unwrap());
        assert_eq!(all, threaded);
    }

    #[test]
    fn default_epsilon_matches_variance_budget() {
        // d=1, s=1/2: tr Σ_ε = 2ε, budget 0.2
        let k = JumpKernel::fractional(0.5, 1).unwrap();
        assert!((default_epsilon(&k).unwrap() - 0.1).abs() < 1e-9);
        let bump = JumpKernel::new(KernelFamily::CompactBump { r_pos: 0.1 }, 2).unwrap();
        assert_eq!(default_epsilon(&bump).unwrap(), 1.0);
    }

    #[test]
    fn nested_domains_order_exit_times_pathwise() {
        let small = Domain::ball(vec![0.0, 0.0], 0.7).unwrap();
        let big = disk();
        let k = JumpKernel::fractional(0.6, 2).unwrap();
        for bridge in [false, true] {
            let cfg = PathConfig::new(1e-3, 5.0, 9).with_bridge(bridge);
            let a = PathSimulator::new(&small, &k, &cfg)
                .unwrap()
                .run_paths(&[0.1, 0.2], None, 300, 0)
                .unwrap();
            let b = PathSimulator::new(&big, &k, &cfg)
                .unwrap()
                .run_paths(&[0.1, 0.2], None, 300, 0)
                .unwrap();
            for (s, l) in a.iter().zip(&b) {
                assert!(s.exit_time <= l.exit_time);
            }
        }
    }

    #[test]
    fn brownian_exit_from_center_is_uniform_on_circle() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-4, 10.0, 5).with_bridge(true);
        let dom = disk();
        let sim = PathSimulator::new(&dom, &k, &cfg).unwrap();
        let angles: Vec<f64> = sim
            .run_paths(&[0.0, 0.0], None, 4000, 0)
            .unwrap()
            .iter()
            .map(|s| (s.exit_location[1].atan2(s.exit_location[0]) + PI) / (2.0 * PI))
            .collect();
        // critical value at the 1% level is 1.63/√n
        let ks = ks_statistic(&angles, |u| u.clamp(0.0, 1.0));
        assert!(ks < 1.63 / (4000f64).sqrt(), "KS {ks}");
    }

    #[test]
    fn brownian_occupation_on_disk() {
        let k = JumpKernel::zero(2).unwrap();
        let cfg = PathConfig::new(1e-4, 10.0, 11).with_bridge(true);
        let one = |_: &[f64]| 1.0;
        let dom = disk();
        let sim = PathSimulator::new(&dom, &k, &cfg).unwrap();
        let occ: Vec<f64> = sim
            .run_paths(&[0.0, 0.0], Some(&one), 20_000, 0)
            .unwrap()
            .iter()
            .map(|s| s.occupation)
            .collect();
        let (m, se) = mean_and_se(&occ);
        // √dt bias allowance on top of sampling noise
        assert!(
            (m - 0.25).abs() < 3.0 * se + 2.0 * 1e-2 * 0.25,
            "{m} ± {se}"
        );
    }

    #[test]
    fn survival_curve_properties() {
        let k = JumpKernel::zero(1).unwrap();
        let dom = Domain::interval(-1.0, 1.0).unwrap();
        let cfg = PathConfig::new(1e-3, 3.0, 3).with_bridge(true);
        let grid: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let c = survival_curve(&dom, &[0.0], &k, &grid, 20_000, &cfg).unwrap();
        assert!(c.s_hat.windows(2).all(|w| w[1] <= w[0]));
        assert!(c
            .s_hat
            .iter()
            .zip(&c.ci_lo)
            .zip(&c.ci_hi)
            .all(|((s, lo), hi)| lo <= s && s <= hi));
        let early = survival_curve(&dom, &[0.0], &k, &[0.005], 2000, &cfg).unwrap();
        assert!(early.s_hat[0] > 0.99);
        // slope of log Ŝ over [0.5, 2] against −π²/4
        let (i0, i1) = (4, 19);
        let slope = (c.s_hat[i1].ln() - c.s_hat[i0].ln()) / (grid[i1] - grid[i0]);
        assert!(
            (slope + PI * PI / 4.0).abs() < 0.1 * PI * PI / 4.0,
            "slope {slope}"
        );
        assert!(survival_curve(&dom, &[0.0], &k, &[], 10, &cfg).is_err());
        assert!(survival_curve(&dom, &[0.0], &k, &[4.0], 10, &cfg).is_err());
    }

    #[test]
    fn poisson_inversion_mean_and_variance() {
        let mut rng = path_rng(1, 1);
        for mean in [0.05, 2.0, 45.0] {
            let draws: Vec<f64> = (0..50_000)
                .map(|_| poisson(mean, &mut rng) as f64)
                .collect();
            let (m, se) = mean_and_se(&draws);
            assert!((m - mean).abs() < 4.0 * se, "{mean}: {m}");
        }
    }
}

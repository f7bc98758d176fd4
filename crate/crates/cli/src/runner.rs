//! Executes one experiment and writes `summary.json` plus CSV data files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use mixop_core::dirichlet::{abp_ratio, solve_at_points, start_lattice};
use mixop_core::eigen::{
    eigen_identity_residual, estimate_lambda, faber_krahn_compare, survival_domination_check,
};
use mixop_core::grid::{
    narrow_domain_scan, principal_eigenpair, solve_dirichlet, solve_semilinear, symmetry_check,
    GridFunction, GridOperator,
};
use mixop_core::path::default_epsilon;
use mixop_core::{Domain, SurvivalCurve};

use crate::config::{amplitude, nonlinearity, ExperimentConfig, Kind};
use crate::error::CliError;

pub const DEFAULT_OUT_DIR: &str = "out";
const DEFAULT_SOLVE_TOL: f64 = 0.0;
const DEFAULT_EIGEN_TOL: f64 = 0.05;
const DEFAULT_AGREEMENT_TOL: f64 = 0.02;
const DEFAULT_IDENTITY_TOL: f64 = 0.1;
const DEFAULT_SYMMETRY_TOL: f64 = 0.02;
const DEFAULT_ABP_LATTICE: usize = 5;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's `output` directory.
    pub out_dir: Option<PathBuf>,
    /// Overrides the config's `seed`.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub summary: Value,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Human-readable result lines.
    pub report: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<&'static str, &'static str>,
}

struct Artifacts {
    dir: PathBuf,
    header: String,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = self.header.clone();
        text.push_str(body);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        columns: &[String],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut body = columns.join(",");
        body.push('\n');
        for r in rows {
            body.push_str(&r.join(","));
            body.push('\n');
        }
        self.write(name, &body)
    }

    fn grid_function(&mut self, name: &str, u: &GridFunction) -> Result<(), CliError> {
        let mut buf = Vec::new();
        u.write_csv(&mut buf)
            .map_err(|e| CliError::io(self.dir.join(name), e))?;
        self.write(name, &String::from_utf8_lossy(&buf))
    }

    fn survival(&mut self, name: &str, c: &SurvivalCurve) -> Result<(), CliError> {
        let rows: Vec<Vec<String>> = (0..c.t.len())
            .map(|i| {
                vec![
                    num(c.t[i]),
                    num(c.s_hat[i]),
                    num(c.ci_lo[i]),
                    num(c.ci_hi[i]),
                    c.survivors[i].to_string(),
                ]
            })
            .collect();
        self.csv(
            name,
            &cols(&["t", "s_hat", "ci_lo", "ci_hi", "survivors"]),
            &rows,
        )
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn coord_cols(d: usize, rest: &[&str]) -> Vec<String> {
    (1..=d)
        .map(|k| format!("x{k}"))
        .chain(rest.iter().map(|s| s.to_string()))
        .collect()
}

fn json_of<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn without_nulls(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.retain(|_, x| !x.is_null());
    }
    v
}

#[derive(Default)]
struct KindResult {
    results: BTreeMap<String, Value>,
    verdicts: BTreeMap<String, bool>,
    report: Vec<String>,
}

impl KindResult {
    fn put(&mut self, key: &str, v: Value) {
        self.results.insert(key.to_string(), v);
    }

    fn verdict(&mut self, key: &str, pass: bool) {
        self.verdicts.insert(key.to_string(), pass);
    }

    fn line(&mut self, s: String) {
        self.report.push(s);
    }
}

pub fn config_hash(raw: &[u8]) -> String {
    hex::encode(Sha256::digest(raw))
}

pub fn provenance(raw: &[u8], seed: u64) -> Provenance {
    let mut versions = BTreeMap::new();
    versions.insert("mixop-core", mixop_core::VERSION);
    versions.insert("mixop-cli", env!("CARGO_PKG_VERSION"));
    Provenance {
        config_sha256: config_hash(raw),
        seed,
        versions,
    }
}

pub fn run_file(path: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let raw = fs::read(path).map_err(|e| CliError::io(path, e))?;
    run_bytes(&raw, opts)
}

/// Parses, runs and writes artifacts for one config document.
pub fn run_bytes(raw: &[u8], opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut cfg = ExperimentConfig::from_json(raw)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let prov = provenance(raw, cfg.seed);
    let mut art = Artifacts {
        dir: out_dir.clone(),
        header: format!(
            "# config_sha256={} seed={}\n",
            prov.config_sha256, prov.seed
        ),
        files: Vec::new(),
    };

    let result = match cfg.kind {
        Kind::Solve => run_solve(&cfg, &mut art)?,
        Kind::Eigen => run_eigen(&cfg, &mut art)?,
        Kind::FaberKrahn => run_faber_krahn(&cfg, &mut art)?,
        Kind::Survival => run_survival(&cfg, &mut art)?,
        Kind::CrossValidate => run_cross_validate(&cfg, &mut art)?,
        Kind::ValidateKernel => run_validate_kernel(&cfg, &mut art)?,
        Kind::NarrowDomain => run_narrow(&cfg, &mut art)?,
        Kind::Symmetry => run_symmetry(&cfg, &mut art)?,
    };

    let pass = result.verdicts.values().all(|&v| v);
    let file_names: Vec<String> = art
        .files
        .iter()
        .map(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
        .collect();
    let summary = json!({
        "kind": cfg.kind.name(),
        "provenance": json_of(&prov),
        "config": without_nulls(json_of(&cfg)),
        "pass": pass,
        "verdicts": json_of(&result.verdicts),
        "results": json_of(&result.results),
        "files": file_names,
    });
    let summary_path = out_dir.join("summary.json");
    let mut text =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(&summary_path, text).map_err(|e| CliError::io(&summary_path, e))?;
    let mut files = art.files;
    files.push(summary_path);

    let mut report = result.report;
    for (k, v) in &result.verdicts {
        report.push(format!("verdict {k}: {}", if *v { "pass" } else { "FAIL" }));
    }
    Ok(Outcome {
        pass,
        summary,
        out_dir,
        files,
        report,
    })
}

fn starts(
    cfg: &ExperimentConfig,
    domain: &Domain,
    default_lattice: Option<usize>,
) -> Result<Vec<Vec<f64>>, CliError> {
    let pc = cfg.path_config()?;
    let pts = if let Some(p) = &cfg.points {
        p.clone()
    } else if let Some(n) = cfg.lattice.or(default_lattice) {
        start_lattice(domain, n, &pc)
    } else {
        vec![domain.centroid().to_vec()]
    };
    if pts.is_empty() {
        return Err(CliError::Config("no start points inside the domain".into()));
    }
    let d = domain.dimension();
    for p in &pts {
        if p.len() != d || !domain.contains(p) {
            return Err(CliError::Config(format!(
                "start point {p:?} is not an interior point of the domain"
            )));
        }
    }
    Ok(pts)
}

fn run_solve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let pc = cfg.path_config()?;
    let f = cfg.field("f")?;
    let g = cfg
        .field("g")?
        .ok_or_else(|| CliError::Config("missing field `g`".into()))?;
    let ff = |x: &[f64]| f.as_ref().map_or(0.0, |e| e.eval_point(x));
    let gf = |x: &[f64]| g.eval_point(x);
    let pts = starts(cfg, &domain, None)?;
    let est = solve_at_points(
        &domain,
        f.as_ref().map(|_| &ff as _),
        &gf,
        &pts,
        &kernel,
        cfg.n_paths(),
        &pc,
    )?;

    let mut out = KindResult::default();
    let tol = cfg.rel_tol.unwrap_or(DEFAULT_SOLVE_TOL);
    let mut rows = Vec::new();
    let mut all_ok = true;
    for (x, e) in pts.iter().zip(&est) {
        let mut row: Vec<String> = x.iter().map(|c| num(*c)).collect();
        row.extend([e.mean, e.std_error, e.ci95.0, e.ci95.1].map(num));
        row.push(e.censored_count.to_string());
        row.push(num(e.censoring_bias_bound));
        rows.push(row);
        let mut line = format!(
            "u({x:?}) = {:.6} ± {:.6} (censored {})",
            e.mean, e.std_error, e.censored_count
        );
        if let Some(target) = cfg.expected {
            let ok = (e.mean - target).abs() <= (3.0 * e.std_error).max(tol * target.abs());
            all_ok &= ok;
            let _ = write!(line, " expected {target}");
        }
        out.line(line);
    }
    art.csv(
        "solve.csv",
        &coord_cols(
            domain.dimension(),
            &[
                "mean",
                "std_error",
                "ci_lo",
                "ci_hi",
                "censored_count",
                "censoring_bias_bound",
            ],
        ),
        &rows,
    )?;
    out.put("points", json_of(&pts));
    out.put("estimates", json_of(&est));
    if cfg.expected.is_some() {
        out.verdict("matches_expected", all_ok);
    }
    if let Some(p) = cfg.p {
        let Some(_) = &f else {
            return Err(CliError::Config("`p` needs a source term `f`".into()));
        };
        let n = cfg.lattice.unwrap_or(DEFAULT_ABP_LATTICE);
        let abp = abp_ratio(&domain, &ff, p, &kernel, n, cfg.n_paths(), &pc)?;
        let rows: Vec<Vec<String>> = abp
            .starts
            .iter()
            .zip(&abp.estimates)
            .map(|(x, e)| {
                let mut row: Vec<String> = x.iter().map(|c| num(*c)).collect();
                row.extend([e.mean, e.std_error].map(num));
                row
            })
            .collect();
        art.csv(
            "abp.csv",
            &coord_cols(domain.dimension(), &["mean", "std_error"]),
            &rows,
        )?;
        out.line(format!(
            "sup u ≈ {:.6} at {:?}, ‖f‖_L{p} = {:.6}, ratio {:.6} (zero exterior data)",
            abp.sup_u_estimate, abp.argmax, abp.lp_norm_f, abp.ratio
        ));
        let mut v = json_of(&abp);
        if let Value::Object(m) = &mut v {
            m.remove("starts");
            m.remove("estimates");
        }
        out.put("abp", v);
    }
    Ok(out)
}

fn eigen_json(e: &mixop_core::EigenEstimate) -> Value {
    let mut v = json_of(e);
    if let Value::Object(m) = &mut v {
        m.remove("curve");
    }
    v
}

fn run_eigen(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let pc = cfg.path_config()?;
    let x0 = cfg.points.as_ref().and_then(|p| p.first().cloned());
    let est = estimate_lambda(&domain, &kernel, x0.as_deref(), cfg.n_paths(), &pc)?;
    art.survival("survival.csv", &est.curve)?;

    let mut out = KindResult::default();
    let tol = cfg.rel_tol.unwrap_or(DEFAULT_EIGEN_TOL);
    out.line(format!(
        "lambda_mc = {:.5} ci95 [{:.5}, {:.5}] window [{:.4}, {:.4}] r2 {:.5}",
        est.lambda_hat, est.ci95.0, est.ci95.1, est.fit_window.0, est.fit_window.1, est.fit_r2
    ));
    out.put("monte_carlo", eigen_json(&est));
    if let Some(target) = cfg.expected {
        out.verdict(
            "mc_matches_expected",
            (est.lambda_hat / target - 1.0).abs() <= tol,
        );
    }
    if cfg.h.is_some() {
        let op = GridOperator::assemble(&domain, &kernel, None, cfg.h(), cfg.r_max, 0.0)?;
        let pair = principal_eigenpair(&op)?;
        art.grid_function("eigenfunction.csv", &pair.psi)?;
        out.line(format!(
            "lambda_grid = {:.6} (h = {}, {} nodes)",
            pair.lambda,
            cfg.h(),
            op.n_interior()
        ));
        out.put(
            "grid",
            json!({"lambda": pair.lambda, "h": cfg.h(), "nodes": op.n_interior(), "iterations": pair.iterations,
                   "residual": pair.residual, "kappa_tail": op.kappa_tail()}),
        );
        if let Some(target) = cfg.expected {
            out.verdict(
                "grid_matches_expected",
                (pair.lambda / target - 1.0).abs() <= tol,
            );
        }
    }
    Ok(out)
}

fn run_faber_krahn(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let pc = cfg.path_config()?;
    let fk = faber_krahn_compare(&domain, &kernel, cfg.n_paths(), &pc)?;
    art.survival("survival_domain.csv", &fk.lambda_domain.curve)?;
    art.survival("survival_ball.csv", &fk.lambda_ball.curve)?;
    let mut out = KindResult::default();
    out.line(format!(
        "lambda_D = {:.5} ± {:.5}, lambda_B = {:.5} ± {:.5} (ball radius {:.5})",
        fk.lambda_domain.lambda_hat,
        fk.lambda_domain.half_width(),
        fk.lambda_ball.lambda_hat,
        fk.lambda_ball.half_width(),
        fk.ball_radius
    ));
    out.put("lambda_domain", eigen_json(&fk.lambda_domain));
    out.put("lambda_ball", eigen_json(&fk.lambda_ball));
    out.put("ball_radius", json!(fk.ball_radius));
    out.verdict("ball_minimizes", fk.pass);
    Ok(out)
}

fn run_survival(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let pc = cfg.path_config()?;
    let t_grid = cfg.t_grid.clone().unwrap_or_default();
    let rep = survival_domination_check(&domain, &kernel, &t_grid, cfg.n_paths(), &pc)?;
    let rows: Vec<Vec<String>> = (0..rep.t.len())
        .map(|i| {
            vec![
                num(rep.t[i]),
                num(rep.s_domain[i]),
                num(rep.s_ball[i]),
                num(rep.joint_std_error[i]),
                (rep.pass_per_t[i] as u8).to_string(),
            ]
        })
        .collect();
    art.csv(
        "domination.csv",
        &cols(&["t", "s_domain", "s_ball", "joint_std_error", "pass"]),
        &rows,
    )?;
    let mut out = KindResult::default();
    for i in 0..rep.t.len() {
        out.line(format!(
            "t = {}: S_D = {:.4}, S_B = {:.4}",
            rep.t[i], rep.s_domain[i], rep.s_ball[i]
        ));
    }
    out.put(
        "domination",
        json!({"t": rep.t, "s_domain": rep.s_domain, "s_ball": rep.s_ball,
               "joint_std_error": rep.joint_std_error, "pass_per_t": rep.pass_per_t}),
    );
    out.verdict("ball_survives_longer", rep.pass);
    Ok(out)
}

fn run_cross_validate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let pc = cfg.path_config()?;
    let f = cfg.field("f")?;
    let g = cfg
        .field("g")?
        .ok_or_else(|| CliError::Config("missing field `g`".into()))?;
    let ff = |x: &[f64]| f.as_ref().map_or(0.0, |e| e.eval_point(x));
    let gf = |x: &[f64]| g.eval_point(x);
    let default_lattice = if domain.dimension() == 1 { 9 } else { 3 };
    let pts = starts(cfg, &domain, Some(default_lattice))?;

    let op = GridOperator::assemble(&domain, &kernel, None, cfg.h(), cfg.r_max, 0.0)?;
    let (u, _) = solve_dirichlet(&op, &ff, &gf)?;
    art.grid_function("grid_solution.csv", &u)?;
    let mc = solve_at_points(&domain, Some(&ff), &gf, &pts, &kernel, cfg.n_paths(), &pc)?;

    let tol = cfg.rel_tol.unwrap_or(DEFAULT_AGREEMENT_TOL);
    let mut out = KindResult::default();
    let mut rows = Vec::new();
    let mut agree = true;
    for (x, e) in pts.iter().zip(&mc) {
        let grid = u.interpolate(x);
        let allowed = tol * grid.abs() + e.half_width();
        let ok = (e.mean - grid).abs() <= allowed;
        agree &= ok;
        let mut row: Vec<String> = x.iter().map(|c| num(*c)).collect();
        row.extend([grid, e.mean, e.std_error, e.mean - grid, allowed].map(num));
        row.push((ok as u8).to_string());
        rows.push(row);
        out.line(format!(
            "x = {x:?}: grid {grid:.5}, mc {:.5} ± {:.5}",
            e.mean,
            e.half_width()
        ));
    }
    art.csv(
        "cross_validate.csv",
        &coord_cols(
            domain.dimension(),
            &[
                "grid",
                "mc_mean",
                "mc_std_error",
                "difference",
                "allowed",
                "pass",
            ],
        ),
        &rows,
    )?;
    out.put("points", json_of(&pts));
    out.put(
        "grid_values",
        json!(pts.iter().map(|x| u.interpolate(x)).collect::<Vec<_>>()),
    );
    out.put("mc", json_of(&mc));
    out.put(
        "grid",
        json!({"h": cfg.h(), "nodes": op.n_interior(), "kappa_tail": op.kappa_tail()}),
    );
    out.verdict("grid_mc_agree", agree);

    if let Some(t) = cfg.identity_t {
        let pair = principal_eigenpair(&op)?;
        let rep = eigen_identity_residual(
            &domain,
            &kernel,
            &pair.psi,
            pair.lambda,
            t,
            cfg.lattice.unwrap_or(default_lattice),
            cfg.n_paths(),
            &pc,
        )?;
        let rows: Vec<Vec<String>> = (0..rep.points.len())
            .map(|i| {
                let mut r: Vec<String> = rep.points[i].iter().map(|c| num(*c)).collect();
                let e = &rep.estimates[i];
                r.extend(
                    [
                        rep.psi_values[i],
                        e.mean,
                        e.std_error,
                        rep.relative_deviation[i],
                    ]
                    .map(num),
                );
                r
            })
            .collect();
        art.csv(
            "eigen_identity.csv",
            &coord_cols(
                domain.dimension(),
                &["psi", "estimate", "std_error", "relative_deviation"],
            ),
            &rows,
        )?;
        let tol = cfg.identity_tol.unwrap_or(DEFAULT_IDENTITY_TOL);
        out.line(format!(
            "eigen identity at t = {t}: lambda_grid {:.5}, max relative deviation {:.4}",
            pair.lambda, rep.max_relative_deviation
        ));
        out.put(
            "eigen_identity",
            json!({"t": t, "lambda": pair.lambda, "max_relative_deviation": rep.max_relative_deviation,
                   "max_relative_std_error": rep.max_relative_std_error, "points": rep.points.len()}),
        );
        out.verdict("eigen_identity", rep.max_relative_deviation <= tol);
    }
    Ok(out)
}

fn run_validate_kernel(
    cfg: &ExperimentConfig,
    art: &mut Artifacts,
) -> Result<KindResult, CliError> {
    let kernel = cfg.kernel()?;
    let d = kernel.dimension();
    let radii = cfg.radii.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
    let integ = kernel.levy_integrability()?;
    let a1 = kernel.check_a1(&radii, None)?;
    let mut rows = Vec::new();
    let mut symbols = Vec::new();
    for &r in &radii {
        let mut z = vec![0.0; d];
        z[0] = r;
        let s = kernel.symbol(&z)?;
        rows.push(vec![num(r), num(s.re), num(s.im)]);
        symbols.push(json!({"radius": r, "re": s.re, "im": s.im}));
    }
    art.csv("symbol.csv", &cols(&["radius", "re", "im"]), &rows)?;
    let mut out = KindResult::default();
    out.line(format!(
        "integrability = {} (near {}, tail {})",
        integ.value, integ.near, integ.tail
    ));
    out.line(format!(
        "sector check: {}",
        if a1.pass { "pass" } else { "fail" }
    ));
    out.put("integrability", json_of(&integ));
    out.put("symbol_sector", json_of(&a1));
    out.put("symbol", Value::Array(symbols));
    out.put(
        "flags",
        json!({"isotropic": kernel.is_isotropic(), "radially_decreasing": kernel.is_radially_decreasing(),
               "symmetric": kernel.is_symmetric(), "positivity_radius": kernel.positivity_radius()}),
    );
    if !kernel.is_zero() {
        let eps = match cfg.epsilon {
            Some(e) => e,
            None => default_epsilon(&kernel)?,
        };
        out.put("small_jumps", json_of(&kernel.small_jump_stats(eps)?));
    }
    out.verdict("symbol_sector", a1.pass);
    Ok(out)
}

fn run_narrow(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let kernel = cfg.kernel()?;
    let c = cfg.c.unwrap_or_default();
    let widths = cfg.widths.clone().unwrap_or_default();
    let rep = narrow_domain_scan(&kernel, c, &widths, cfg.h(), cfg.r_max)?;
    let rows: Vec<Vec<String>> = rep
        .widths
        .iter()
        .zip(&rep.max_u)
        .map(|(w, m)| vec![num(*w), num(*m)])
        .collect();
    art.csv("narrow.csv", &cols(&["width", "max_u"]), &rows)?;
    let mut out = KindResult::default();
    match rep.threshold {
        Some(t) => out.line(format!("u ≤ 0 for every width up to {t} (c = {c})")),
        None => out.line(format!("no tested width keeps u ≤ 0 (c = {c})")),
    }
    out.put("narrow", json_of(&rep));
    out.verdict("threshold_found", rep.threshold.is_some());
    Ok(out)
}

fn run_symmetry(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<KindResult, CliError> {
    let domain = cfg.domain()?;
    let kernel = cfg.kernel()?;
    let src = cfg.nonlinearity.clone().unwrap_or_default();
    let expr = nonlinearity(&src)?;
    let op = GridOperator::assemble(&domain, &kernel, None, cfg.h(), cfg.r_max, 0.0)?;
    let pair = principal_eigenpair(&op)?;
    let lambda = pair.lambda;
    let f = |u: f64| expr.eval(&[u, lambda]);
    let df = |u: f64| {
        let step = 1e-6 * u.abs().max(1.0);
        (f(u + step) - f(u - step)) / (2.0 * step)
    };
    let amp = match &cfg.amplitude {
        Some(src) => amplitude(src)?.eval(&[lambda]),
        None => 1.0,
    };
    let init: Vec<f64> = pair.psi.values.iter().map(|v| amp * v).collect();
    let sol = solve_semilinear(&op, &f, &df, &init)?;
    art.grid_function("solution.csv", &sol.u)?;
    let min_u = sol.u.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let rep = symmetry_check(
        &domain,
        &sol.u,
        cfg.tolerance.unwrap_or(DEFAULT_SYMMETRY_TOL),
    )?;
    let mut out = KindResult::default();
    out.line(format!(
        "Newton: {} iterations, residual {:.2e}; min u = {:.4e}, max u = {:.4}",
        sol.iterations,
        sol.residual,
        min_u,
        sol.u.max_abs()
    ));
    out.line(format!(
        "radial deviation {:.4}, decreasing profile: {}",
        rep.max_deviation, rep.strictly_decreasing
    ));
    out.put("lambda_grid", json!(lambda));
    out.put(
        "newton",
        json!({"iterations": sol.iterations, "residual": sol.residual, "min_u": min_u, "max_u": sol.u.max_abs()}),
    );
    out.put("symmetry", json_of(&rep));
    out.verdict("positive", min_u > 0.0);
    out.verdict("radial", rep.pass);
    Ok(out)
}

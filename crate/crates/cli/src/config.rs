//! Experiment configuration: one JSON document per experiment.

use serde::{Deserialize, Serialize};

use mixop_core::{Domain, JumpKernel, KernelFamily, PathConfig, Shape};

use crate::error::CliError;
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Solve,
    Eigen,
    FaberKrahn,
    Survival,
    CrossValidate,
    ValidateKernel,
    NarrowDomain,
    Symmetry,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Solve,
        Kind::Eigen,
        Kind::FaberKrahn,
        Kind::Survival,
        Kind::CrossValidate,
        Kind::ValidateKernel,
        Kind::NarrowDomain,
        Kind::Symmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Eigen => "eigen",
            Kind::FaberKrahn => "faber-krahn",
            Kind::Survival => "survival",
            Kind::CrossValidate => "cross-validate",
            Kind::ValidateKernel => "validate-kernel",
            Kind::NarrowDomain => "narrow-domain",
            Kind::Symmetry => "symmetry",
        }
    }
}

fn zero_kernel() -> KernelFamily {
    KernelFamily::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "zero_kernel")]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub domain: Option<Shape>,
    /// Dimension for kinds without a domain.
    #[serde(default)]
    pub dimension: Option<usize>,
    /// Source term, an expression in `x1..xd` and `r`.
    #[serde(default)]
    pub f: Option<String>,
    /// Exterior data, same syntax as `f`.
    #[serde(default)]
    pub g: Option<String>,
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub bridge: Option<bool>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    /// Explicit start points; otherwise a lattice or the centroid.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    /// Lattice cells per bounding-box axis for start points.
    #[serde(default)]
    pub lattice: Option<usize>,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    /// Reference value for `solve` / `eigen` verdicts.
    #[serde(default)]
    pub expected: Option<f64>,
    /// Relative tolerance for `expected` and grid/MC agreement.
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Horizon of the eigen-identity residual in `cross-validate`.
    #[serde(default)]
    pub identity_t: Option<f64>,
    #[serde(default)]
    pub identity_tol: Option<f64>,
    /// Zeroth-order coefficient for `narrow-domain`.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub widths: Option<Vec<f64>>,
    /// Symbol radii for `validate-kernel`.
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    /// `f(u)` in `Lu = f(u)` for `symmetry`; may use `u` and `lambda`
    /// (the grid principal eigenvalue).
    #[serde(default)]
    pub nonlinearity: Option<String>,
    /// Multiple of the eigenfunction used as the Newton initial guess, an
    /// expression in `lambda`.
    #[serde(default)]
    pub amplitude: Option<String>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub output: Option<String>,
}

pub const DEFAULT_N_PATHS: usize = 10_000;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 10.0;
pub const DEFAULT_H: f64 = 0.02;

impl ExperimentConfig {
    pub fn from_json(raw: &[u8]) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_slice(raw).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn missing(&self, field: &str) -> CliError {
        CliError::Schema(format!(
            "missing field `{field}` required by kind `{}`",
            self.kind.name()
        ))
    }

    /// Checks kind-specific required fields and parses every expression.
    pub fn validate(&self) -> Result<(), CliError> {
        let needs_domain = !matches!(self.kind, Kind::ValidateKernel | Kind::NarrowDomain);
        if needs_domain && self.domain.is_none() {
            return Err(self.missing("domain"));
        }
        if !needs_domain && self.domain.is_none() && self.dimension.is_none() {
            return Err(self.missing("dimension"));
        }
        match self.kind {
            Kind::Solve | Kind::CrossValidate if self.g.is_none() => return Err(self.missing("g")),
            Kind::Survival if self.t_grid.is_none() => return Err(self.missing("t_grid")),
            Kind::NarrowDomain if self.c.is_none() => return Err(self.missing("c")),
            Kind::NarrowDomain if self.widths.is_none() => return Err(self.missing("widths")),
            Kind::Symmetry if self.nonlinearity.is_none() => {
                return Err(self.missing("nonlinearity"))
            }
            _ => {}
        }
        let d = self.dim()?;
        for (name, src) in [("f", &self.f), ("g", &self.g)] {
            if let Some(s) = src {
                Expr::field(s, d).map_err(|e| CliError::Config(format!("field `{name}`: {e}")))?;
            }
        }
        if let Some(s) = &self.nonlinearity {
            nonlinearity(s)?;
        }
        if let Some(s) = &self.amplitude {
            amplitude(s)?;
        }
        self.kernel()?;
        if let Some(shape) = &self.domain {
            Domain::new(shape.clone())?;
        }
        Ok(())
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        let from_domain = self.domain.as_ref().map(shape_dimension);
        match (from_domain, self.dimension) {
            (Some(a), Some(b)) if a != b => Err(CliError::Config(format!(
                "`dimension` = {b} disagrees with the domain dimension {a}"
            ))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Err(self.missing("dimension")),
        }
    }

    pub fn kernel(&self) -> Result<JumpKernel, CliError> {
        Ok(JumpKernel::new(self.kernel.clone(), self.dim()?)?)
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        let shape = self.domain.clone().ok_or_else(|| self.missing("domain"))?;
        Ok(Domain::new(shape)?)
    }

    pub fn field(&self, which: &str) -> Result<Option<Expr>, CliError> {
        let src = match which {
            "f" => &self.f,
            "g" => &self.g,
            _ => return Err(CliError::Config(format!("no field named `{which}`"))),
        };
        src.as_ref()
            .map(|s| {
                Expr::field(s, self.dim()?)
                    .map_err(|e| CliError::Config(format!("field `{which}`: {e}")))
            })
            .transpose()
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths.unwrap_or(DEFAULT_N_PATHS)
    }

    pub fn h(&self) -> f64 {
        self.h.unwrap_or(DEFAULT_H)
    }

    pub fn path_config(&self) -> Result<PathConfig, CliError> {
        let mut cfg = PathConfig::new(
            self.dt.unwrap_or(DEFAULT_DT),
            self.t_max.unwrap_or(DEFAULT_T_MAX),
            self.seed,
        )
        .with_bridge(self.bridge.unwrap_or(true));
        if let Some(eps) = self.epsilon {
            cfg = cfg.with_epsilon(eps);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn shape_dimension(shape: &Shape) -> usize {
    match shape {
        Shape::Ball { center, .. } => center.len(),
        Shape::Box { lo, .. } => lo.len(),
        Shape::Ellipsoid { center, .. } => center.len(),
        Shape::Polytope { normals, .. } => normals.first().map_or(0, |n| n.len()),
        Shape::Interval { .. } => 1,
    }
}

/// Example JSON for each kernel family.
pub const KERNEL_EXAMPLES: &[(&str, &str)] = &[
    ("zero", r#"{"family": "zero"}"#),
    ("fractional", r#"{"family": "fractional", "s": 0.5}"#),
    (
        "truncated-fractional",
        r#"{"family": "truncated-fractional", "s": 0.5, "r_trunc": 1.0}"#,
    ),
    (
        "tempered-fractional",
        r#"{"family": "tempered-fractional", "s": 0.3, "beta": 1.0}"#,
    ),
    (
        "compact-bump",
        r#"{"family": "compact-bump", "r_pos": 0.5}"#,
    ),
    (
        "tabulated",
        r#"{"family": "tabulated", "radii": [0.1, 1.0, 10.0], "values": [100.0, 1.0, 0.001]}"#,
    ),
];

/// Example JSON for each domain shape.
pub const DOMAIN_EXAMPLES: &[(&str, &str)] = &[
    ("interval", r#"{"shape": "interval", "a": -1, "b": 1}"#),
    (
        "ball",
        r#"{"shape": "ball", "center": [0, 0], "radius": 1}"#,
    ),
    ("box", r#"{"shape": "box", "lo": [0, 0], "hi": [1, 1]}"#),
    (
        "ellipsoid",
        r#"{"shape": "ellipsoid", "center": [0, 0], "semi_axes": [2, 1]}"#,
    ),
    (
        "polytope",
        r#"{"shape": "polytope", "normals": [[-1, 0], [0, -1], [1, 1]], "offsets": [0, 0, 1]}"#,
    ),
];

pub fn amplitude(src: &str) -> Result<Expr, CliError> {
    Expr::parse(src, &["lambda"]).map_err(|e| CliError::Config(format!("field `amplitude`: {e}")))
}

pub fn nonlinearity(src: &str) -> Result<Expr, CliError> {
    Expr::parse(src, &["u", "lambda"])
        .map_err(|e| CliError::Config(format!("field `nonlinearity`: {e}")))
}

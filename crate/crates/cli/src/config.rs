//! JSON run configurations and custom problem files.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use subelliptic_core::analysis::{ConstantOptions, SobolevMode, DEFAULT_SAFETY};
use subelliptic_core::builtins::{Builtin, DEFAULT_Q, DEFAULT_SIGMA};
use subelliptic_core::mesh::{build_space, BoxDomain, DiscreteSpace};
use subelliptic_core::problem::{check_exponents, BoundaryValue, ExactSolution, ProblemSpec};
use subelliptic_core::qform::VectorFieldTuple;
use subelliptic_core::solver::{Route, SolveOptions};

use crate::error::CliError;
use crate::expr::{self, Expression};

/// Which problem to run.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProblemRef {
    /// A built-in by name.
    Builtin(String),
    /// A custom problem file, relative to the configuration file.
    Custom {
        /// Path of the problem file.
        custom: PathBuf,
    },
}

/// Cells per axis: one count for every axis, or one per axis.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Cells {
    /// Same count on every axis.
    Uniform(usize),
    /// Count per axis.
    PerAxis(Vec<usize>),
}

impl Cells {
    /// Expand to one count per axis.
    pub fn per_axis(&self, dim: usize) -> Result<Vec<usize>, CliError> {
        match self {
            Cells::Uniform(n) => Ok(vec![*n; dim]),
            Cells::PerAxis(v) if v.len() == dim => Ok(v.clone()),
            Cells::PerAxis(v) => Err(CliError::Config(format!("cells has {} entries for a {dim}D problem", v.len()))),
        }
    }
}

/// How to obtain the Sobolev constant.
#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(rename_all = "lowercase")]
pub enum SobolevChoice {
    /// Discrete lower-bound estimate.
    #[default]
    Discrete,
    /// Closed form for `Q = I` in a declared dimension `n ≥ 3`.
    Elliptic(usize),
}

/// Modifications applied to the chosen problem.
#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Replacement zeroth-order coefficient.
    #[serde(rename = "F")]
    pub f_coef: Option<String>,
    /// Set `f`, `g` and `φ` to zero.
    #[serde(default)]
    pub zero_data: bool,
    /// Boundary value expression.
    pub phi: Option<String>,
}

/// Output locations.
#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// JSON report (or CSV table for `converge`).
    pub report: Option<PathBuf>,
    /// Nodal solution CSV.
    pub csv: Option<PathBuf>,
}

fn default_quad() -> usize {
    3
}
fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}
fn default_q() -> f64 {
    DEFAULT_Q
}
fn default_safety() -> f64 {
    DEFAULT_SAFETY
}
fn default_cells() -> Cells {
    Cells::Uniform(16)
}

/// A run configuration.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Problem.
    pub problem: ProblemRef,
    /// Mesh for `check`, `solve`, `constants`.
    #[serde(default = "default_cells")]
    pub cells: Cells,
    /// Cells per axis for each level of `converge`.
    #[serde(default)]
    pub refinements: Vec<usize>,
    /// Gauss points per axis.
    #[serde(default = "default_quad")]
    pub quad_order: usize,
    /// Sobolev gain.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Coefficient exponent.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Solution route.
    #[serde(default)]
    pub route: Option<String>,
    /// Safety factor on the shift.
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Sobolev constant source.
    #[serde(default)]
    pub sobolev: SobolevChoice,
    /// Problem modifications.
    #[serde(default)]
    pub overrides: Overrides,
    /// Output files.
    #[serde(default)]
    pub output: OutputPaths,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Parse from JSON text; relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a configuration file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    /// Check the structural invariants of the configuration.
    pub fn validate(&self) -> Result<(), CliError> {
        check_exponents(self.sigma, self.q)?;
        if self.refinements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("refinements must be strictly increasing".into()));
        }
        if !(self.safety >= 1.0) || !self.safety.is_finite() {
            return Err(CliError::Config(format!("safety must be at least 1, got {}", self.safety)));
        }
        if let Some(r) = &self.route {
            r.parse::<Route>()?;
        }
        Ok(())
    }

    /// Route, defaulting to `both`.
    pub fn route(&self) -> Result<Route, CliError> {
        Ok(self.route.as_deref().unwrap_or("both").parse::<Route>()?)
    }

    /// Resolve a path relative to the configuration file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Build the problem, with overrides applied.
    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let mut spec = match &self.problem {
            ProblemRef::Builtin(name) => Builtin::from_name(name)
                .ok_or_else(|| CliError::Config(format!("unknown built-in problem {name:?}")))?
                .spec(self.sigma, self.q),
            ProblemRef::Custom { custom } => {
                let path = self.resolve(custom);
                let text = read(&path)?;
                let file: CustomProblem =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                file.build(self.sigma, self.q)?
            }
        };
        if let Some(f) = &self.overrides.f_coef {
            spec.f_coef = Expression::parse(f)?.scalar();
            spec.exact = None;
        }
        if let Some(phi) = &self.overrides.phi {
            spec.phi = Some(BoundaryValue {
                value: Expression::parse(phi)?.scalar(),
                gradient: None,
            });
            spec.exact = None;
        }
        if self.overrides.zero_data {
            spec = spec.with_zero_data();
        }
        spec.validate()?;
        Ok(spec)
    }

    /// The space for a given cells-per-axis choice.
    pub fn space_for(&self, spec: &ProblemSpec, cells: &Cells) -> Result<DiscreteSpace, CliError> {
        let per_axis = cells.per_axis(spec.dim())?;
        Ok(build_space(&spec.domain, &per_axis, self.quad_order)?)
    }

    /// The space for `check`, `solve`, `constants`.
    pub fn space(&self, spec: &ProblemSpec) -> Result<DiscreteSpace, CliError> {
        self.space_for(spec, &self.cells)
    }

    /// Constant-chain options.
    pub fn constant_options(&self) -> ConstantOptions {
        ConstantOptions {
            safety: self.safety,
            sobolev: match self.sobolev {
                SobolevChoice::Discrete => SobolevMode::DiscreteEstimate,
                SobolevChoice::Elliptic(n) => SobolevMode::EllipticFormula { declared_dim: n },
            },
        }
    }

    /// Solver options.
    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        Ok(SolveOptions {
            route: self.route()?,
            constants: self.constant_options(),
            shift_override: None,
        })
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Domain of a custom problem.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    /// Lower corner.
    pub lo: Vec<f64>,
    /// Upper corner.
    pub hi: Vec<f64>,
}

/// Exact solution of a custom problem.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExactSpec {
    /// `u`.
    pub u: String,
    /// `∇u`.
    pub grad: Vec<String>,
}

/// A problem given by coefficient expressions in `x1`, `x2`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CustomProblem {
    /// Box.
    pub domain: DomainSpec,
    /// Reference form.
    #[serde(rename = "Q")]
    pub q: Vec<Vec<String>>,
    /// Bound on `Q` over the box.
    #[serde(rename = "Q_bound", default = "one")]
    pub q_bound: f64,
    /// Principal coefficient (defaults to `Q`).
    #[serde(rename = "P", default)]
    pub p: Option<Vec<Vec<String>>>,
    /// Drift tuple.
    #[serde(rename = "R", default)]
    pub r: Vec<Vec<String>>,
    /// Adjoint-drift tuple.
    #[serde(rename = "S", default)]
    pub s: Vec<Vec<String>>,
    /// Data tuple.
    #[serde(rename = "T", default)]
    pub t: Vec<Vec<String>>,
    /// Drift coefficients.
    #[serde(rename = "H", default)]
    pub h: Vec<String>,
    /// Adjoint-drift coefficients.
    #[serde(rename = "G", default)]
    pub g_coef: Vec<String>,
    /// Zeroth-order coefficient.
    #[serde(rename = "F", default)]
    pub f_coef: Option<String>,
    /// Scalar data.
    #[serde(default)]
    pub f: Option<String>,
    /// Vector data.
    #[serde(default)]
    pub g: Vec<String>,
    /// Boundary value.
    #[serde(default)]
    pub phi: Option<String>,
    /// Exact solution.
    #[serde(default)]
    pub exact: Option<ExactSpec>,
}

fn one() -> f64 {
    1.0
}

impl CustomProblem {
    /// Compile the expressions into a problem.
    pub fn build(&self, sigma: f64, q: f64) -> Result<ProblemSpec, CliError> {
        let domain = BoxDomain::new(&self.domain.lo, &self.domain.hi)?;
        let dim = domain.dim();
        let qf = expr::matrix_field(&self.q, dim, self.q_bound, "Q")?;
        let mut spec = ProblemSpec::principal(domain, qf, sigma, q);
        if let Some(p) = &self.p {
            spec.p = expr::matrix_field(p, dim, self.q_bound, "P")?;
        }
        let tuple = |rows: &Vec<Vec<String>>, what| -> Result<VectorFieldTuple, CliError> {
            if rows.is_empty() {
                Ok(VectorFieldTuple::empty(dim))
            } else {
                expr::tuple(rows, dim, what)
            }
        };
        spec.r = tuple(&self.r, "R")?;
        spec.s = tuple(&self.s, "S")?;
        spec.t = tuple(&self.t, "T")?;
        spec.h = expr::vector(&self.h)?;
        spec.g_coef = expr::vector(&self.g_coef)?;
        spec.g = expr::vector(&self.g)?;
        if let Some(f) = &self.f_coef {
            spec.f_coef = Expression::parse(f)?.scalar();
        }
        if let Some(f) = &self.f {
            spec.f = Expression::parse(f)?.scalar();
        }
        if let Some(phi) = &self.phi {
            spec.phi = Some(BoundaryValue {
                value: Expression::parse(phi)?.scalar(),
                gradient: None,
            });
        }
        if let Some(ex) = &self.exact {
            if ex.grad.len() != dim {
                return Err(CliError::Config(format!("exact gradient needs {dim} entries")));
            }
            spec.exact = Some(ExactSolution {
                value: Expression::parse(&ex.u)?.scalar(),
                gradient: expr::vector(&ex.grad)?,
            });
        }
        spec.validate()?;
        Ok(spec)
    }
}

//! The `check`, `solve`, `converge` and `constants` subcommands.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use subelliptic_core::analysis::{certify_shift, check_hypotheses, compute_constants, ConstantsReport, HypothesisReport};
use subelliptic_core::assembly::assemble_bilinear;
use subelliptic_core::mesh::{DiscreteField, DiscreteSpace};
use subelliptic_core::problem::ProblemSpec;
use subelliptic_core::qform::Comparability;
use subelliptic_core::solver::{solve_dirichlet, SolveReport};

use crate::config::{Cells, RunConfig};
use crate::error::CliError;

/// Text produced by a command and the exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Primary output (JSON or CSV).
    pub text: String,
    /// Process exit code.
    pub code: i32,
}

/// Flattened hypothesis report for JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    /// Every check passed.
    pub passes: bool,
    /// Reasons for failure.
    pub failures: Vec<String>,
    /// Exponent condition.
    pub exponents_ok: bool,
    /// Comparability constants when they exist.
    pub comparability: Option<Comparability>,
    /// Per-row subunit verdicts and worst ratios.
    pub subunit: SubunitSummary,
    /// Negativity verdict and worst hat functional.
    pub negativity: NegativitySummary,
}

/// Subunit part of [`CheckOutput`].
#[derive(Debug, Clone, Serialize)]
pub struct SubunitSummary {
    /// Verdict per row of `R`.
    #[serde(rename = "R")]
    pub r: Vec<bool>,
    /// Verdict per row of `S`.
    #[serde(rename = "S")]
    pub s: Vec<bool>,
    /// Verdict per row of `T`.
    #[serde(rename = "T")]
    pub t: Vec<bool>,
    /// Largest ratio over all tuples.
    pub worst_ratio: f64,
}

/// Negativity part of [`CheckOutput`].
#[derive(Debug, Clone, Serialize)]
pub struct NegativitySummary {
    /// Verdict.
    pub passes: bool,
    /// Largest hat functional.
    pub worst_value: f64,
    /// Node where it occurs.
    pub worst_point: Vec<f64>,
    /// Tolerance.
    pub tolerance: f64,
}

impl From<&HypothesisReport> for CheckOutput {
    fn from(h: &HypothesisReport) -> Self {
        CheckOutput {
            passes: h.passes(),
            failures: h.failures(),
            exponents_ok: h.exponents_ok,
            comparability: h.comparability.clone().ok(),
            subunit: SubunitSummary {
                r: h.subunit_r.is_subunit.clone(),
                s: h.subunit_s.is_subunit.clone(),
                t: h.subunit_t.is_subunit.clone(),
                worst_ratio: h.subunit_r.worst_ratio.max(h.subunit_s.worst_ratio).max(h.subunit_t.worst_ratio),
            },
            negativity: NegativitySummary {
                passes: h.negativity.passes,
                worst_value: h.negativity.worst_value,
                worst_point: h.negativity.worst_point.clone(),
                tolerance: h.negativity.tolerance,
            },
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Write `text` to `path`.
pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn hypotheses(spec: &ProblemSpec, space: &DiscreteSpace) -> Result<CheckOutput, CliError> {
    Ok(CheckOutput::from(&check_hypotheses(spec, space)?))
}

/// Run every hypothesis check; exit code 2 on failure.
pub fn check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.problem()?;
    let space = cfg.space(&spec)?;
    let out = hypotheses(&spec, &space)?;
    Ok(Outcome {
        text: to_json(&out)?,
        code: if out.passes { 0 } else { 2 },
    })
}

/// Constant chain with the certified shift.
pub fn constants_for(cfg: &RunConfig, spec: &ProblemSpec, space: &DiscreteSpace) -> Result<ConstantsReport, CliError> {
    let mut c = compute_constants(spec, space, cfg.constant_options())?;
    let sys = assemble_bilinear(spec, space)?;
    let (shifted, cert, doublings) = certify_shift(&sys, c.p)?;
    c.p = shifted.shift;
    c.shift_doublings = doublings;
    c.lambda_min = Some(cert.lambda_min);
    Ok(c)
}

/// Print the constant chain only.
pub fn constants(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.problem()?;
    let space = cfg.space(&spec)?;
    Ok(Outcome {
        text: to_json(&constants_for(cfg, &spec, &space)?)?,
        code: 0,
    })
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    report: &'a SolveReport,
    constants: &'a ConstantsReport,
}

/// Solution nodal values as `x[,y],u` rows sorted by coordinates.
pub fn solution_csv(field: &DiscreteField) -> String {
    let space = field.space();
    let mut rows: Vec<(Vec<f64>, f64)> = (0..space.n_nodes())
        .map(|i| (space.node(i).to_vec(), field.nodal_values()[i]))
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = String::from(if space.dim() == 1 { "x,u\n" } else { "x,y,u\n" });
    for (x, u) in rows {
        for c in &x {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{u}");
    }
    out
}

/// Solve; refuses (exit 2) when a hypothesis fails unless `force`.
pub fn solve(cfg: &RunConfig, force: bool) -> Result<Outcome, CliError> {
    let spec = cfg.problem()?;
    let space = cfg.space(&spec)?;
    if !force {
        let h = hypotheses(&spec, &space)?;
        if !h.passes {
            return Ok(Outcome {
                text: to_json(&h)?,
                code: 2,
            });
        }
    }
    let mut report = solve_dirichlet(&spec, &space, &cfg.solve_options()?)?;
    let constants = match report.constants.take() {
        Some(c) => c,
        None => constants_for(cfg, &spec, &space)?,
    };
    if let Some(csv) = &cfg.output.csv {
        write_file(&cfg.resolve(csv), &solution_csv(&report.solution))?;
    }
    Ok(Outcome {
        text: to_json(&SolveOutput {
            report: &report,
            constants: &constants,
        })?,
        code: 0,
    })
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    /// Mesh width.
    pub h: f64,
    /// `L²` error.
    pub error_l2: f64,
    /// Full QH¹ error.
    pub error_qh1: f64,
    /// `log(e_prev/e)/log(h_prev/h)` for the `L²` error.
    pub observed_order: Option<f64>,
}

/// Solve on every refinement level and tabulate errors.
pub fn convergence_rows(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>, CliError> {
    let spec = cfg.problem()?;
    if spec.exact.is_none() {
        return Err(CliError::Config("converge needs a problem with an exact solution".into()));
    }
    if cfg.refinements.is_empty() {
        return Err(CliError::Config("converge needs a refinements list".into()));
    }
    let opts = cfg.solve_options()?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in &cfg.refinements {
        let space = cfg.space_for(&spec, &Cells::Uniform(n))?;
        let r = solve_dirichlet(&spec, &space, &opts)?;
        let (l2, qh1) = match (r.error_L2, r.error_QH1) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(CliError::Solver("error norms unavailable".into())),
        };
        let h = space.h_max();
        let observed_order = rows.last().map(|p| (p.error_l2 / l2).ln() / (p.h / h).ln());
        rows.push(ConvergenceRow {
            h,
            error_l2: l2,
            error_qh1: qh1,
            observed_order,
        });
    }
    Ok(rows)
}

/// Convergence table as CSV.
pub fn converge(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rows = convergence_rows(cfg)?;
    let mut out = String::from("h,error_L2,error_QH1,observed_order\n");
    for r in rows {
        let order = r.observed_order.map(|o| o.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.h, r.error_l2, r.error_qh1, order);
    }
    Ok(Outcome { text: out, code: 0 })
}

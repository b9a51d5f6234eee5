//! Coefficient expressions in the variables `x1`, `x2` (aliases `x`, `y`).

use std::str::FromStr;
use std::sync::Arc;

use meval::{ContextProvider, Expr, FuncEvalError};
use subelliptic_core::dense::Matrix;
use subelliptic_core::problem::{ScalarField, VectorData};
use subelliptic_core::qform::{SymMatrixField, VectorFieldTuple};

use crate::error::CliError;

/// A parsed expression, shareable across threads.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    expr: Arc<Expr>,
}

struct Point<'a>(&'a [f64]);

impl ContextProvider for Point<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        match name {
            "x1" | "x" => self.0.first().copied(),
            "x2" | "y" => self.0.get(1).copied(),
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => None,
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> Result<f64, FuncEvalError> {
        let unary = |f: fn(f64) -> f64| match args {
            [a] => Ok(f(*a)),
            _ => Err(FuncEvalError::NumberArgs(1)),
        };
        match name {
            "sin" => unary(f64::sin),
            "cos" => unary(f64::cos),
            "tan" => unary(f64::tan),
            "exp" => unary(f64::exp),
            "ln" => unary(f64::ln),
            "sqrt" => unary(f64::sqrt),
            "abs" => unary(f64::abs),
            "sinh" => unary(f64::sinh),
            "cosh" => unary(f64::cosh),
            "tanh" => unary(f64::tanh),
            "floor" => unary(f64::floor),
            "signum" => unary(f64::signum),
            "min" => match args {
                [a, b] => Ok(a.min(*b)),
                _ => Err(FuncEvalError::NumberArgs(2)),
            },
            "max" => match args {
                [a, b] => Ok(a.max(*b)),
                _ => Err(FuncEvalError::NumberArgs(2)),
            },
            _ => Err(FuncEvalError::UnknownFunction),
        }
    }
}

impl Expression {
    /// Parse and check that every name resolves.
    pub fn parse(source: &str) -> Result<Self, CliError> {
        let expr = Expr::from_str(source).map_err(|e| CliError::Config(format!("expression {source:?}: {e}")))?;
        expr.eval_with_context(Point(&[0.5, 0.5]))
            .map_err(|e| CliError::Config(format!("expression {source:?}: {e}")))?;
        Ok(Expression {
            source: source.to_owned(),
            expr: Arc::new(expr),
        })
    }

    /// The source text.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluate at `x`; evaluation errors yield NaN, which the core rejects with a location.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.expr.eval_with_context(Point(x)).unwrap_or(f64::NAN)
    }

    /// As a scalar field.
    pub fn scalar(&self) -> ScalarField {
        let e = self.clone();
        ScalarField::new(move |x| e.eval(x))
    }
}

fn parse_all(sources: &[String]) -> Result<Vec<Expression>, CliError> {
    sources.iter().map(|s| Expression::parse(s)).collect()
}

/// A vector of expressions.
pub fn vector(sources: &[String]) -> Result<VectorData, CliError> {
    let exprs = parse_all(sources)?;
    Ok(VectorData::new(exprs.len(), move |x| exprs.iter().map(|e| e.eval(x)).collect()))
}

fn rows(sources: &[Vec<String>], dim: usize, what: &str) -> Result<Vec<Vec<Expression>>, CliError> {
    sources
        .iter()
        .map(|row| {
            if row.len() != dim {
                return Err(CliError::Config(format!("{what}: every row needs {dim} entries")));
            }
            parse_all(row)
        })
        .collect()
}

fn to_matrix(rows: &[Vec<Expression>], cols: usize, x: &[f64]) -> Matrix {
    let data = rows.iter().flat_map(|r| r.iter().map(|e| e.eval(x))).collect();
    Matrix::from_vec(rows.len(), cols, data).unwrap_or_else(|_| Matrix::zeros(rows.len(), cols))
}

/// A symmetric matrix field from a `dim × dim` array of expressions.
pub fn matrix_field(sources: &[Vec<String>], dim: usize, bound: f64, what: &str) -> Result<SymMatrixField, CliError> {
    if sources.len() != dim {
        return Err(CliError::Config(format!("{what} must be {dim}x{dim}")));
    }
    let r = rows(sources, dim, what)?;
    Ok(SymMatrixField::new(dim, bound, move |x| to_matrix(&r, dim, x)))
}

/// A tuple of vector fields, one row of expressions per field.
pub fn tuple(sources: &[Vec<String>], dim: usize, what: &str) -> Result<VectorFieldTuple, CliError> {
    let r = rows(sources, dim, what)?;
    let count = r.len();
    Ok(VectorFieldTuple::new(dim, count, move |x| to_matrix(&r, dim, x)))
}

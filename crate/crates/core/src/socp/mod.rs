//! Real second-order cone programs.
//!
//! A [`ConeProblem`] maximizes `objective^T x` subject to a list of cone
//! blocks, each requiring `||A[1..] x + b[1..]|| <= A[0] x + b[0]`. A block
//! with a single row is a linear inequality.

mod cone;
mod feasibility;
mod ipm;
mod lift;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use feasibility::{build_feasibility, ConeFactors, FeasibilityProblem, PhaseAnchor};
pub use ipm::solve;
pub use lift::{lift_functional, lift_hermitian, lift_vector, unlift_vector};

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl ConeBlock {
    pub fn new(name: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        ConeBlock { name: name.into(), a, b }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `A[0] x + b[0] - ||A[1..] x + b[1..]||`; nonnegative when satisfied.
    pub fn margin(&self, x: &DVector<f64>) -> f64 {
        let v = &self.a * x + &self.b;
        cone::margin(v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProblem {
    pub num_vars: usize,
    /// Maximized.
    pub objective: DVector<f64>,
    pub cones: Vec<ConeBlock>,
}

impl ConeProblem {
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::dims("objective", self.num_vars, self.objective.len()));
        }
        for c in &self.cones {
            if c.a.ncols() != self.num_vars {
                return Err(Error::dims(format!("cone '{}' columns", c.name), self.num_vars, c.a.ncols()));
            }
            if c.a.nrows() != c.b.len() || c.b.is_empty() {
                return Err(Error::dims(format!("cone '{}' rows", c.name), c.a.nrows(), c.b.len()));
            }
            if c.a.iter().chain(c.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("cone '{}' has non-finite data", c.name)));
            }
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.cones.iter().map(ConeBlock::dim).sum()
    }

    /// Smallest cone margin at `x`.
    pub fn min_margin(&self, x: &DVector<f64>) -> f64 {
        self.cones.iter().map(|c| c.margin(x)).fold(f64::INFINITY, f64::min)
    }

    /// Row-major JSON dump for cross-checking with an external conic solver.
    pub fn to_json(&self) -> Result<String> {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let dump = ConeProblemDump {
            num_vars: self.num_vars,
            objective: self.objective.iter().copied().collect(),
            cones: self
                .cones
                .iter()
                .map(|c| ConeBlockDump {
                    name: c.name.clone(),
                    a: rows(&c.a),
                    b: c.b.iter().copied().collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ConeBlockDump {
    name: String,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ConeProblemDump {
    num_vars: usize,
    objective: Vec<f64>,
    cones: Vec<ConeBlockDump>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// A dual ray certifies that no `x` satisfies the cones.
    Infeasible,
    /// A primal ray improves the objective without bound.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution {
    pub status: SolveStatus,
    /// Primal point; `Some` only when `status` is `Optimal`.
    pub x: Option<DVector<f64>>,
    /// Objective value at `x` (the achieved slack for max-slack problems).
    pub slack: f64,
    pub iterations: usize,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            max_iter: 200,
        }
    }
}

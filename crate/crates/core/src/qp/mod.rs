//! Convex quadratic programs with per-coordinate bounds and at most one
//! homogeneous linear equality.
//!
//! Two objective shapes are supported:
//!
//! * [`Metric::Direct`]: `½ xᵀHx − bᵀx` for a banded SPD `H`,
//! * [`Metric::Inverse`]: `½ (Dx − t)ᵀ K⁻¹ (Dx − t)` with `D = diag(scale)`,
//!   the squared stiffness dual norm of `Dx − t`.
//!
//! [`solve_qp`] is a primal-dual active set method; [`solve_qp_pg`] is a
//! monotone accelerated projected gradient method used as the convergent
//! fallback and as an independent oracle.

mod active_set;
mod distance;
mod gradient;

pub use active_set::{solve_qp, solve_qp_from};
pub use distance::{cone_distance, ConeDistance};
pub use gradient::solve_qp_pg;

use crate::error::QpError;
use crate::fem::FemSystem;
use crate::linalg::{self, BandCholesky, SymBanded};

/// Default tolerance for [`Metric::Direct`] problems.
pub const TOL_DIRECT: f64 = 1e-10;
/// Default tolerance for [`Metric::Inverse`] problems.
pub const TOL_INVERSE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Free,
    NonNeg,
    NonPos,
    Zero,
    /// `lo <= x <= hi`; either end may be infinite.
    Interval {
        lo: f64,
        hi: f64,
    },
}

impl Bound {
    pub fn limits(self) -> (f64, f64) {
        match self {
            Bound::Free => (f64::NEG_INFINITY, f64::INFINITY),
            Bound::NonNeg => (0.0, f64::INFINITY),
            Bound::NonPos => (f64::NEG_INFINITY, 0.0),
            Bound::Zero => (0.0, 0.0),
            Bound::Interval { lo, hi } => (lo, hi),
        }
    }

    pub fn project(self, v: f64) -> f64 {
        let (lo, hi) = self.limits();
        v.max(lo).min(hi)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Metric<'a> {
    Direct(&'a SymBanded),
    Inverse {
        op: &'a SymBanded,
        factor: &'a BandCholesky,
        scale: &'a [f64],
    },
}

#[derive(Clone, Debug)]
pub struct QpProblem<'a> {
    pub metric: Metric<'a>,
    /// `b` for [`Metric::Direct`], the target `t` for [`Metric::Inverse`].
    pub linear: Vec<f64>,
    pub bounds: Vec<Bound>,
    /// Weights `w` of the constraint `wᵀx = 0`.
    pub equality: Option<Vec<f64>>,
}

impl<'a> QpProblem<'a> {
    pub fn direct(h: &'a SymBanded, b: Vec<f64>, bounds: Vec<Bound>) -> Self {
        QpProblem {
            metric: Metric::Direct(h),
            linear: b,
            bounds,
            equality: None,
        }
    }

    /// `½ xᵀKx − bᵀx` with the stiffness matrix of `sys`.
    pub fn stiffness(sys: &'a FemSystem, b: Vec<f64>, bounds: Vec<Bound>) -> Self {
        Self::direct(sys.stiffness(), b, bounds)
    }

    /// `½ (Dx − t)ᵀ K⁻¹ (Dx − t)` with the lumped weights of `sys` as `D`.
    pub fn inverse_stiffness(sys: &'a FemSystem, target: Vec<f64>, bounds: Vec<Bound>) -> Self {
        QpProblem {
            metric: Metric::Inverse {
                op: sys.stiffness(),
                factor: sys.stiffness_factor(),
                scale: sys.lumped(),
            },
            linear: target,
            bounds,
            equality: None,
        }
    }

    pub fn with_equality(mut self, w: Vec<f64>) -> Self {
        self.equality = Some(w);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub(crate) fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        let op_dim = match self.metric {
            Metric::Direct(h) => h.dim(),
            Metric::Inverse { op, factor, scale } => {
                if factor.dim() != op.dim() || scale.len() != op.dim() {
                    return Err(QpError::Invalid("inconsistent inverse metric".into()));
                }
                if scale.iter().any(|&m| m.is_nan() || m <= 0.0) {
                    return Err(QpError::Invalid("scale weights must be positive".into()));
                }
                op.dim()
            }
        };
        if op_dim != n || self.linear.len() != n {
            return Err(QpError::Invalid(format!(
                "dimension mismatch: operator {op_dim}, linear term {}, bounds {n}",
                self.linear.len()
            )));
        }
        for (i, b) in self.bounds.iter().enumerate() {
            let (lo, hi) = b.limits();
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || lo == f64::INFINITY
                || hi == f64::NEG_INFINITY
            {
                return Err(QpError::Invalid(format!("bad bound at {i}: {b:?}")));
            }
        }
        if let Some(w) = &self.equality {
            if w.len() != n {
                return Err(QpError::Invalid("equality weight length mismatch".into()));
            }
        }
        Ok(())
    }

    /// Objective gradient at `x`, plus the auxiliary `y = K⁻¹(t − Dx)` for
    /// the inverse metric.
    pub(crate) fn gradient(&self, x: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        match self.metric {
            Metric::Direct(h) => {
                let mut g = h.matvec(x);
                g.iter_mut().zip(&self.linear).for_each(|(g, b)| *g -= b);
                (g, None)
            }
            Metric::Inverse { factor, scale, .. } => {
                let rhs: Vec<f64> = self
                    .linear
                    .iter()
                    .zip(x)
                    .zip(scale)
                    .map(|((t, x), m)| t - m * x)
                    .collect();
                let y = factor.solve(&rhs);
                let g = y.iter().zip(scale).map(|(y, m)| -m * y).collect();
                (g, Some(y))
            }
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        match self.metric {
            Metric::Direct(h) => 0.5 * h.quad_form(x) - linalg::dot(&self.linear, x),
            Metric::Inverse { factor, scale, .. } => {
                let rhs: Vec<f64> = self
                    .linear
                    .iter()
                    .zip(x)
                    .zip(scale)
                    .map(|((t, x), m)| t - m * x)
                    .collect();
                let y = factor.solve(&rhs);
                0.5 * linalg::dot(&rhs, &y)
            }
        }
    }

    /// `max_i |x_i − P(x_i − λ_i)|` together with the equality violation,
    /// where `λ` is the gradient of the Lagrangian.
    pub(crate) fn natural_residual(&self, x: &[f64], lagrangian_grad: &[f64]) -> f64 {
        let mut r = x
            .iter()
            .zip(lagrangian_grad)
            .zip(&self.bounds)
            .map(|((x, l), b)| (x - b.project(x - l)).abs())
            .fold(0.0, f64::max);
        if let Some(w) = &self.equality {
            r = r.max(linalg::dot(w, x).abs());
        }
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpMethod {
    ActiveSet,
    ProjectedGradient,
}

#[derive(Clone, Debug)]
pub struct QpReport {
    pub method: QpMethod,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Objective value after each accepted iterate.
    pub objective_history: Vec<f64>,
    pub kkt_residual: f64,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Gradient of the Lagrangian, `∇f(x) + τ w`. Nonnegative where a lower
    /// bound is active, nonpositive at an active upper bound, zero elsewhere.
    pub multipliers: Vec<f64>,
    /// Multiplier `τ` of the equality constraint (0 without one).
    pub equality_multiplier: f64,
    pub report: QpReport,
}

/// [`solve_qp`], falling back to [`solve_qp_pg`] when the active-set
/// iteration fails to settle.
pub fn solve_qp_robust(prob: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    match solve_qp(prob, tol, max_iter) {
        Ok(s) => Ok(s),
        Err(QpError::MaxIter(_)) | Err(QpError::Cycling(_)) | Err(QpError::Tolerance { .. }) => {
            let pg = solve_qp_pg(prob, tol, max_iter.max(200_000))?;
            Ok(polish(prob, pg, tol, max_iter))
        }
        Err(e) => Err(e),
    }
}

/// Restarts the active-set method from a gradient solution. A small
/// residual bounds the coefficient error only through the metric's
/// conditioning, so the exact reduced solve is kept whenever it verifies.
fn polish(prob: &QpProblem, pg: QpSolution, tol: f64, max_iter: usize) -> QpSolution {
    match solve_qp_from(prob, pg.x.clone(), tol, max_iter) {
        Ok(mut s) if s.report.kkt_residual <= pg.report.kkt_residual.max(tol) => {
            let mut history = pg.report.residual_history;
            history.append(&mut s.report.residual_history);
            s.report = QpReport {
                method: QpMethod::ProjectedGradient,
                iterations: pg.report.iterations + s.report.iterations,
                residual_history: history,
                // the gradient phase carries the monotone objective record
                objective_history: pg.report.objective_history,
                ..s.report
            };
            s
        }
        _ => pg,
    }
}

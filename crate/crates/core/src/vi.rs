//! The second-kind VI `<Ky - f, v - y> + j_h(v) - j_h(y) >= 0` with
//! `j_h(v) = Σ m_i |v_i|`, its dual projection problem, and obstacle
//! problems for capacities.
//!
//! Solutions satisfy `K y + D q = f` with `q ∈ M` and `q_i = sign(y_i)`
//! wherever `y_i ≠ 0`.

use std::collections::HashSet;

use crate::cones::{normal_gap, BoxElem};
use crate::error::{QpError, SolveError};
use crate::fem::{DualVec, FemSystem, PrimalVec};
use crate::linalg;
use crate::qp::{solve_qp_robust, Bound, QpMethod, QpProblem, TOL_DIRECT, TOL_INVERSE};

/// Default tolerance for the primal active-set iteration.
pub const TOL_VI: f64 = 1e-10;

const MAX_ACTIVE_SET_ITER: usize = 500;
const MAX_PROX_ITER: usize = 500_000;

/// `Σ m_i |y_i|`.
pub fn j_h(sys: &FemSystem, y: &[f64]) -> f64 {
    sys.lumped().iter().zip(y).map(|(m, y)| m * y.abs()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViMethod {
    ActiveSet,
    ProximalGradient,
    Dual(QpMethod),
}

#[derive(Clone, Debug)]
pub struct ViReport {
    pub method: ViMethod,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ViSolution {
    pub y: PrimalVec,
    pub q: BoxElem,
    /// `‖K y + D q − f‖∞`.
    pub duality_residual: f64,
    /// `<q, y>_h − j_h(y)`; zero at a solution, never positive.
    pub complementarity_gap: f64,
    pub report: ViReport,
}

impl ViSolution {
    fn finish(
        sys: &FemSystem,
        f: &DualVec,
        y: Vec<f64>,
        q: Vec<f64>,
        report: ViReport,
    ) -> Result<Self, SolveError> {
        if y.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(SolveError::NotConverged("non-finite iterate".into()));
        }
        let q = BoxElem::new(q)?;
        let ky = sys.stiffness().matvec(&y);
        let duality_residual = ky
            .iter()
            .zip(sys.lumped().iter().zip(q.iter()))
            .zip(f.iter())
            .map(|((k, (m, q)), f)| (k + m * q - f).abs())
            .fold(0.0, f64::max);
        // adding 0.0 turns a negated zero into +0
        let complementarity_gap = -normal_gap(sys.lumped(), &q, &y) + 0.0;
        Ok(ViSolution {
            y: PrimalVec::new(y),
            q,
            duality_residual,
            complementarity_gap,
            report,
        })
    }

    /// True when every interior node has `y_i = 0` and `|q_i| < 1`.
    pub fn inactive_interior(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0) && self.q.iter().all(|&v| v.abs() < 1.0)
    }
}

fn check_len(sys: &FemSystem, f: &DualVec) -> Result<(), SolveError> {
    if f.len() != sys.len() {
        return Err(SolveError::Invalid(format!(
            "load has {} entries, system has {} unknowns",
            f.len(),
            sys.len()
        )));
    }
    Ok(())
}

/// `max_i |q_i − P(q_i + y_i)|`, the residual of the complementarity system.
fn complementarity_residual(q: &[f64], y: &[f64]) -> f64 {
    q.iter()
        .zip(y)
        .map(|(q, y)| (q - (q + y).clamp(-1.0, 1.0)).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Plus,
    Minus,
    Inactive,
}

/// Primal-dual active set method on `q = P_[-1,1](q + y)`, falling back to
/// [`solve_primal_pg`] if the partitions cycle. The fallback result is
/// polished by restarting the active-set method from it.
pub fn solve_primal(sys: &FemSystem, f: &DualVec, tol: f64) -> Result<ViSolution, SolveError> {
    check_len(sys, f)?;
    let m = sys.lumped();
    let q: Vec<f64> = f
        .iter()
        .zip(m)
        .map(|(f, m)| (f / m).clamp(-1.0, 1.0))
        .collect();
    let y = sys
        .stiffness_factor()
        .solve(&(f - &sys.lumped_functional(&q)));
    if let Some(sol) = active_set(sys, f, tol, q, y)? {
        return Ok(sol);
    }
    let pg = solve_primal_pg(sys, f, tol, MAX_PROX_ITER)?;
    match active_set(sys, f, tol, pg.q.values().to_vec(), pg.y.values().to_vec())? {
        Some(mut sol) if sol.duality_residual <= pg.duality_residual.max(tol) => {
            let mut history = pg.report.residual_history;
            history.append(&mut sol.report.residual_history);
            sol.report = ViReport {
                method: ViMethod::ProximalGradient,
                iterations: pg.report.iterations + sol.report.iterations,
                residual_history: history,
            };
            Ok(sol)
        }
        _ => Ok(pg),
    }
}

/// Runs the active-set iteration from `(q, y)`; `None` when the partitions
/// cycle or the final residual misses `tol`.
fn active_set(
    sys: &FemSystem,
    f: &DualVec,
    tol: f64,
    mut q: Vec<f64>,
    mut y: Vec<f64>,
) -> Result<Option<ViSolution>, SolveError> {
    let n = sys.len();
    let m = sys.lumped();
    let k = sys.stiffness();
    let mut prev: Option<Vec<Node>> = None;
    let mut seen = HashSet::new();
    let mut history = Vec::new();

    for it in 0..=MAX_ACTIVE_SET_ITER {
        let state: Vec<Node> = q
            .iter()
            .zip(&y)
            .map(|(q, y)| {
                let v = q + y;
                if v > 1.0 {
                    Node::Plus
                } else if v < -1.0 {
                    Node::Minus
                } else {
                    Node::Inactive
                }
            })
            .collect();
        if prev.as_ref() == Some(&state) {
            let report = ViReport {
                method: ViMethod::ActiveSet,
                iterations: it,
                residual_history: history,
            };
            let sol = ViSolution::finish(sys, f, y, q, report)?;
            if sol.duality_residual <= tol.max(1e-12 * linalg::norm_inf(f)) {
                return Ok(Some(sol));
            }
            break;
        }
        if it == MAX_ACTIVE_SET_ITER || !seen.insert(state.clone()) {
            break;
        }
        let active: Vec<usize> = (0..n).filter(|&i| state[i] != Node::Inactive).collect();
        for &i in &active {
            q[i] = if state[i] == Node::Plus { 1.0 } else { -1.0 };
        }
        y = vec![0.0; n];
        if !active.is_empty() {
            let rhs: Vec<f64> = active.iter().map(|&i| f[i] - m[i] * q[i]).collect();
            let ya = k
                .principal(&active)
                .cholesky()
                .map_err(QpError::from)?
                .solve(&rhs);
            for (j, &i) in active.iter().enumerate() {
                y[i] = ya[j];
            }
        }
        let ky = k.matvec(&y);
        for i in 0..n {
            if state[i] == Node::Inactive {
                q[i] = (f[i] - ky[i]) / m[i];
            }
        }
        history.push(complementarity_residual(&q, &y));
        prev = Some(state);
    }
    Ok(None)
}

/// Accelerated proximal gradient on `½ yᵀKy − fᵀy + j_h(y)` with
/// function-value restarts.
///
/// Stops when the prox-gradient mapping `L (y − prox(y − ∇/L))` is below
/// `tol` in the max norm.
pub fn solve_primal_pg(
    sys: &FemSystem,
    f: &DualVec,
    tol: f64,
    max_iter: usize,
) -> Result<ViSolution, SolveError> {
    check_len(sys, f)?;
    let n = sys.len();
    let m = sys.lumped();
    let k = sys.stiffness();
    // Gershgorin bound on the largest eigenvalue of K
    let lip = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(k.bandwidth());
            let hi = (i + k.bandwidth() + 1).min(n);
            (lo..hi).map(|j| k.get(i, j).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    // E(c) − E(y) evaluated as a difference, so its rounding error scales
    // with ‖c − y‖ rather than with the size of the energy terms
    let change = |c: &[f64], y: &[f64]| -> (f64, f64) {
        let d: Vec<f64> = c.iter().zip(y).map(|(c, y)| c - y).collect();
        let s: Vec<f64> = c.iter().zip(y).map(|(c, y)| c + y).collect();
        let quad = 0.5 * linalg::dot(&d, &k.matvec(&s));
        let lin = linalg::dot(f, &d);
        let abs: f64 = (0..n).map(|i| m[i] * (c[i].abs() - y[i].abs())).sum();
        (quad - lin + abs, quad.abs() + lin.abs() + abs.abs())
    };
    let prox = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(m)
            .map(|(v, m)| {
                let t = m / lip;
                v.signum() * (v.abs() - t).max(0.0)
            })
            .collect()
    };
    let forward = |z: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let g = k.matvec(z);
        let step: Vec<f64> = z
            .iter()
            .zip(&g)
            .zip(f.iter())
            .map(|((z, g), f)| z - (g - f) / lip)
            .collect();
        (prox(&step), g)
    };

    let mut y = vec![0.0; n];
    let mut z = y.clone();
    let mut theta = 1.0_f64;
    let mut history = Vec::new();
    for it in 0..max_iter {
        let (cand, _) = forward(&z);
        let (rise, scale) = change(&cand, &y);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        // changes at rounding level are not evidence of ascent
        if rise <= 1e-13 * scale {
            let mom = (theta - 1.0) / theta_next;
            z = cand
                .iter()
                .zip(&y)
                .map(|(c, y)| c + mom * (c - y))
                .collect();
            y = cand;
            theta = theta_next;
        } else {
            z = y.clone();
            theta = 1.0;
        }
        let (py, g) = forward(&y);
        let res = lip
            * y.iter()
                .zip(&py)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        history.push(res);
        if res <= tol {
            let q: Vec<f64> = (0..n)
                .map(|i| {
                    if y[i] > 0.0 {
                        1.0
                    } else if y[i] < 0.0 {
                        -1.0
                    } else {
                        ((f[i] - g[i]) / m[i]).clamp(-1.0, 1.0)
                    }
                })
                .collect();
            let report = ViReport {
                method: ViMethod::ProximalGradient,
                iterations: it + 1,
                residual_history: history,
            };
            return ViSolution::finish(sys, f, y, q, report);
        }
    }
    Err(SolveError::NotConverged(format!(
        "proximal gradient made no convergence within {max_iter} iterations"
    )))
}

/// Projects `f` onto `D·M` in the `K⁻¹` metric and recovers
/// `y = K⁻¹(f − D q)`.
pub fn solve_dual(sys: &FemSystem, f: &DualVec, tol: f64) -> Result<ViSolution, SolveError> {
    check_len(sys, f)?;
    let bounds = vec![Bound::Interval { lo: -1.0, hi: 1.0 }; sys.len()];
    let prob = QpProblem::inverse_stiffness(sys, f.values().to_vec(), bounds);
    let sol = solve_qp_robust(&prob, tol, 200)?;
    // the Lagrangian gradient of the unconstrained-equality problem is −D y
    let y: Vec<f64> = sol
        .multipliers
        .iter()
        .zip(sys.lumped())
        .map(|(l, m)| -l / m)
        .collect();
    let q: Vec<f64> = sol.x.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let report = ViReport {
        method: ViMethod::Dual(sol.report.method),
        iterations: sol.report.iterations,
        residual_history: sol.report.residual_history,
    };
    ViSolution::finish(sys, f, y, q, report)
}

/// `‖y_a − y_b‖_K`.
pub fn energy_gap(sys: &FemSystem, a: &PrimalVec, b: &PrimalVec) -> f64 {
    sys.energy_norm(&(a - b))
}

/// Minimizes `wᵀ E₁ w` subject to `w_i >= lower` on `nodes`.
///
/// Returns the minimizer and its energy `wᵀ E₁ w`.
pub fn solve_obstacle(
    sys: &FemSystem,
    nodes: &[usize],
    lower: f64,
) -> Result<(PrimalVec, f64), SolveError> {
    let n = sys.len();
    if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
        return Err(SolveError::Invalid(format!(
            "node {bad} out of range (n = {n})"
        )));
    }
    if !lower.is_finite() {
        return Err(SolveError::Invalid(format!(
            "lower value {lower} is not finite"
        )));
    }
    let mut bounds = vec![Bound::Free; n];
    for &i in nodes {
        bounds[i] = Bound::Interval {
            lo: lower,
            hi: f64::INFINITY,
        };
    }
    let prob = QpProblem::direct(sys.e1(), vec![0.0; n], bounds);
    let sol = solve_qp_robust(&prob, TOL_DIRECT, 200)?;
    let energy = sys.e1().quad_form(&sol.x);
    Ok((PrimalVec::new(sol.x), energy))
}

/// Discrete capacity of a set of interior nodes: the `E₁` energy of the
/// equilibrium potential `w >= 1` on the set.
pub fn capacity(sys: &FemSystem, nodes: &[usize]) -> Result<f64, SolveError> {
    solve_obstacle(sys, nodes, 1.0).map(|(_, e)| e)
}

/// Solves with both formulations and returns them with `‖y_p − y_d‖_K`.
pub fn solve_cross_checked(
    sys: &FemSystem,
    f: &DualVec,
) -> Result<(ViSolution, ViSolution, f64), SolveError> {
    let primal = solve_primal(sys, f, TOL_VI)?;
    let dual = solve_dual(sys, f, TOL_INVERSE)?;
    let gap = energy_gap(sys, &primal.y, &dual.y);
    Ok((primal, dual, gap))
}

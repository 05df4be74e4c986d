//! Directional derivatives of `S: f ↦ y` and `T: f ↦ q`.
//!
//! With `C = T_M(q) ∩ y⊥` the critical cone at a solution, the derivative
//! `δ = S'(f; g)` minimizes `½ δᵀKδ − gᵀδ` over the polar `C°`, and
//! `η = T'(f; g)` is the `K⁻¹`-metric projection of `g` onto `D·C`. The two
//! are linked by `δ = K⁻¹(g − D η)` and `<η, δ>_h = 0`.

use rayon::prelude::*;

use crate::cones::{critical_cone, zero_threshold, ConeSpec, TOL_ACTIVE};
use crate::error::SolveError;
use crate::fem::{DualVec, FemSystem, PrimalVec};
use crate::qp::{solve_qp_robust, QpProblem, TOL_DIRECT, TOL_INVERSE};
use crate::vi::{solve_primal, ViSolution};

/// Tolerance of the re-solves behind the finite-difference oracle.
pub const TOL_FD: f64 = 1e-11;

#[derive(Clone, Debug)]
pub struct DerivativeResult {
    /// `S'(f; g)`.
    pub delta: PrimalVec,
    /// Nodal values of `T'(f; g)`, a direction in the tangent space of `M`.
    pub eta: Vec<f64>,
    /// The critical cone `C`.
    pub cone: ConeSpec,
    /// `<η, δ>_h = Σ m_i η_i δ_i`.
    pub orthogonality_gap: f64,
}

impl DerivativeResult {
    fn new(sys: &FemSystem, delta: Vec<f64>, eta: Vec<f64>, cone: ConeSpec) -> Self {
        let orthogonality_gap = sys
            .lumped()
            .iter()
            .zip(&eta)
            .zip(&delta)
            .map(|((m, e), d)| m * e * d)
            .sum();
        DerivativeResult {
            delta: PrimalVec::new(delta),
            eta,
            cone,
            orthogonality_gap,
        }
    }

    /// The functional `D η`.
    pub fn eta_functional(&self, sys: &FemSystem) -> DualVec {
        sys.lumped_functional(&self.eta)
    }
}

/// Critical cone of a computed solution, with `|y_i|` below
/// [`zero_threshold`] counted as zero.
pub fn solution_cone(vi: &ViSolution) -> Result<ConeSpec, SolveError> {
    Ok(critical_cone(
        &vi.q,
        &vi.y,
        TOL_ACTIVE,
        zero_threshold(&vi.y),
    )?)
}

fn check(sys: &FemSystem, vi: &ViSolution, g: &DualVec) -> Result<(), SolveError> {
    if g.len() != sys.len() || vi.y.len() != sys.len() {
        return Err(SolveError::Invalid(
            "direction or solution length does not match the system".into(),
        ));
    }
    Ok(())
}

/// `δ` from the stiffness QP over `C°`, then `η_i = (g_i − (Kδ)_i) / m_i`.
pub fn derivative_s(
    sys: &FemSystem,
    vi: &ViSolution,
    g: &DualVec,
    tol: f64,
) -> Result<DerivativeResult, SolveError> {
    check(sys, vi, g)?;
    let cone = solution_cone(vi)?;
    let polar = cone.polar(sys.lumped())?;
    let prob = QpProblem::stiffness(sys, g.values().to_vec(), polar.bounds());
    let sol = solve_qp_robust(&prob, tol, 200)?;
    let kd = sys.stiffness().matvec(&sol.x);
    let eta: Vec<f64> = (0..sys.len())
        .map(|i| (g[i] - kd[i]) / sys.lumped()[i])
        .collect();
    Ok(DerivativeResult::new(sys, sol.x, eta, cone))
}

/// `η` from the `K⁻¹`-metric QP over `C`, then `δ = K⁻¹(g − D η)`.
pub fn derivative_t(
    sys: &FemSystem,
    vi: &ViSolution,
    g: &DualVec,
    tol: f64,
) -> Result<DerivativeResult, SolveError> {
    check(sys, vi, g)?;
    let cone = solution_cone(vi)?;
    let prob = QpProblem::inverse_stiffness(sys, g.values().to_vec(), cone.bounds());
    let sol = solve_qp_robust(&prob, tol, 200)?;
    let eta = sol.x;
    let delta = sys
        .stiffness_factor()
        .solve(&(g - &sys.lumped_functional(&eta)));
    Ok(DerivativeResult::new(sys, delta, eta, cone))
}

/// Derivative with the default tolerances of both formulations, and
/// `‖δ_S − δ_T‖_K`.
pub fn derivative_cross_checked(
    sys: &FemSystem,
    vi: &ViSolution,
    g: &DualVec,
) -> Result<(DerivativeResult, DerivativeResult, f64), SolveError> {
    let s = derivative_s(sys, vi, g, TOL_DIRECT)?;
    let t = derivative_t(sys, vi, g, TOL_INVERSE)?;
    let gap = sys.energy_norm(&(&s.delta - &t.delta));
    Ok((s, t, gap))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdRow {
    pub t: f64,
    /// `‖(S(f + t g) − S(f))/t − δ‖∞`, relative to `‖δ‖∞` unless `δ = 0`.
    pub err: f64,
    /// Same with the perturbed direction `g_t = g + √t ‖g‖∞ p`.
    pub err_hadamard: f64,
}

/// Fixed perturbation pattern with entries in `[-1, 1]`.
fn perturbation(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (1.0 + i as f64 * 0.754_877_666).sin())
        .collect()
}

/// One-sided difference quotients of `S` at `f` in direction `g`, compared
/// with `delta`, both along `g` itself and along directions `g_t → g`.
pub fn fd_oracle(
    sys: &FemSystem,
    f: &DualVec,
    g: &DualVec,
    delta: &PrimalVec,
    t_list: &[f64],
) -> Result<Vec<FdRow>, SolveError> {
    if g.len() != sys.len() || f.len() != sys.len() || delta.len() != sys.len() {
        return Err(SolveError::Invalid(
            "length mismatch in finite-difference oracle".into(),
        ));
    }
    if let Some(t) = t_list.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(SolveError::Invalid(format!(
            "step {t} is not a positive number"
        )));
    }
    let base = solve_primal(sys, f, TOL_FD)?.y;
    let scale = delta.norm_inf();
    let p = perturbation(sys.len());
    let gmax = g.norm_inf();

    let err_of = |dir: &DualVec, t: f64| -> Result<f64, SolveError> {
        let ft = f + &dir.scaled(t);
        let yt = solve_primal(sys, &ft, TOL_FD)?.y;
        let diff = (0..sys.len())
            .map(|i| ((yt[i] - base[i]) / t - delta[i]).abs())
            .fold(0.0, f64::max);
        Ok(if scale > 0.0 { diff / scale } else { diff })
    };
    t_list
        .par_iter()
        .map(|&t| {
            let gt = DualVec::new(
                g.iter()
                    .zip(&p)
                    .map(|(g, p)| g + t.sqrt() * gmax * p)
                    .collect(),
            );
            Ok(FdRow {
                t,
                err: err_of(g, t)?,
                err_hadamard: err_of(&gt, t)?,
            })
        })
        .collect()
}

/// Smallest error of a table, over both columns separately.
pub fn best_errors(rows: &[FdRow]) -> (f64, f64) {
    rows.iter()
        .fold((f64::INFINITY, f64::INFINITY), |(a, b), r| {
            (a.min(r.err), b.min(r.err_hadamard))
        })
}

/// `‖a − b‖∞`.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

use std::collections::HashSet;

use super::{Metric, QpMethod, QpProblem, QpReport, QpSolution};
use crate::error::QpError;
use crate::linalg::{self, SymBanded};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Slot {
    Free,
    Lower,
    Upper,
}

/// Primal-dual active set method (a semismooth Newton iteration on
/// `x = P(x − c ∇L(x))`).
///
/// Each step fixes the coordinates predicted active, solves the reduced
/// stationarity system exactly (one banded factorization), and stops once
/// the predicted partition repeats. Ties go to the free set, so runs are
/// deterministic.
pub fn solve_qp(prob: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    prob.validate()?;
    let x0: Vec<f64> = match prob.metric {
        Metric::Direct(h) => {
            let free = h.cholesky()?.solve(&prob.linear);
            free.iter()
                .zip(&prob.bounds)
                .map(|(v, b)| b.project(*v))
                .collect()
        }
        Metric::Inverse { scale, .. } => prob
            .linear
            .iter()
            .zip(scale)
            .zip(&prob.bounds)
            .map(|((t, m), b)| b.project(t / m))
            .collect(),
    };
    solve_qp_from(prob, x0, tol, max_iter)
}

/// [`solve_qp`] started from `x0` instead of the projected unconstrained
/// guess. Near the solution the first predicted partition is usually final.
pub fn solve_qp_from(
    prob: &QpProblem,
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<QpSolution, QpError> {
    prob.validate()?;
    let n = prob.dim();
    if x0.len() != n {
        return Err(QpError::Invalid(format!(
            "start has {} entries, problem has {n}",
            x0.len()
        )));
    }
    let limits: Vec<(f64, f64)> = prob.bounds.iter().map(|b| b.limits()).collect();

    // Step weights: the natural scale of each coordinate's gradient.
    let c: Vec<f64> = match prob.metric {
        Metric::Direct(h) => h.diagonal().iter().map(|d| 1.0 / d).collect(),
        Metric::Inverse { scale, .. } => scale.iter().map(|m| 1.0 / m).collect(),
    };

    let mut x = x0;
    let mut lambda = prob.gradient(&x).0;
    let mut tau = 0.0;

    let mut prev: Option<Vec<Slot>> = None;
    let mut seen: HashSet<Vec<Slot>> = HashSet::new();
    let mut history = Vec::new();
    let mut objectives = Vec::new();

    for it in 0..=max_iter {
        let state: Vec<Slot> = (0..n)
            .map(|i| {
                let (lo, hi) = limits[i];
                if lo == hi {
                    return Slot::Lower;
                }
                let v = x[i] - c[i] * lambda[i];
                // rounding-level crossings count as ties
                let eps = 1e-12 * (x[i].abs() + c[i] * (lambda[i].abs() + prob.linear[i].abs()));
                if v < lo - eps {
                    Slot::Lower
                } else if v > hi + eps {
                    Slot::Upper
                } else {
                    Slot::Free
                }
            })
            .collect();
        if prev.as_ref() == Some(&state) {
            let kkt = prob.natural_residual(&x, &lambda);
            if kkt.is_nan() || kkt > tol {
                return Err(QpError::Tolerance { residual: kkt, tol });
            }
            let objective = prob.objective(&x);
            return Ok(QpSolution {
                x,
                multipliers: lambda,
                equality_multiplier: tau,
                report: QpReport {
                    method: QpMethod::ActiveSet,
                    iterations: it,
                    residual_history: history,
                    objective_history: objectives,
                    kkt_residual: kkt,
                    objective,
                },
            });
        }
        if it == max_iter {
            break;
        }
        if !seen.insert(state.clone()) {
            return Err(QpError::Cycling(it));
        }
        let fixed: Vec<Option<f64>> = state
            .iter()
            .zip(&limits)
            .map(|(s, &(lo, hi))| match s {
                Slot::Free => None,
                Slot::Lower => Some(lo),
                Slot::Upper => Some(hi),
            })
            .collect();
        let (nx, nl, nt) = match prob.metric {
            Metric::Direct(h) => reduced_direct(prob, h, &fixed)?,
            Metric::Inverse { op, scale, .. } => reduced_inverse(prob, op, scale, &fixed)?,
        };
        x = nx;
        lambda = nl;
        tau = nt;
        history.push(prob.natural_residual(&x, &lambda));
        objectives.push(prob.objective(&x));
        prev = Some(state);
    }
    Err(QpError::MaxIter(max_iter))
}

fn split(fixed: &[Option<f64>]) -> (Vec<usize>, Vec<usize>) {
    let free = (0..fixed.len()).filter(|&i| fixed[i].is_none()).collect();
    let act = (0..fixed.len()).filter(|&i| fixed[i].is_some()).collect();
    (free, act)
}

/// Equality multiplier making `wᵀ(x0 + τ x1) = 0`, or 0 when `x1` has no
/// component along `w`.
fn equality_tau(w: &[f64], x0: &[f64], x1: &[f64]) -> f64 {
    let num = linalg::dot(w, x0);
    let den = linalg::dot(w, x1);
    let scale = linalg::norm2(w) * linalg::norm2(x1);
    if den.abs() <= 1e-14 * scale || den == 0.0 {
        0.0
    } else {
        -num / den
    }
}

type Reduced = (Vec<f64>, Vec<f64>, f64);

/// `H_FF x_F = b_F − H_FA x_A − τ w_F`.
fn reduced_direct(
    prob: &QpProblem,
    h: &SymBanded,
    fixed: &[Option<f64>],
) -> Result<Reduced, QpError> {
    let n = fixed.len();
    let (free, _) = split(fixed);
    let xa: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    let hxa = h.matvec(&xa);
    let mut x0 = xa.clone();
    let mut x1 = vec![0.0; n];
    if !free.is_empty() {
        let chol = h.principal(&free).cholesky()?;
        let rhs: Vec<f64> = free.iter().map(|&i| prob.linear[i] - hxa[i]).collect();
        let p = chol.solve(&rhs);
        for (k, &i) in free.iter().enumerate() {
            x0[i] = p[k];
        }
        if let Some(w) = &prob.equality {
            let wf: Vec<f64> = free.iter().map(|&i| w[i]).collect();
            let r = chol.solve(&wf);
            for (k, &i) in free.iter().enumerate() {
                x1[i] = -r[k];
            }
        }
    }
    let tau = prob
        .equality
        .as_ref()
        .map_or(0.0, |w| equality_tau(w, &x0, &x1));
    let x: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| a + tau * b).collect();
    let mut lambda = prob.gradient(&x).0;
    if let Some(w) = &prob.equality {
        lambda.iter_mut().zip(w).for_each(|(l, w)| *l += tau * w);
    }
    Ok((x, lambda, tau))
}

/// Reduced system of the inverse metric, written through `y = K⁻¹(t − Dx)`.
///
/// On free coordinates stationarity reads `m_i y_i = τ w_i`, so `y` is known
/// there; the remaining rows give `K_AA y_A` and then `x_F` explicitly.
fn reduced_inverse(
    prob: &QpProblem,
    op: &SymBanded,
    scale: &[f64],
    fixed: &[Option<f64>],
) -> Result<Reduced, QpError> {
    let n = fixed.len();
    let (free, act) = split(fixed);
    let chol = if act.is_empty() {
        None
    } else {
        Some(op.principal(&act).cholesky()?)
    };
    let t = &prob.linear;

    // Solves for y given its values on F and the right-hand side on A, then
    // recovers x_F from the F rows of K y = t − D x.
    let recover = |y_free: &[f64], rhs_base: &[f64], xa: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut y = vec![0.0; n];
        for &i in &free {
            y[i] = y_free[i];
        }
        let ky_free = op.matvec(&y);
        if let Some(chol) = &chol {
            let rhs: Vec<f64> = act
                .iter()
                .map(|&i| rhs_base[i] - scale[i] * xa[i] - ky_free[i])
                .collect();
            let ya = chol.solve(&rhs);
            for (k, &i) in act.iter().enumerate() {
                y[i] = ya[k];
            }
        }
        let ky = op.matvec(&y);
        let mut x = xa.to_vec();
        for &i in &free {
            x[i] = (rhs_base[i] - ky[i]) / scale[i];
        }
        (x, y)
    };

    let xa: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    let (x0, y0) = recover(&vec![0.0; n], t, &xa);
    let (x, y, tau) = match &prob.equality {
        None => (x0, y0, 0.0),
        Some(w) => {
            let s: Vec<f64> = w.iter().zip(scale).map(|(w, m)| w / m).collect();
            let (x1, y1) = recover(&s, &vec![0.0; n], &vec![0.0; n]);
            let tau = equality_tau(w, &x0, &x1);
            (
                x0.iter().zip(&x1).map(|(a, b)| a + tau * b).collect(),
                y0.iter()
                    .zip(&y1)
                    .map(|(a, b)| a + tau * b)
                    .collect::<Vec<f64>>(),
                tau,
            )
        }
    };
    let mut lambda: Vec<f64> = y.iter().zip(scale).map(|(y, m)| -m * y).collect();
    if let Some(w) = &prob.equality {
        lambda.iter_mut().zip(w).for_each(|(l, w)| *l += tau * w);
    }
    Ok((x, lambda, tau))
}

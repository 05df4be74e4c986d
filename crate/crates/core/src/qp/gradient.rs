use super::{QpMethod, QpProblem, QpReport, QpSolution};
use crate::error::QpError;
use crate::linalg;

/// Euclidean projection onto the bounds intersected with `{wᵀx = 0}`.
///
/// `x(τ) = P_bounds(v − τ w)` makes `wᵀx(τ)` nonincreasing in `τ`; the root
/// is bracketed and bisected to machine precision.
fn project(prob: &QpProblem, v: &[f64]) -> (Vec<f64>, f64) {
    let clamp = |tau: f64| -> Vec<f64> {
        match &prob.equality {
            None => v
                .iter()
                .zip(&prob.bounds)
                .map(|(v, b)| b.project(*v))
                .collect(),
            Some(w) => v
                .iter()
                .zip(w)
                .zip(&prob.bounds)
                .map(|((v, w), b)| b.project(v - tau * w))
                .collect(),
        }
    };
    let Some(w) = &prob.equality else {
        return (clamp(0.0), 0.0);
    };
    let phi = |tau: f64| linalg::dot(w, &clamp(tau));
    let f0 = phi(0.0);
    if f0 == 0.0 {
        return (clamp(0.0), 0.0);
    }
    let dir = f0.signum();
    let mut step = 1.0;
    let mut far = dir * step;
    let mut guard = 0;
    while phi(far).signum() == dir && guard < 200 {
        step *= 2.0;
        far = dir * step;
        guard += 1;
    }
    let (mut a, mut b) = if dir > 0.0 { (0.0, far) } else { (far, 0.0) };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        // phi is nonincreasing: positive values lie left of the root
        if phi(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let tau = if phi(a).abs() <= phi(b).abs() { a } else { b };
    (clamp(tau), tau)
}

/// Monotone accelerated projected gradient (FISTA with backtracking and
/// function-value restarts).
///
/// The objective never increases from one accepted iterate to the next.
/// Stops when the natural residual `‖x − P(x − ∇f(x))‖∞` is at most `tol`.
pub fn solve_qp_pg(prob: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    prob.validate()?;
    let n = prob.dim();

    let (mut x, _) = project(prob, &vec![0.0; n]);
    let mut fx = prob.objective(&x);
    let mut z = x.clone();
    let mut theta = 1.0_f64;
    let mut lip = 1.0_f64;
    let mut history = Vec::new();
    let mut objectives = Vec::new();

    // Rough Lipschitz estimate from a few power iterations.
    {
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
        for _ in 0..30 {
            let nv = linalg::norm2(&v);
            if nv == 0.0 {
                break;
            }
            v.iter_mut().for_each(|e| *e /= nv);
            let (g0, _) = prob.gradient(&vec![0.0; n]);
            let (g1, _) = prob.gradient(&v);
            let hv: Vec<f64> = g1.iter().zip(&g0).map(|(a, b)| a - b).collect();
            lip = linalg::norm2(&hv).max(f64::MIN_POSITIVE);
            v = hv;
        }
    }

    let (mut gx, _) = prob.gradient(&x);
    for it in 0..max_iter {
        let (gz, _) = prob.gradient(&z);
        // Backtracking on the quadratic model. For a quadratic the model
        // test reduces to dᵀHd <= L|d|², evaluated from gradient differences
        // so it stays meaningful below the rounding level of f itself.
        let (cand, gc) = loop {
            let step: Vec<f64> = z.iter().zip(&gz).map(|(z, g)| z - g / lip).collect();
            let (c, _) = project(prob, &step);
            let (gc, _) = prob.gradient(&c);
            let d: Vec<f64> = c.iter().zip(&z).map(|(a, b)| a - b).collect();
            let curv: f64 = gc
                .iter()
                .zip(&gz)
                .zip(&d)
                .map(|((a, b), d)| (a - b) * d)
                .sum();
            if curv <= lip * linalg::dot(&d, &d) * (1.0 + 1e-12) {
                break (c, gc);
            }
            lip *= 2.0;
        };
        // exact objective change of a quadratic: ½<∇f(x) + ∇f(c), c − x>
        let delta: f64 = gx
            .iter()
            .zip(&gc)
            .zip(cand.iter().zip(&x))
            .map(|((a, b), (c, x))| 0.5 * (a + b) * (c - x))
            .sum();
        // Changes at the rounding level of the pairing carry no sign. Points
        // on the hyperplane are only feasible to rounding, and the gradient
        // there has a large normal component, hence the |x| factor.
        let noise = 1e-13
            * linalg::norm2(&gx).max(linalg::norm2(&gc))
            * (linalg::norm2(&x) + linalg::norm2(&cand));
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        if delta <= noise {
            let mom = (theta - 1.0) / theta_next;
            z = cand
                .iter()
                .zip(&x)
                .map(|(c, x)| c + mom * (c - x))
                .collect();
            x = cand;
            gx = gc;
            fx += delta.min(0.0);
            theta = theta_next;
        } else {
            // restart from the last accepted point
            z = x.clone();
            theta = 1.0;
        }

        objectives.push(fx);
        let (px, _) = project(
            prob,
            &x.iter().zip(&gx).map(|(x, g)| x - g).collect::<Vec<_>>(),
        );
        let res = x
            .iter()
            .zip(&px)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(res);
        if res <= tol {
            let (tau, lambda) = multipliers(prob, &x, gx);
            let kkt = prob.natural_residual(&x, &lambda);
            let objective = prob.objective(&x);
            return Ok(QpSolution {
                x,
                multipliers: lambda,
                equality_multiplier: tau,
                report: QpReport {
                    method: QpMethod::ProjectedGradient,
                    iterations: it + 1,
                    residual_history: history,
                    objective_history: objectives,
                    kkt_residual: kkt.max(res),
                    objective,
                },
            });
        }
    }
    Err(QpError::MaxIter(max_iter))
}

/// Least-squares equality multiplier on the coordinates strictly inside
/// their bounds, and the resulting Lagrangian gradient.
fn multipliers(prob: &QpProblem, x: &[f64], mut g: Vec<f64>) -> (f64, Vec<f64>) {
    let Some(w) = &prob.equality else {
        return (0.0, g);
    };
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..x.len() {
        let (lo, hi) = prob.bounds[i].limits();
        if x[i] > lo && x[i] < hi {
            num += w[i] * g[i];
            den += w[i] * w[i];
        }
    }
    let tau = if den > 0.0 { -num / den } else { 0.0 };
    g.iter_mut().zip(w).for_each(|(g, w)| *g += tau * w);
    (tau, g)
}

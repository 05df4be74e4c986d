use super::{solve_qp_robust, QpProblem, QpSolution, TOL_INVERSE};
use crate::cones::ConeSpec;
use crate::error::QpError;
use crate::fem::{DualVec, FemSystem};
use crate::linalg;

#[derive(Clone, Debug)]
pub struct ConeDistance {
    /// `min_z ‖target − D z‖_{K⁻¹}` over the cone.
    pub distance: f64,
    /// Minimizing nodal values `z`.
    pub minimizer: Vec<f64>,
    /// `‖z‖_∞`; grows without bound when the target is only reachable in
    /// the limit of refinement.
    pub sup_norm: f64,
    pub solution: QpSolution,
}

/// Dual-norm distance from `target` to `{D z : z ∈ cone}`.
pub fn cone_distance(
    sys: &FemSystem,
    target: &DualVec,
    cone: &ConeSpec,
) -> Result<ConeDistance, QpError> {
    if cone.len() != sys.len() || target.len() != sys.len() {
        return Err(QpError::Invalid(
            "cone/target length does not match the system".into(),
        ));
    }
    let mut prob = QpProblem::inverse_stiffness(sys, target.values().to_vec(), cone.bounds());
    prob.equality = cone.equality.clone();
    let solution = solve_qp_robust(&prob, TOL_INVERSE, 200)?;
    let z = solution.x.clone();
    let residual = target - &sys.lumped_functional(&z);
    let distance = sys
        .dual_norm(&residual)
        .map_err(|e| QpError::Invalid(e.to_string()))?;
    Ok(ConeDistance {
        distance,
        sup_norm: linalg::norm_inf(&z),
        minimizer: z,
        solution,
    })
}

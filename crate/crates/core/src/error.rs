use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh needs at least 2 elements per direction, got {0}")]
    TooSmall(usize),
    #[error("{alignment} mesh needs an {parity} element count, got {n}")]
    Parity {
        alignment: &'static str,
        parity: &'static str,
        n: usize,
    },
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    Dimension(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("assembly produced a singular operator: {0}")]
    Singular(#[from] LinalgError),
    #[error("negative dual norm radicand {0:e}")]
    NegativeRadicand(f64),
    #[error("vector length {got} does not match {expected} interior nodes")]
    Length { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("unknown density spec `{0}` (expected const:, sin:, box: or file:)")]
    Unknown(String),
    #[error("malformed density spec `{spec}`: {reason}")]
    Malformed { spec: String, reason: String },
    #[error("density `{0}` is only defined in 1D")]
    OneDimensionalOnly(String),
    #[error("cannot read nodal file `{path}`: {reason}")]
    File { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("no convergence within {0} iterations")]
    MaxIter(usize),
    #[error("active-set iteration revisited a previous partition after {0} iterations")]
    Cycling(usize),
    #[error("KKT residual {residual:e} above tolerance {tol:e}")]
    Tolerance { residual: f64, tol: f64 },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeError {
    #[error("direction is not in the normal cone (gap {0:e})")]
    NotNormal(f64),
    #[error("polar of a cone with an equality constraint is not coordinatewise")]
    EqualityPresent,
    #[error("point is not in the box at index {0}")]
    OutsideBox(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("indicator width 1/{n} is not resolved by h = 1/{elements} (need 1/n >= 4h)")]
    Resolution { n: usize, elements: usize },
    #[error("scenario violates the normal-cone condition")]
    NormalCone,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

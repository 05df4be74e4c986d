//! Cone calculus for the box `M = {q : -1 <= q_i <= 1}`.
//!
//! Cones are described nodally by a sign tag per coordinate plus an optional
//! homogeneous equality `wᵀz = 0`. Pairings are weighted by the lumped mass
//! `m`, so polars dualize tags coordinatewise.

use rand::Rng;

use crate::error::ConeError;
use crate::fem::{FemSystem, PrimalVec};
use crate::linalg::{self, SymBanded};
use crate::qp::{solve_qp, Bound, QpProblem};

/// Default tolerance for deciding that `|q_i| = 1`.
pub const TOL_ACTIVE: f64 = 1e-9;

/// Nodal values of an element of `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxElem(Vec<f64>);

impl BoxElem {
    pub fn new(values: Vec<f64>) -> Result<Self, ConeError> {
        if let Some(i) = values.iter().position(|v| v.is_nan() || v.abs() > 1.0) {
            return Err(ConeError::OutsideBox(i));
        }
        Ok(BoxElem(values))
    }

    /// Clamps into `[-1, 1]`.
    pub fn clamped(values: &[f64]) -> Self {
        BoxElem(values.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }

    /// `sign(y)` nodally, with `sign(0) = 0`.
    pub fn sign_of(y: &[f64]) -> Self {
        BoxElem(
            y.iter()
                .map(|&v| {
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for BoxElem {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveSets {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub inactive: Vec<usize>,
}

pub fn active_sets(q: &[f64], tol_active: f64) -> ActiveSets {
    let mut sets = ActiveSets {
        plus: Vec::new(),
        minus: Vec::new(),
        inactive: Vec::new(),
    };
    for (i, &v) in q.iter().enumerate() {
        if v >= 1.0 - tol_active {
            sets.plus.push(i);
        } else if v <= -1.0 + tol_active {
            sets.minus.push(i);
        } else {
            sets.inactive.push(i);
        }
    }
    sets
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConeTag {
    Free,
    NonNeg,
    NonPos,
    Zero,
}

impl ConeTag {
    pub fn polar(self) -> ConeTag {
        match self {
            ConeTag::Free => ConeTag::Zero,
            ConeTag::Zero => ConeTag::Free,
            ConeTag::NonNeg => ConeTag::NonPos,
            ConeTag::NonPos => ConeTag::NonNeg,
        }
    }

    pub fn bound(self) -> Bound {
        match self {
            ConeTag::Free => Bound::Free,
            ConeTag::NonNeg => Bound::NonNeg,
            ConeTag::NonPos => Bound::NonPos,
            ConeTag::Zero => Bound::Zero,
        }
    }

    pub fn project(self, v: f64) -> f64 {
        self.bound().project(v)
    }

    fn admits(self, v: f64, tol: f64) -> bool {
        match self {
            ConeTag::Free => true,
            ConeTag::NonNeg => v >= -tol,
            ConeTag::NonPos => v <= tol,
            ConeTag::Zero => v.abs() <= tol,
        }
    }
}

/// Polyhedral cone `{z : tag_i(z_i) for all i, wᵀz = 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    pub tags: Vec<ConeTag>,
    pub equality: Option<Vec<f64>>,
}

impl ConeSpec {
    pub fn from_tags(tags: Vec<ConeTag>) -> Self {
        ConeSpec {
            tags,
            equality: None,
        }
    }

    pub fn whole_space(n: usize) -> Self {
        Self::from_tags(vec![ConeTag::Free; n])
    }

    pub fn zero(n: usize) -> Self {
        Self::from_tags(vec![ConeTag::Zero; n])
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// True if the cone is `{0}`.
    pub fn is_trivial(&self) -> bool {
        self.tags.iter().all(|&t| t == ConeTag::Zero)
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.tags.len()
            && self.tags.iter().zip(z).all(|(t, &v)| t.admits(v, tol))
            && self
                .equality
                .as_ref()
                .is_none_or(|w| linalg::dot(w, z).abs() <= tol)
    }

    pub fn bounds(&self) -> Vec<Bound> {
        self.tags.iter().map(|t| t.bound()).collect()
    }

    /// Coordinatewise projection; valid in any diagonally weighted pairing.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, ConeError> {
        if self.equality.is_some() {
            return Err(ConeError::EqualityPresent);
        }
        Ok(self
            .tags
            .iter()
            .zip(v)
            .map(|(t, &x)| t.project(x))
            .collect())
    }

    /// Polar in the pairing `Σ m_i z_i v_i`. The weights are positive, so
    /// they do not enter the tags.
    pub fn polar(&self, weights: &[f64]) -> Result<ConeSpec, ConeError> {
        debug_assert!(weights.iter().all(|&m| m > 0.0));
        if self.equality.is_some() {
            return Err(ConeError::EqualityPresent);
        }
        Ok(ConeSpec::from_tags(
            self.tags.iter().map(|t| t.polar()).collect(),
        ))
    }
}

/// Tangent cone of `M` at `q`. For a finite box this is also the radial
/// cone, which is already closed.
pub fn tangent_cone(q: &[f64], tol_active: f64) -> ConeSpec {
    let sets = active_sets(q, tol_active);
    let mut tags = vec![ConeTag::Free; q.len()];
    for &i in &sets.plus {
        tags[i] = ConeTag::NonPos;
    }
    for &i in &sets.minus {
        tags[i] = ConeTag::NonNeg;
    }
    ConeSpec::from_tags(tags)
}

/// `Σ m_i (|y_i| − q_i y_i)`, the gap between `<q, y>` and its maximum
/// over `M`. Nonnegative for `q ∈ M`.
pub fn normal_gap(weights: &[f64], q: &[f64], y: &[f64]) -> f64 {
    weights
        .iter()
        .zip(q)
        .zip(y)
        .map(|((m, q), y)| m * (y.abs() - q * y))
        .sum()
}

/// Whether `y ∈ N_M(q)`, i.e. `q` maximizes `<p, y>` over `M` up to `tol`.
pub fn normal_cone_contains(sys: &FemSystem, q: &BoxElem, y: &PrimalVec, tol: f64) -> bool {
    normal_gap(sys.lumped(), q, y) <= tol
}

/// Smallest `|y_i|` treated as nonzero when classifying a computed `y`.
pub fn zero_threshold(y: &[f64]) -> f64 {
    (1e-7 * linalg::norm_inf(y)).max(1e-12)
}

/// Critical cone `T_M(q) ∩ y⊥` for `y ∈ N_M(q)`.
///
/// Each term `m_i z_i y_i` of `<z, y>` is `<= 0` on `T_M(q)`, so the
/// equality forces `z_i = 0` wherever `y_i ≠ 0` and is dropped.
pub fn critical_cone(
    q: &[f64],
    y: &[f64],
    tol_active: f64,
    zero_tol: f64,
) -> Result<ConeSpec, ConeError> {
    assert_eq!(q.len(), y.len());
    let mut worst = 0.0_f64;
    for (&qi, &yi) in q.iter().zip(y) {
        if yi.abs() > zero_tol {
            let mismatch = (qi - yi.signum()).abs();
            if mismatch > tol_active {
                worst = worst.max(mismatch * yi.abs());
            }
        }
    }
    if worst > 0.0 {
        return Err(ConeError::NotNormal(worst));
    }
    let mut cone = tangent_cone(q, tol_active);
    for (tag, &yi) in cone.tags.iter_mut().zip(y) {
        if yi.abs() > zero_tol {
            *tag = ConeTag::Zero;
        }
    }
    Ok(cone)
}

/// Axis-aligned box `[lower, upper]` in `R^d` with the Euclidean pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct FdBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl FdBox {
    pub fn symmetric(d: usize) -> Self {
        FdBox {
            lower: vec![-1.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedricityCertificate {
    /// Both cones reduce to the same tag vector.
    pub symbolic_match: bool,
    pub critical_tags: Vec<ConeTag>,
    pub samples: usize,
    /// Largest distance between the projections of a sample onto
    /// `T ∩ η⊥` and onto `R ∩ η⊥`.
    pub max_projection_gap: f64,
    /// Largest violation of radial membership by a projection onto `T ∩ η⊥`.
    pub max_membership_violation: f64,
    pub passed: bool,
}

const FD_TOL: f64 = 1e-10;

/// Checks `T(w) ∩ η⊥ = cl(R(w) ∩ η⊥)` for a finite-dimensional box.
///
/// (a) reduces both cone descriptions symbolically and compares tags;
/// (b) projects random vectors onto both sets with the active-set QP solver
/// and compares, and checks that every projection onto `T ∩ η⊥` is a radial
/// direction. Polyhedral sets are polyhedric, so this always passes.
pub fn polyhedricity_check_fd<R: Rng + ?Sized>(
    bx: &FdBox,
    w: &[f64],
    eta: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<PolyhedricityCertificate, ConeError> {
    let d = bx.dim();
    assert!(w.len() == d && eta.len() == d);
    let outside = |i: &usize| {
        w[*i].is_nan() || w[*i] < bx.lower[*i] - FD_TOL || w[*i] > bx.upper[*i] + FD_TOL
    };
    if let Some(i) = (0..d).find(outside) {
        return Err(ConeError::OutsideBox(i));
    }
    let at_upper = |i: usize| w[i] >= bx.upper[i] - FD_TOL;
    let at_lower = |i: usize| w[i] <= bx.lower[i] + FD_TOL;
    // η ∈ N(w): sign pattern compatible with the active bounds
    let gap = eta
        .iter()
        .enumerate()
        .filter(|&(i, &e)| !(e == 0.0 || (e > 0.0 && at_upper(i)) || (e < 0.0 && at_lower(i))))
        .map(|(_, e)| e.abs())
        .fold(0.0_f64, f64::max);
    if gap > 0.0 {
        return Err(ConeError::NotNormal(gap));
    }

    // tangent cone via closure of feasible directions (tolerant test)
    let tangent: Vec<ConeTag> = (0..d)
        .map(|i| match (at_lower(i), at_upper(i)) {
            (true, true) => ConeTag::Zero,
            (false, true) => ConeTag::NonPos,
            (true, false) => ConeTag::NonNeg,
            (false, false) => ConeTag::Free,
        })
        .collect();
    // radial cone via a positive step staying in the box (exact test)
    let radial: Vec<ConeTag> = (0..d)
        .map(|i| {
            let up = w[i] < bx.upper[i];
            let down = w[i] > bx.lower[i];
            match (up, down) {
                (true, true) => ConeTag::Free,
                (true, false) => ConeTag::NonNeg,
                (false, true) => ConeTag::NonPos,
                (false, false) => ConeTag::Zero,
            }
        })
        .collect();
    let reduce = |tags: &[ConeTag]| -> Vec<ConeTag> {
        tags.iter()
            .zip(eta)
            .map(|(&t, &e)| if e != 0.0 { ConeTag::Zero } else { t })
            .collect()
    };
    let crit_t = reduce(&tangent);
    let crit_r = reduce(&radial);
    let symbolic_match = crit_t == crit_r;

    let id = SymBanded::identity(d);
    let tangent_bounds: Vec<Bound> = tangent.iter().map(|t| t.bound()).collect();
    let radial_bounds: Vec<Bound> = radial.iter().map(|t| t.bound()).collect();
    let mut max_gap = 0.0_f64;
    let mut max_violation = 0.0_f64;
    let mut solver_ok = true;
    for _ in 0..samples {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pt =
            QpProblem::direct(&id, v.clone(), tangent_bounds.clone()).with_equality(eta.to_vec());
        let pr = QpProblem::direct(&id, v, radial_bounds.clone()).with_equality(eta.to_vec());
        let (Ok(st), Ok(sr)) = (solve_qp(&pt, 1e-12, 100), solve_qp(&pr, 1e-12, 100)) else {
            solver_ok = false;
            break;
        };
        let g =
            st.x.iter()
                .zip(&sr.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        max_gap = max_gap.max(g);
        // radial membership of the tangent projection: w + t p stays in the box
        // for some t > 0 and <η, p> = 0
        let mut viol = linalg::dot(eta, &st.x).abs();
        for (i, &p) in st.x.iter().enumerate() {
            if p > FD_TOL && w[i] >= bx.upper[i] {
                viol = viol.max(p);
            }
            if p < -FD_TOL && w[i] <= bx.lower[i] {
                viol = viol.max(-p);
            }
        }
        max_violation = max_violation.max(viol);
    }
    let passed = solver_ok && symbolic_match && max_gap <= FD_TOL && max_violation <= FD_TOL;
    Ok(PolyhedricityCertificate {
        symbolic_match,
        critical_tags: crit_t,
        samples,
        max_projection_gap: max_gap,
        max_membership_violation: max_violation,
        passed,
    })
}

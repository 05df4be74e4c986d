//! Second-kind variational inequalities with an `L¹` term on P1 finite
//! elements.
//!
//! The problem `<Ay - f, v - y> + j(v) - j(y) >= 0` with `j(v) = ∫|v|` is
//! solved both directly and through its dual, a projection onto the box
//! `M = {q : -1 <= q <= 1}` in the `A⁻¹` metric. On top of the solvers sit
//! directional derivatives of the solution maps, capacities of node sets,
//! and a refinement study showing that the box `M` fails to be polyhedric
//! in the dual norm as the mesh is refined.

pub mod cones;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod qp;
pub mod sensitivity;
pub mod vi;
pub mod witness;

pub use error::{ConeError, DensityError, FemError, MeshError, QpError, SolveError, WitnessError};
pub use fem::{Alignment, DualVec, FemSystem, Mesh, PrimalVec};

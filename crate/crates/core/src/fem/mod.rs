//! Meshes, P1 assembly, load vectors and the stiffness dual norm.

mod load;
mod mesh;
mod system;
mod vectors;

pub use load::{
    assemble_load, load_vector, nodal_load, parse_nodal_values, point_load, vertical_line_load,
    DensitySpec,
};
pub use mesh::{Alignment, Mesh};
pub use system::FemSystem;
pub use vectors::{DualVec, PrimalVec};

use crate::error::FemError;
use crate::fem::{DualVec, Mesh, PrimalVec};
use crate::linalg::{BandCholesky, SymBanded};

/// Assembled P1 operators on the interior nodes of a mesh.
///
/// * `stiffness` realizes `E(u, v) = ∫ ∇u·∇v`, the operator `A = -Δ`.
/// * `lumped` holds the row-sum mass weights `m_i`, the discrete measure.
/// * `e1 = stiffness + consistent mass`, the form used for capacities.
#[derive(Clone, Debug)]
pub struct FemSystem {
    mesh: Mesh,
    stiffness: SymBanded,
    mass: SymBanded,
    e1: SymBanded,
    lumped: Vec<f64>,
    lumped_full: Vec<f64>,
    stiffness_factor: BandCholesky,
    e1_factor: BandCholesky,
}

/// Local stiffness and consistent mass matrices of cell `c`.
pub(crate) fn local_matrices(mesh: &Mesh, c: usize) -> (Vec<f64>, Vec<f64>) {
    let cell = mesh.cell(c);
    let meas = mesh.cell_measure(c);
    match mesh.dim() {
        1 => {
            let h = meas;
            let k = vec![1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h];
            let m = vec![h / 3.0, h / 6.0, h / 6.0, h / 3.0];
            (k, m)
        }
        _ => {
            let p: Vec<&[f64]> = cell.iter().map(|&v| mesh.vertex(v)).collect();
            // ∇λ_i = rot(p_{i+2} - p_{i+1}) / (2A), up to orientation sign
            // which cancels in the products.
            let grads: Vec<[f64; 2]> = (0..3)
                .map(|i| {
                    let a = p[(i + 1) % 3];
                    let b = p[(i + 2) % 3];
                    [(a[1] - b[1]) / (2.0 * meas), (b[0] - a[0]) / (2.0 * meas)]
                })
                .collect();
            let mut k = vec![0.0; 9];
            let mut m = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    k[3 * i + j] = meas * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    m[3 * i + j] = meas / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
            }
            (k, m)
        }
    }
}

impl FemSystem {
    pub fn assemble(mesh: &Mesh) -> Result<Self, FemError> {
        let n = mesh.num_interior();
        let mut bw = 0;
        for cell in mesh.cells() {
            let idx: Vec<usize> = cell
                .iter()
                .filter_map(|&v| mesh.interior_index(v))
                .collect();
            for &a in &idx {
                for &b in &idx {
                    bw = bw.max(a.abs_diff(b));
                }
            }
        }
        let mut stiffness = SymBanded::zeros(n, bw);
        let mut mass = SymBanded::zeros(n, bw);
        let mut lumped_full = vec![0.0; mesh.num_vertices()];
        let w = mesh.dim() + 1;
        for c in 0..mesh.num_cells() {
            let cell = mesh.cell(c);
            let (kl, ml) = local_matrices(mesh, c);
            for a in 0..w {
                lumped_full[cell[a]] += (0..w).map(|b| ml[a * w + b]).sum::<f64>();
                let Some(ia) = mesh.interior_index(cell[a]) else {
                    continue;
                };
                for b in 0..=a {
                    let Some(ib) = mesh.interior_index(cell[b]) else {
                        continue;
                    };
                    // diagonal visited once per (a, a); off-diagonal pairs once
                    // per unordered pair, which `add` mirrors.
                    stiffness.add(ia, ib, kl[a * w + b]);
                    mass.add(ia, ib, ml[a * w + b]);
                }
            }
        }
        let lumped = mesh.interior().iter().map(|&v| lumped_full[v]).collect();
        let e1 = stiffness.sum(&mass);
        let stiffness_factor = stiffness.cholesky()?;
        let e1_factor = e1.cholesky()?;
        Ok(FemSystem {
            mesh: mesh.clone(),
            stiffness,
            mass,
            e1,
            lumped,
            lumped_full,
            stiffness_factor,
            e1_factor,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn len(&self) -> usize {
        self.lumped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lumped.is_empty()
    }

    pub fn stiffness(&self) -> &SymBanded {
        &self.stiffness
    }

    pub fn consistent_mass(&self) -> &SymBanded {
        &self.mass
    }

    pub fn e1(&self) -> &SymBanded {
        &self.e1
    }

    pub fn stiffness_factor(&self) -> &BandCholesky {
        &self.stiffness_factor
    }

    pub fn e1_factor(&self) -> &BandCholesky {
        &self.e1_factor
    }

    /// Lumped mass weights `m_i > 0` of the interior nodes.
    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    /// Lumped mass weights of every vertex, boundary included.
    pub fn lumped_all_vertices(&self) -> &[f64] {
        &self.lumped_full
    }

    fn check_len(&self, got: usize) -> Result<(), FemError> {
        if got != self.len() {
            return Err(FemError::Length {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// `u = K⁻¹ r`.
    pub fn apply_inverse(&self, r: &DualVec) -> Result<PrimalVec, FemError> {
        self.check_len(r.len())?;
        Ok(PrimalVec::new(self.stiffness_factor.solve(r)))
    }

    /// `K v` as a functional.
    pub fn apply_stiffness(&self, v: &PrimalVec) -> DualVec {
        DualVec::new(self.stiffness.matvec(v))
    }

    /// The functional `D q` induced by nodal values `q`, `D = diag(m)`.
    pub fn lumped_functional(&self, q: &[f64]) -> DualVec {
        DualVec::new(q.iter().zip(&self.lumped).map(|(a, m)| a * m).collect())
    }

    /// `sqrt(rᵀ K⁻¹ r)`.
    pub fn dual_norm(&self, r: &DualVec) -> Result<f64, FemError> {
        self.check_len(r.len())?;
        let u = self.stiffness_factor.solve(r);
        let sq = crate::linalg::dot(r, &u);
        if sq < -1e-12 {
            return Err(FemError::NegativeRadicand(sq));
        }
        Ok(sq.max(0.0).sqrt())
    }

    /// `sqrt(vᵀ K v)`.
    pub fn energy_norm(&self, v: &PrimalVec) -> f64 {
        self.stiffness.quad_form(v).max(0.0).sqrt()
    }
}

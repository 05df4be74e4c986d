//! Refinement study exhibiting the failure of polyhedricity of `M` in the
//! dual norm.
//!
//! Take `y = sin(2πx)` on `(0,1)` and `q = sign(y)`. The one-sided
//! indicators `ν_n = −(n/2) χ_(1/2 − 1/n, 1/2)` have `<ν_n, y> < 0` and
//! converge to `ν = −½ δ_{1/2}`, which pairs to zero with `y`. Each `ν_n`
//! points into `M` at `q`, yet `ν` stays a fixed distance away from
//! `R_M(q) ∩ y⊥` on meshes where `1/2` is not a node. When `1/2` is a node
//! the discrete cone does reach `ν`, but only through nodal values of size
//! `1/(2h)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::cones::{critical_cone, normal_cone_contains, zero_threshold, BoxElem, TOL_ACTIVE};
use crate::error::{SolveError, WitnessError};
use crate::fem::{
    assemble_load, point_load, vertical_line_load, Alignment, DensitySpec, DualVec, FemSystem,
    Mesh, PrimalVec,
};
use crate::qp::cone_distance;
use crate::vi::capacity;

/// Location of the zero of `y`.
pub const X0: f64 = 0.5;

/// `sin(2π i / n)`, exactly zero when `2i` is a multiple of `n`.
fn sin_2pi(i: usize, n: usize) -> f64 {
    if (2 * i).is_multiple_of(n) {
        0.0
    } else {
        (2.0 * PI * i as f64 / n as f64).sin()
    }
}

#[derive(Clone, Debug)]
pub struct WitnessScenario {
    pub sys: FemSystem,
    /// Interpolant of `sin(2πx)` (times `sin(πx₂)` on the square).
    pub y: PrimalVec,
    /// `sign(y)` with `sign(0) = 0`.
    pub q: BoxElem,
    /// `−½ δ_{1/2}` on the interval, `−½` times the unit line density on
    /// `{1/2} × (0,1)` on the square.
    pub nu: DualVec,
    /// Indicator widths `1/n` the scenario resolves.
    pub n_list: Vec<usize>,
}

fn check_resolution(elements: usize, n_list: &[usize]) -> Result<(), WitnessError> {
    match n_list.iter().find(|&&n| n == 0 || elements < 4 * n) {
        Some(&n) => Err(WitnessError::Resolution { n, elements }),
        None => Ok(()),
    }
}

fn finish(
    mesh: Mesh,
    y: Vec<f64>,
    nu: DualVec,
    n_list: &[usize],
) -> Result<WitnessScenario, WitnessError> {
    let sys = FemSystem::assemble(&mesh)?;
    let q = BoxElem::sign_of(&y);
    let y = PrimalVec::new(y);
    if !normal_cone_contains(&sys, &q, &y, 0.0) {
        return Err(WitnessError::NormalCone);
    }
    Ok(WitnessScenario {
        sys,
        y,
        q,
        nu,
        n_list: n_list.to_vec(),
    })
}

/// Interval scenario with `n_elements` elements. Requires `1/n >= 4h` for
/// every `n` in `n_list`.
pub fn build_scenario(
    n_elements: usize,
    alignment: Alignment,
    n_list: &[usize],
) -> Result<WitnessScenario, WitnessError> {
    let mesh = Mesh::build(1, n_elements, Some(alignment))?;
    check_resolution(n_elements, n_list)?;
    let y: Vec<f64> = mesh
        .interior()
        .iter()
        .map(|&v| sin_2pi(v, n_elements))
        .collect();
    let nu = point_load(&mesh, &[X0], -0.5);
    finish(mesh, y, nu, n_list)
}

/// Square variant: `y = sin(2πx₁) sin(πx₂)` vanishes on the segment
/// `{1/2} × (0,1)`, and `ν_n` are strips of width `1/n` left of it.
pub fn build_scenario_square(
    n_elements: usize,
    alignment: Alignment,
    n_list: &[usize],
) -> Result<WitnessScenario, WitnessError> {
    let mesh = Mesh::build(2, n_elements, Some(alignment))?;
    check_resolution(n_elements, n_list)?;
    let side = n_elements + 1;
    let y: Vec<f64> = mesh
        .interior()
        .iter()
        .map(|&v| {
            sin_2pi(v % side, n_elements) * (PI * (v / side) as f64 / n_elements as f64).sin()
        })
        .collect();
    let nu = vertical_line_load(&mesh, X0, -0.5);
    finish(mesh, y, nu, n_list)
}

impl WitnessScenario {
    pub fn mesh(&self) -> &Mesh {
        self.sys.mesh()
    }

    pub fn alignment(&self) -> Alignment {
        self.mesh().alignment()
    }

    /// Nodes with `y_i = 0`.
    pub fn zero_nodes(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i] == 0.0).collect()
    }

    /// Nodes of the capacity column: the interior node nearest `1/2`, or on
    /// the square the node column nearest `x₁ = 1/2`.
    pub fn capacity_nodes(&self) -> Vec<usize> {
        let mesh = self.mesh();
        let centre = vec![X0; mesh.dim()];
        let Some(k) = mesh.nearest_interior(&centre) else {
            return Vec::new();
        };
        if mesh.dim() == 1 {
            return vec![k];
        }
        let xc = mesh.node(k)[0];
        mesh.interior_in_box(&[xc, 0.0], &[xc, 1.0])
    }
}

/// `ν_n`, the load of `−(n/2) χ_(1/2 − 1/n, 1/2)`; total mass `−1/2`.
pub fn nu_sequence(sc: &WitnessScenario, n: usize) -> Result<DualVec, WitnessError> {
    check_resolution(sc.mesh().elements_per_side(), &[n])?;
    let spec = DensitySpec::Box {
        a: X0 - 1.0 / n as f64,
        b: X0,
        height: -(n as f64) / 2.0,
    };
    assemble_load(sc.mesh(), &spec)
        .map_err(|e| WitnessError::Solve(SolveError::Invalid(e.to_string())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessRecord {
    pub alignment: Alignment,
    pub h: f64,
    pub n: usize,
    /// `‖ν_n − ν‖`.
    pub d1: f64,
    /// `<ν_n, y>`.
    pub pairing: f64,
    /// `dist(ν, R_M(q) ∩ y⊥)`.
    pub d2: f64,
    /// `‖z‖∞` of the minimizer behind `d2`.
    pub z_supnorm: f64,
    /// Capacity of [`WitnessScenario::capacity_nodes`].
    pub cap_node: f64,
    /// Lumped mass of the node nearest `1/2`.
    pub node_mass: f64,
}

/// All witness quantities for one indicator width on one scenario.
pub fn witness_record(sc: &WitnessScenario, n: usize) -> Result<WitnessRecord, WitnessError> {
    let sys = &sc.sys;
    let nu_n = nu_sequence(sc, n)?;
    let d1 = sys.dual_norm(&(&nu_n - &sc.nu))?;
    let pairing = nu_n.pair(&sc.y);
    let cone =
        critical_cone(&sc.q, &sc.y, TOL_ACTIVE, zero_threshold(&sc.y)).map_err(SolveError::from)?;
    let dist = cone_distance(sys, &sc.nu, &cone).map_err(SolveError::from)?;
    let nodes = sc.capacity_nodes();
    let cap_node = capacity(sys, &nodes)?;
    let node_mass = nodes.first().map_or(0.0, |&k| sys.lumped()[k]);
    Ok(WitnessRecord {
        alignment: sc.alignment(),
        h: sc.mesh().h(),
        n,
        d1,
        pairing,
        d2: dist.distance,
        z_supnorm: dist.sup_norm,
        cap_node,
        node_mass,
    })
}

/// How the mesh size follows the indicator width in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HRule {
    /// `factor · n` elements, raised by one if the parity does not match the
    /// alignment.
    Coupled { factor: usize },
    /// The same element count for every `n`.
    Fixed(usize),
}

impl HRule {
    pub fn elements(self, n: usize, alignment: Alignment) -> usize {
        match self {
            HRule::Coupled { factor } => {
                let e = factor * n;
                if Alignment::for_elements(e) == alignment {
                    e
                } else {
                    e + 1
                }
            }
            HRule::Fixed(e) => e,
        }
    }
}

/// One record per `n` on interval meshes, in the order of `n_list`.
pub fn witness_sweep(
    alignment: Alignment,
    n_list: &[usize],
    rule: HRule,
) -> Result<Vec<WitnessRecord>, WitnessError> {
    for &n in n_list {
        check_resolution(rule.elements(n, alignment), &[n])?;
    }
    n_list
        .par_iter()
        .map(|&n| {
            let sc = build_scenario(rule.elements(n, alignment), alignment, &[n])?;
            witness_record(&sc, n)
        })
        .collect()
}

pub const CSV_HEADER: &str = "alignment,h,n,d1,pairing,d2,z_supnorm,cap_node";

/// CSV with [`CSV_HEADER`]; floats carry 12 significant digits.
pub fn records_to_csv(records: &[WitnessRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:.11e},{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            r.alignment, r.h, r.n, r.d1, r.pairing, r.d2, r.z_supnorm, r.cap_node
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn offset_mesh_has_no_zero_node() {
        let sc = build_scenario(255, Alignment::Offset, &[8]).unwrap();
        assert!(sc.zero_nodes().is_empty());
        assert!(sc.q.iter().all(|&v| v.abs() == 1.0));
    }

    #[test]
    fn aligned_mesh_has_one_zero_node() {
        let sc = build_scenario(256, Alignment::Aligned, &[8]).unwrap();
        let zeros = sc.zero_nodes();
        assert_eq!(zeros.len(), 1);
        assert_eq!(sc.mesh().node(zeros[0]), &[0.5]);
        assert_eq!(sc.q[zeros[0]], 0.0);
    }

    #[test]
    fn resolution_and_parity_are_checked() {
        assert!(matches!(
            build_scenario(63, Alignment::Offset, &[16]),
            Err(WitnessError::Resolution {
                n: 16,
                elements: 63
            })
        ));
        assert!(matches!(
            build_scenario(64, Alignment::Offset, &[4]),
            Err(WitnessError::Mesh(_))
        ));
    }

    #[test]
    fn nu_sequence_mass_and_support() {
        let sc = build_scenario(161, Alignment::Offset, &[16]).unwrap();
        for n in [4, 8, 16] {
            let nu = nu_sequence(&sc, n).unwrap();
            assert!((nu.iter().sum::<f64>() + 0.5).abs() < 1e-13);
            let h = sc.mesh().h();
            for k in 0..nu.len() {
                let x = sc.mesh().node(k)[0];
                if x < 0.5 - 1.0 / n as f64 - h || x > 0.5 + h {
                    assert_eq!(nu[k], 0.0);
                }
            }
        }
        assert!((sc.nu.iter().sum::<f64>() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn offset_record() {
        let sc = build_scenario(641, Alignment::Offset, &[64]).unwrap();
        let r = witness_record(&sc, 64).unwrap();
        assert!((r.d2 - sc.sys.dual_norm(&sc.nu).unwrap()).abs() < 1e-14);
        assert!(r.d2 > 0.24 && r.d2 < 0.26);
        assert_eq!(r.z_supnorm, 0.0);
        let exact = -(64.0 / (4.0 * PI)) * (1.0 - (2.0 * PI / 64.0).cos());
        assert!(r.pairing < 0.0 && ((r.pairing - exact) / exact).abs() < 1e-2);
        assert!(r.cap_node >= 4.0);
    }

    #[test]
    fn aligned_record_blows_up() {
        let sc = build_scenario(256, Alignment::Aligned, &[16]).unwrap();
        let r = witness_record(&sc, 16).unwrap();
        assert!(r.d2 <= 1e-9);
        assert!((r.z_supnorm * r.h - 0.5).abs() < 1e-9);
        assert!(r.pairing < 0.0);
        assert!((r.node_mass - r.h).abs() < 1e-15);
    }

    #[test]
    fn sweep_keeps_order_and_formats() {
        let recs =
            witness_sweep(Alignment::Offset, &[8, 4], HRule::Coupled { factor: 10 }).unwrap();
        assert_eq!(recs.iter().map(|r| r.n).collect::<Vec<_>>(), vec![8, 4]);
        assert!((recs[0].h - 1.0 / 81.0).abs() < 1e-15);
        let csv = records_to_csv(&recs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("offset,1.23456790123e-2,8,"));
    }

    #[test]
    fn square_scenario() {
        let sc = build_scenario_square(24, Alignment::Aligned, &[4]).unwrap();
        // the zero set is the whole column x₁ = 1/2
        assert_eq!(sc.zero_nodes().len(), 23);
        // the boundary rows carry the missing mass h/2
        let h = sc.mesh().h();
        assert!((sc.nu.iter().sum::<f64>() + 0.5 * (1.0 - h)).abs() < 1e-13);
        let r = witness_record(&sc, 4).unwrap();
        assert!(r.pairing < 0.0);
        assert!(r.d2 < 1e-9);
        assert!(linalg::norm_inf(&sc.y) <= 1.0);
    }
}

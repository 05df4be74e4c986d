//! Load vectors `r_i = ∫ f φ_i` for the supported density specs.
//!
//! Grammar:
//!
//! ```text
//! const:<float>               constant density
//! sin:<int>                   sin(kπx), 1D only
//! box:<a>,<b>,<height>        height · indicator of (a, b); in 2D the strip (a, b) × (0, 1)
//! file:<path>                 nodal values of every vertex, consistent-mass load
//! ```
//!
//! All integrals are evaluated in closed form per element.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::DensityError;
use crate::fem::system::local_matrices;
use crate::fem::{DualVec, Mesh};

#[derive(Clone, Debug, PartialEq)]
pub enum DensitySpec {
    Const(f64),
    Sin(i64),
    Box { a: f64, b: f64, height: f64 },
    File(String),
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Const(c) => write!(f, "const:{c}"),
            DensitySpec::Sin(k) => write!(f, "sin:{k}"),
            DensitySpec::Box { a, b, height } => write!(f, "box:{a},{b},{height}"),
            DensitySpec::File(p) => write!(f, "file:{p}"),
        }
    }
}

fn parse_float(spec: &str, s: &str) -> Result<f64, DensityError> {
    let v: f64 = s.trim().parse().map_err(|_| DensityError::Malformed {
        spec: spec.to_string(),
        reason: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(DensityError::Malformed {
            spec: spec.to_string(),
            reason: format!("`{s}` is not finite"),
        });
    }
    Ok(v)
}

impl FromStr for DensitySpec {
    type Err = DensityError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| DensityError::Unknown(spec.to_string()))?;
        match kind.trim() {
            "const" => Ok(DensitySpec::Const(parse_float(spec, arg)?)),
            "sin" => {
                arg.trim()
                    .parse()
                    .map(DensitySpec::Sin)
                    .map_err(|_| DensityError::Malformed {
                        spec: spec.to_string(),
                        reason: format!("`{arg}` is not an integer"),
                    })
            }
            "box" => {
                let parts: Vec<&str> = arg.split(',').collect();
                if parts.len() != 3 {
                    return Err(DensityError::Malformed {
                        spec: spec.to_string(),
                        reason: "expected box:<a>,<b>,<height>".into(),
                    });
                }
                let a = parse_float(spec, parts[0])?;
                let b = parse_float(spec, parts[1])?;
                let height = parse_float(spec, parts[2])?;
                if a > b {
                    return Err(DensityError::Malformed {
                        spec: spec.to_string(),
                        reason: format!("empty interval ({a}, {b})"),
                    });
                }
                Ok(DensitySpec::Box { a, b, height })
            }
            "file" if !arg.trim().is_empty() => Ok(DensitySpec::File(arg.trim().to_string())),
            "file" => Err(DensityError::Malformed {
                spec: spec.to_string(),
                reason: "missing path".into(),
            }),
            _ => Err(DensityError::Unknown(spec.to_string())),
        }
    }
}

/// Parses `spec` and assembles its load vector on `mesh`.
pub fn load_vector(mesh: &Mesh, spec: &str) -> Result<DualVec, DensityError> {
    let parsed: DensitySpec = spec.parse()?;
    assemble_load(mesh, &parsed)
}

pub fn assemble_load(mesh: &Mesh, spec: &DensitySpec) -> Result<DualVec, DensityError> {
    match spec {
        DensitySpec::Const(c) => Ok(constant(mesh, *c)),
        DensitySpec::Sin(k) => {
            if mesh.dim() != 1 {
                return Err(DensityError::OneDimensionalOnly(spec.to_string()));
            }
            Ok(sine(mesh, *k as f64 * PI))
        }
        DensitySpec::Box { a, b, height } => Ok(strip(mesh, *a, *b, *height)),
        DensitySpec::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| DensityError::File {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            let values = parse_nodal_values(&text).map_err(|reason| DensityError::File {
                path: path.clone(),
                reason,
            })?;
            nodal_load(mesh, &values).map_err(|reason| DensityError::File {
                path: path.clone(),
                reason,
            })
        }
    }
}

/// Reads numbers separated by commas, whitespace or newlines; `#` starts a
/// comment line.
pub fn parse_nodal_values(text: &str) -> Result<Vec<f64>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        })
        .collect()
}

/// Consistent-mass load of the P1 interpolant with the given values at
/// every vertex.
pub fn nodal_load(mesh: &Mesh, values: &[f64]) -> Result<DualVec, String> {
    if values.len() != mesh.num_vertices() {
        return Err(format!(
            "expected {} nodal values (one per vertex), got {}",
            mesh.num_vertices(),
            values.len()
        ));
    }
    let mut r = vec![0.0; mesh.num_interior()];
    let w = mesh.dim() + 1;
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let (_, m) = local_matrices(mesh, c);
        for a in 0..w {
            if let Some(k) = mesh.interior_index(cell[a]) {
                r[k] += (0..w).map(|b| m[a * w + b] * values[cell[b]]).sum::<f64>();
            }
        }
    }
    Ok(DualVec::new(r))
}

fn constant(mesh: &Mesh, c: f64) -> DualVec {
    let mut r = vec![0.0; mesh.num_interior()];
    let w = mesh.dim() + 1;
    for cell_id in 0..mesh.num_cells() {
        // ∫_T φ = |T| / (d + 1)
        let share = c * mesh.cell_measure(cell_id) / w as f64;
        for &v in mesh.cell(cell_id) {
            if let Some(k) = mesh.interior_index(v) {
                r[k] += share;
            }
        }
    }
    DualVec::new(r)
}

/// `∫_0^h s sin(θ + ω s) ds` and `∫_0^h sin(θ + ω s) ds` in local variables,
/// which keeps the O(h²) result free of O(1) cancellation.
fn sine_moments(theta: f64, omega: f64, h: f64) -> (f64, f64) {
    let big = omega * h;
    let half = 0.5 * big;
    // ∫ sin(θ + ωs) ds = 2 sin(H/2) sin(θ + H/2) / ω
    let m0 = 2.0 * half.sin() * (theta + half).sin() / omega;
    // ∫ s sin(θ + ωs) ds = [sin(θ+u) - u cos(θ+u)]_0^H / ω²
    let m1 = ((theta + big).sin() - theta.sin() - big * (theta + big).cos()) / (omega * omega);
    (m0, m1)
}

fn sine(mesh: &Mesh, omega: f64) -> DualVec {
    let mut r = vec![0.0; mesh.num_interior()];
    if omega == 0.0 {
        return DualVec::new(r);
    }
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let a = mesh.vertex(cell[0])[0];
        let h = mesh.cell_measure(c);
        let (m0, m1) = sine_moments(omega * a, omega, h);
        // rising hat (node b): s / h ; falling hat (node a): 1 - s / h
        let rising = m1 / h;
        let falling = m0 - rising;
        if let Some(k) = mesh.interior_index(cell[0]) {
            r[k] += falling;
        }
        if let Some(k) = mesh.interior_index(cell[1]) {
            r[k] += rising;
        }
    }
    DualVec::new(r)
}

/// `height · ∫_{a<x<b} φ_i`, the strip `(a, b) × (0, 1)` in 2D.
fn strip(mesh: &Mesh, a: f64, b: f64, height: f64) -> DualVec {
    let mut r = vec![0.0; mesh.num_interior()];
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        match mesh.dim() {
            1 => {
                let (xa, xb) = (mesh.vertex(cell[0])[0], mesh.vertex(cell[1])[0]);
                let lo = a.max(xa);
                let hi = b.min(xb);
                if hi <= lo {
                    continue;
                }
                let h = xb - xa;
                let rising = ((hi - xa).powi(2) - (lo - xa).powi(2)) / (2.0 * h);
                let falling = (hi - lo) - rising;
                if let Some(k) = mesh.interior_index(cell[0]) {
                    r[k] += height * falling;
                }
                if let Some(k) = mesh.interior_index(cell[1]) {
                    r[k] += height * rising;
                }
            }
            _ => {
                let tri: Vec<[f64; 2]> = cell
                    .iter()
                    .map(|&v| {
                        let p = mesh.vertex(v);
                        [p[0], p[1]]
                    })
                    .collect();
                let poly = clip_half_plane(&clip_half_plane(&tri, a, 1.0), b, -1.0);
                let (area, centroid) = polygon_area_centroid(&poly);
                if area <= 0.0 {
                    continue;
                }
                // ∫_P λ = |P| λ(centroid) for linear λ
                let lam = mesh.barycentric(c, &centroid);
                for (&v, l) in cell.iter().zip(lam) {
                    if let Some(k) = mesh.interior_index(v) {
                        r[k] += height * area * l;
                    }
                }
            }
        }
    }
    DualVec::new(r)
}

/// Keeps the part of `poly` with `sign · (x - x0) >= 0`.
fn clip_half_plane(poly: &[[f64; 2]], x0: f64, sign: f64) -> Vec<[f64; 2]> {
    let inside = |p: &[f64; 2]| sign * (p[0] - x0) >= 0.0;
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let (ci, pi) = (inside(&cur), inside(&prev));
        if ci != pi {
            let t = (x0 - prev[0]) / (cur[0] - prev[0]);
            out.push([x0, prev[1] + t * (cur[1] - prev[1])]);
        }
        if ci {
            out.push(cur);
        }
    }
    out
}

fn polygon_area_centroid(poly: &[[f64; 2]]) -> (f64, [f64; 2]) {
    if poly.len() < 3 {
        return (0.0, [0.0, 0.0]);
    }
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a2.abs() < 1e-300 {
        return (0.0, [0.0, 0.0]);
    }
    (a2.abs() / 2.0, [cx / (3.0 * a2), cy / (3.0 * a2)])
}

/// `weight · φ_i(point)`: the load of a point mass at `point`.
pub fn point_load(mesh: &Mesh, point: &[f64], weight: f64) -> DualVec {
    let mut r = vec![0.0; mesh.num_interior()];
    for (k, v) in mesh.basis_at(point) {
        r[k] += weight * v;
    }
    DualVec::new(r)
}

/// `weight · ∫_0^1 φ_i(x0, s) ds`: the load of a uniform line density on the
/// vertical segment `{x0} × (0, 1)` of the unit square.
pub fn vertical_line_load(mesh: &Mesh, x0: f64, weight: f64) -> DualVec {
    assert_eq!(mesh.dim(), 2, "line loads live on the unit square");
    let mut r = vec![0.0; mesh.num_interior()];
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let pts: Vec<&[f64]> = cell.iter().map(|&v| mesh.vertex(v)).collect();
        // intersection of the line x = x0 with the closed triangle
        let mut ys = Vec::new();
        for i in 0..3 {
            let (p, q) = (pts[i], pts[(i + 1) % 3]);
            if p[0] == x0 {
                ys.push(p[1]);
            }
            if (p[0] - x0) * (q[0] - x0) < 0.0 {
                let t = (x0 - p[0]) / (q[0] - p[0]);
                ys.push(p[1] + t * (q[1] - p[1]));
            }
        }
        if ys.len() < 2 {
            continue;
        }
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        // a segment on a shared edge belongs to both neighbours; count half
        let on_edge = (0..3).any(|i| pts[i][0] == x0 && pts[(i + 1) % 3][0] == x0);
        let share = if on_edge { 0.5 } else { 1.0 };
        let lam = mesh.barycentric(c, &[x0, 0.5 * (lo + hi)]);
        for (&v, l) in cell.iter().zip(lam) {
            if let Some(k) = mesh.interior_index(v) {
                r[k] += share * weight * len * l;
            }
        }
    }
    DualVec::new(r)
}

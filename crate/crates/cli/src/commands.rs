use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use boxvi::cones::ConeTag;
use boxvi::fem::load_vector;
use boxvi::qp::{TOL_DIRECT, TOL_INVERSE};
use boxvi::sensitivity::{derivative_s, derivative_t, fd_oracle, FdRow};
use boxvi::vi::{energy_gap, solve_dual, solve_obstacle, solve_primal, ViMethod, ViSolution};
use boxvi::witness::{records_to_csv, witness_sweep, HRule};
use boxvi::{Alignment, DualVec, FemSystem, Mesh};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// What a command produces: the main document, side files, and a short
/// human-readable summary.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub main: String,
    pub side: Vec<(PathBuf, String)>,
    pub summary: String,
}

#[derive(Serialize)]
struct MeshInfo {
    dim: usize,
    n: usize,
    h: f64,
    alignment: &'static str,
}

fn mesh_info(mesh: &Mesh) -> MeshInfo {
    MeshInfo {
        dim: mesh.dim(),
        n: mesh.elements_per_side(),
        h: mesh.h(),
        alignment: mesh.alignment().as_str(),
    }
}

fn check_finite(label: &str, values: &[f64]) -> Result<(), CliError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(CliError::Numerical(format!("{label}[{i}] is not finite"))),
        None => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn system(cfg: &RunConfig) -> Result<FemSystem, CliError> {
    let mesh = Mesh::build(cfg.mesh.dim, cfg.mesh.n, cfg.mesh_alignment()?)
        .map_err(|e| CliError::Config(format!("mesh: {e}")))?;
    FemSystem::assemble(&mesh).map_err(|e| CliError::Numerical(e.to_string()))
}

fn load(sys: &FemSystem, field: &str, spec: &str) -> Result<DualVec, CliError> {
    let r = load_vector(sys.mesh(), spec).map_err(|e| CliError::Config(format!("{field}: {e}")))?;
    check_finite(field, &r)?;
    Ok(r)
}

fn nodes(sys: &FemSystem) -> Vec<Vec<f64>> {
    (0..sys.len())
        .map(|k| sys.mesh().node(k).to_vec())
        .collect()
}

fn method_name(m: ViMethod) -> &'static str {
    match m {
        ViMethod::ActiveSet => "active-set",
        ViMethod::ProximalGradient => "proximal-gradient",
        ViMethod::Dual(_) => "dual",
    }
}

#[derive(Serialize)]
struct Residuals {
    duality: f64,
    complementarity: f64,
    dual_duality: f64,
    dual_complementarity: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    command: &'static str,
    mesh: MeshInfo,
    f: String,
    method: &'static str,
    iterations: usize,
    flags: Vec<&'static str>,
    residuals: Residuals,
    cross_check_gap: f64,
    nodes: Vec<Vec<f64>>,
    y: Vec<f64>,
    q: Vec<f64>,
}

fn solved(
    sys: &FemSystem,
    f: &DualVec,
    tol: f64,
) -> Result<(ViSolution, ViSolution, f64), CliError> {
    let p = solve_primal(sys, f, tol)?;
    let d = solve_dual(sys, f, TOL_INVERSE)?;
    let gap = energy_gap(sys, &p.y, &d.y);
    check_finite("y", &p.y)?;
    check_finite("q", &p.q)?;
    check_finite("y_dual", &d.y)?;
    Ok((p, d, gap))
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let sys = system(cfg)?;
    let f = load(&sys, "problem.f", &cfg.problem.f)?;
    let (primal, d, gap) = solved(&sys, &f, cfg.solver.tol)?;
    let mut flags = Vec::new();
    if primal.inactive_interior() {
        flags.push("inactive-interior");
    }
    let residuals = Residuals {
        duality: primal.duality_residual,
        complementarity: primal.complementarity_gap,
        dual_duality: d.duality_residual,
        dual_complementarity: d.complementarity_gap,
    };
    check_finite(
        "residuals",
        &[
            residuals.duality,
            residuals.complementarity,
            residuals.dual_duality,
            residuals.dual_complementarity,
            gap,
        ],
    )?;
    let summary = format!(
        "solve: {} unknowns, {} in {} iterations, duality residual {:.3e}, primal-dual gap {:.3e}{}",
        sys.len(),
        method_name(primal.report.method),
        primal.report.iterations,
        residuals.duality,
        gap,
        if flags.is_empty() { String::new() } else { format!(" [{}]", flags.join(", ")) }
    );
    let out = SolveOutput {
        command: "solve",
        mesh: mesh_info(sys.mesh()),
        f: cfg.problem.f.clone(),
        method: method_name(primal.report.method),
        iterations: primal.report.iterations,
        flags,
        residuals,
        cross_check_gap: gap,
        nodes: nodes(&sys),
        y: primal.y.values().to_vec(),
        q: primal.q.values().to_vec(),
    };
    Ok(Artifacts {
        main: to_json(&out)?,
        side: Vec::new(),
        summary,
    })
}

fn tag_name(t: ConeTag) -> &'static str {
    match t {
        ConeTag::Free => "free",
        ConeTag::NonNeg => "nonneg",
        ConeTag::NonPos => "nonpos",
        ConeTag::Zero => "zero",
    }
}

#[derive(Serialize)]
struct FdOut {
    t: f64,
    err: f64,
    err_hadamard: f64,
}

#[derive(Serialize)]
struct DerivativeOutput {
    command: &'static str,
    mesh: MeshInfo,
    f: String,
    g: String,
    orthogonality_gap: f64,
    formulation_gap: f64,
    cone: Vec<&'static str>,
    nodes: Vec<Vec<f64>>,
    y: Vec<f64>,
    q: Vec<f64>,
    delta: Vec<f64>,
    eta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fd: Option<Vec<FdOut>>,
}

/// `t,err` table with 12 significant digits.
pub fn fd_csv(rows: &[FdRow]) -> String {
    let mut s = String::from("t,err\n");
    for r in rows {
        let _ = writeln!(s, "{:.11e},{:.11e}", r.t, r.err);
    }
    s
}

pub fn cmd_derivative(cfg: &RunConfig, out: Option<&Path>) -> Result<Artifacts, CliError> {
    let sys = system(cfg)?;
    let f = load(&sys, "problem.f", &cfg.problem.f)?;
    let g = load(&sys, "problem.g", &cfg.problem.g)?;
    let (vi, _, _) = solved(&sys, &f, cfg.solver.tol)?;
    let s = derivative_s(&sys, &vi, &g, cfg.solver.tol.min(TOL_DIRECT))?;
    let t = derivative_t(&sys, &vi, &g, TOL_INVERSE)?;
    check_finite("delta", &s.delta)?;
    check_finite("eta", &s.eta)?;
    check_finite("delta_dual", &t.delta)?;
    let formulation_gap = sys.energy_norm(&(&s.delta - &t.delta));
    check_finite("gaps", &[formulation_gap, s.orthogonality_gap])?;

    let mut side = Vec::new();
    let fd = if cfg.derivative.t_list.is_empty() {
        None
    } else {
        let rows = fd_oracle(&sys, &f, &g, &s.delta, &cfg.derivative.t_list)?;
        for r in &rows {
            check_finite("fd", &[r.err, r.err_hadamard])?;
        }
        let path = match (&cfg.derivative.fd_out, out) {
            (Some(p), _) => Some(PathBuf::from(p)),
            (None, Some(o)) => Some(PathBuf::from(format!("{}.fd.csv", o.display()))),
            (None, None) => None,
        };
        if let Some(p) = path {
            side.push((p, fd_csv(&rows)));
        }
        Some(rows)
    };
    let best = fd
        .as_ref()
        .map(|rows| rows.iter().map(|r| r.err).fold(f64::INFINITY, f64::min));
    let summary = format!(
        "derivative: |delta|_inf {:.3e}, formulation gap {:.3e}{}",
        s.delta.norm_inf(),
        formulation_gap,
        best.map_or(String::new(), |b| format!(", best fd error {b:.3e}"))
    );
    let doc = DerivativeOutput {
        command: "derivative",
        mesh: mesh_info(sys.mesh()),
        f: cfg.problem.f.clone(),
        g: cfg.problem.g.clone(),
        orthogonality_gap: s.orthogonality_gap,
        formulation_gap,
        cone: s.cone.tags.iter().map(|&t| tag_name(t)).collect(),
        nodes: nodes(&sys),
        y: vi.y.values().to_vec(),
        q: vi.q.values().to_vec(),
        delta: s.delta.values().to_vec(),
        eta: s.eta.clone(),
        fd: fd.map(|rows| {
            rows.iter()
                .map(|r| FdOut {
                    t: r.t,
                    err: r.err,
                    err_hadamard: r.err_hadamard,
                })
                .collect()
        }),
    };
    Ok(Artifacts {
        main: to_json(&doc)?,
        side,
        summary,
    })
}

#[derive(Serialize)]
struct CapacityOutput {
    command: &'static str,
    mesh: MeshInfo,
    capacity: f64,
    node_indices: Vec<usize>,
    node_coords: Vec<Vec<f64>>,
    nodes: Vec<Vec<f64>>,
    potential: Vec<f64>,
}

pub fn cmd_capacity(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let sys = system(cfg)?;
    let mesh = sys.mesh();
    let mut set = Vec::new();
    for p in &cfg.capacity.points {
        match mesh.nearest_interior(p) {
            Some(k) => set.push(k),
            None => {
                return Err(CliError::Config(format!(
                    "capacity.points: no interior node near {p:?}"
                )))
            }
        }
    }
    for r in &cfg.capacity.regions {
        set.extend(mesh.interior_in_box(&r.lo, &r.hi));
    }
    set.sort_unstable();
    set.dedup();
    let (w, energy) = solve_obstacle(&sys, &set, 1.0)?;
    check_finite("potential", &w)?;
    check_finite("capacity", &[energy])?;
    let doc = CapacityOutput {
        command: "capacity",
        mesh: mesh_info(mesh),
        capacity: energy,
        node_coords: set.iter().map(|&k| mesh.node(k).to_vec()).collect(),
        node_indices: set.clone(),
        nodes: nodes(&sys),
        potential: w.values().to_vec(),
    };
    Ok(Artifacts {
        main: to_json(&doc)?,
        side: Vec::new(),
        summary: format!("capacity: {} nodes, capacity {energy:.6}", set.len()),
    })
}

pub fn cmd_witness(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let alignment = cfg.witness_alignment()?;
    let rule = match (cfg.witness.elements, cfg.witness.h_factor) {
        (Some(e), _) => HRule::Fixed(e),
        (None, Some(factor)) => HRule::Coupled { factor },
        (None, None) => HRule::Coupled {
            factor: match alignment {
                Alignment::Offset => 10,
                Alignment::Aligned => 16,
            },
        },
    };
    let records = witness_sweep(alignment, &cfg.witness.n_list, rule)?;
    for r in &records {
        check_finite(
            "witness",
            &[r.h, r.d1, r.pairing, r.d2, r.z_supnorm, r.cap_node],
        )?;
    }
    let summary = format!("witness: {} {} records", records.len(), alignment);
    Ok(Artifacts {
        main: records_to_csv(&records),
        side: Vec::new(),
        summary,
    })
}

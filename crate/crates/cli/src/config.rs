//! Run configuration: one TOML file plus `--set key=value` overrides.

use std::path::Path;

use boxvi::fem::DensitySpec;
use boxvi::Alignment;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub capacity: CapacityConfig,
    pub derivative: DerivativeConfig,
    pub witness: WitnessConfig,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub dim: usize,
    pub n: usize,
    pub alignment: Option<String>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            dim: 1,
            n: 64,
            alignment: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub f: String,
    pub g: String,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            f: "const:2".into(),
            g: "const:1".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: boxvi::vi::TOL_VI,
        }
    }
}

/// Nodes nearest to `points`, plus every node inside each region.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub points: Vec<Vec<f64>>,
    pub regions: Vec<Region>,
}

/// Closed axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DerivativeConfig {
    pub t_list: Vec<f64>,
    pub fd_out: Option<String>,
}

impl Default for DerivativeConfig {
    fn default() -> Self {
        DerivativeConfig {
            t_list: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            fd_out: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    pub alignment: String,
    pub n_list: Vec<usize>,
    /// Elements per unit of `n`; 10 on offset meshes and 16 on aligned ones
    /// when unset.
    pub h_factor: Option<usize>,
    /// Fixed element count for every `n`; overrides `h_factor`.
    pub elements: Option<usize>,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            alignment: "offset".into(),
            n_list: vec![8, 16, 32, 64],
            h_factor: None,
            elements: None,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies the overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().trim().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: String| Err(CliError::Config(format!("{field}: {why}")));
        if !(1..=2).contains(&self.mesh.dim) {
            return bad("mesh.dim", format!("must be 1 or 2, got {}", self.mesh.dim));
        }
        if self.mesh.n < 2 {
            return bad("mesh.n", format!("must be at least 2, got {}", self.mesh.n));
        }
        self.mesh_alignment()?;
        for (field, spec) in [
            ("problem.f", &self.problem.f),
            ("problem.g", &self.problem.g),
        ] {
            if let Err(e) = spec.parse::<DensitySpec>() {
                return bad(field, e.to_string());
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol.is_finite()) {
            return bad(
                "solver.tol",
                format!("must be positive, got {}", self.solver.tol),
            );
        }
        for p in &self.capacity.points {
            if p.len() != self.mesh.dim {
                return bad(
                    "capacity.points",
                    format!("point {p:?} does not have {} coordinates", self.mesh.dim),
                );
            }
        }
        for r in &self.capacity.regions {
            if r.lo.len() != self.mesh.dim || r.hi.len() != self.mesh.dim {
                return bad(
                    "capacity.regions",
                    format!("region {r:?} does not have {} coordinates", self.mesh.dim),
                );
            }
        }
        if let Some(t) = self
            .derivative
            .t_list
            .iter()
            .find(|t| !(**t > 0.0 && t.is_finite()))
        {
            return bad(
                "derivative.t_list",
                format!("steps must be positive, got {t}"),
            );
        }
        self.witness_alignment()?;
        if self.witness.n_list.contains(&0) {
            return bad("witness.n_list", "entries must be positive".into());
        }
        if self.witness.h_factor == Some(0) {
            return bad("witness.h_factor", "must be positive".into());
        }
        Ok(())
    }

    pub fn mesh_alignment(&self) -> Result<Option<Alignment>, CliError> {
        self.mesh
            .alignment
            .as_deref()
            .map(|a| {
                a.parse()
                    .map_err(|e| CliError::Config(format!("mesh.alignment: {e}")))
            })
            .transpose()
    }

    pub fn witness_alignment(&self) -> Result<Alignment, CliError> {
        self.witness
            .alignment
            .parse()
            .map_err(|e| CliError::Config(format!("witness.alignment: {e}")))
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as a TOML literal
/// when possible and as a bare string otherwise.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{item}`")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("--set: malformed key `{key}`")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("nonempty path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

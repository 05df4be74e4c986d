use std::fmt;

use crate::error::MeshError;

/// Whether the midpoint `1/2` (or the centre of the square) is a mesh node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alignment {
    /// Even element count; the midpoint is a node.
    Aligned,
    /// Odd element count; the midpoint lies inside an element.
    Offset,
}

impl Alignment {
    pub fn for_elements(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Alignment::Aligned
        } else {
            Alignment::Offset
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Alignment::Aligned => "aligned",
            Alignment::Offset => "offset",
        }
    }
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Alignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "aligned" => Ok(Alignment::Aligned),
            "offset" => Ok(Alignment::Offset),
            other => Err(format!(
                "unknown alignment `{other}` (expected aligned or offset)"
            )),
        }
    }
}

/// Uniform mesh of `(0,1)` or a structured triangulation of the unit square.
///
/// In 2D vertex `(i, j)` has index `j * (n + 1) + i` and every grid cell is
/// split along its rising diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    dim: usize,
    n: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    interior: Vec<usize>,
    interior_of: Vec<Option<usize>>,
}

impl Mesh {
    /// Uniform mesh with `n` elements per direction.
    ///
    /// `alignment` is checked against the parity of `n` when given.
    pub fn build(dim: usize, n: usize, alignment: Option<Alignment>) -> Result<Self, MeshError> {
        if n < 2 {
            return Err(MeshError::TooSmall(n));
        }
        if let Some(a) = alignment {
            if a != Alignment::for_elements(n) {
                let parity = match a {
                    Alignment::Aligned => "even",
                    Alignment::Offset => "odd",
                };
                return Err(MeshError::Parity {
                    alignment: a.as_str(),
                    parity,
                    n,
                });
            }
        }
        match dim {
            1 => Ok(Self::interval(n)),
            2 => Ok(Self::square(n)),
            d => Err(MeshError::Dimension(d)),
        }
    }

    fn interval(n: usize) -> Self {
        let coords: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let cells = (0..n).flat_map(|e| [e, e + 1]).collect();
        let mut interior_of = vec![None; n + 1];
        let interior: Vec<usize> = (1..n).collect();
        for (k, &v) in interior.iter().enumerate() {
            interior_of[v] = Some(k);
        }
        Mesh {
            dim: 1,
            n,
            coords,
            cells,
            interior,
            interior_of,
        }
    }

    fn square(n: usize) -> Self {
        let side = n + 1;
        let mut coords = Vec::with_capacity(2 * side * side);
        for j in 0..side {
            for i in 0..side {
                coords.push(i as f64 / n as f64);
                coords.push(j as f64 / n as f64);
            }
        }
        let id = |i: usize, j: usize| j * side + i;
        let mut cells = Vec::with_capacity(6 * n * n);
        for j in 0..n {
            for i in 0..n {
                cells.extend([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                cells.extend([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut interior = Vec::new();
        let mut interior_of = vec![None; side * side];
        for j in 1..n {
            for i in 1..n {
                interior_of[id(i, j)] = Some(interior.len());
                interior.push(id(i, j));
            }
        }
        Mesh {
            dim: 2,
            n,
            coords,
            cells,
            interior,
            interior_of,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Elements per direction.
    pub fn elements_per_side(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn alignment(&self) -> Alignment {
        Alignment::for_elements(self.n)
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let w = self.dim + 1;
        &self.cells[c * w..(c + 1) * w]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.dim + 1)
    }

    /// Vertex indices of the interior (unknown) nodes, in unknown order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Unknown index of vertex `v`, `None` on the Dirichlet boundary.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_of[v]
    }

    /// Coordinates of interior node `k`.
    pub fn node(&self, k: usize) -> &[f64] {
        self.vertex(self.interior[k])
    }

    /// Lebesgue measure of a cell.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        match self.dim {
            1 => self.vertex(cell[1])[0] - self.vertex(cell[0])[0],
            _ => {
                let (a, b, d) = (
                    self.vertex(cell[0]),
                    self.vertex(cell[1]),
                    self.vertex(cell[2]),
                );
                0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1])).abs()
            }
        }
    }

    /// Interior node closest to `point`; ties go to the lowest index.
    pub fn nearest_interior(&self, point: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.interior.len() {
            let d: f64 = self
                .node(k)
                .iter()
                .zip(point)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.is_none_or(|(_, bd)| d < bd - 1e-15) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }

    /// Interior nodes inside the closed axis-aligned box `[lo, hi]`.
    pub fn interior_in_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let eps = 1e-12;
        (0..self.interior.len())
            .filter(|&k| {
                self.node(k)
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&x, (&a, &b))| x >= a - eps && x <= b + eps)
            })
            .collect()
    }

    /// Values at every vertex of the P1 basis functions on cell `c`,
    /// evaluated at `point` (barycentric coordinates).
    pub(crate) fn barycentric(&self, c: usize, point: &[f64]) -> Vec<f64> {
        let cell = self.cell(c);
        match self.dim {
            1 => {
                let (a, b) = (self.vertex(cell[0])[0], self.vertex(cell[1])[0]);
                let t = (point[0] - a) / (b - a);
                vec![1.0 - t, t]
            }
            _ => {
                let (p0, p1, p2) = (
                    self.vertex(cell[0]),
                    self.vertex(cell[1]),
                    self.vertex(cell[2]),
                );
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                let l1 = ((point[0] - p0[0]) * (p2[1] - p0[1])
                    - (p2[0] - p0[0]) * (point[1] - p0[1]))
                    / det;
                let l2 = ((p1[0] - p0[0]) * (point[1] - p0[1])
                    - (point[0] - p0[0]) * (p1[1] - p0[1]))
                    / det;
                vec![1.0 - l1 - l2, l1, l2]
            }
        }
    }

    /// Index of a cell containing `point` (closed cells, lowest index wins).
    pub(crate) fn locate(&self, point: &[f64]) -> Option<usize> {
        (0..self.num_cells()).find(|&c| self.barycentric(c, point).iter().all(|&l| l >= -1e-12))
    }

    /// Values of the interior P1 basis functions at `point`, as
    /// `(unknown index, value)` pairs.
    pub fn basis_at(&self, point: &[f64]) -> Vec<(usize, f64)> {
        let Some(c) = self.locate(point) else {
            return Vec::new();
        };
        let lam = self.barycentric(c, point);
        self.cell(c)
            .iter()
            .zip(lam)
            .filter_map(|(&v, l)| self.interior_of[v].map(|k| (k, l.clamp(0.0, 1.0))))
            .filter(|&(_, l)| l > 0.0)
            .collect()
    }
}

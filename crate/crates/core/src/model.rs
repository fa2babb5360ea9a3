//! Discretized physical problem: structured mesh, material constants, heat
//! sources, and prescribed-temperature node sets.
//!
//! Meshes are uniform grids of unit square/cube elements with multilinear
//! shape functions. Nodes and elements are numbered lexicographically with
//! the x index running fastest.

use crate::config::{DirichletSpec, ParsedConfig, SourceSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;
use std::path::Path;

/// Element corner order: counter-clockwise from the origin in 2D.
pub const CORNERS_2D: [[usize; 3]; 4] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]];
/// Element corner order in 3D: bottom face counter-clockwise, then top face.
pub const CORNERS_3D: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Structured grid indexing: per-axis counts, element connectivity, centroids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredMesh {
    pub dim: usize,
    /// Per-axis element counts; unused axes are 1.
    pub nel: [usize; 3],
    /// Per-axis node counts; unused axes are 1.
    pub nnode: [usize; 3],
}

impl StructuredMesh {
    pub fn new(dim: usize, nel: &[usize]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Mesh(format!("dimension must be 2 or 3, got {dim}")));
        }
        if nel.len() != dim || nel.iter().any(|&n| n == 0) {
            return Err(Error::Mesh(format!(
                "expected {dim} positive axial element counts, got {nel:?}"
            )));
        }
        let mut e = [1usize; 3];
        let mut n = [1usize; 3];
        for d in 0..dim {
            e[d] = nel[d];
            n[d] = nel[d] + 1;
        }
        Ok(Self { dim, nel: e, nnode: n })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nnode[0] * self.nnode[1] * self.nnode[2]
    }

    #[inline]
    pub fn elem_count(&self) -> usize {
        self.nel[0] * self.nel[1] * self.nel[2]
    }

    #[inline]
    pub fn nodes_per_elem(&self) -> usize {
        1 << self.dim
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nnode[0] * (j + self.nnode[1] * k)
    }

    #[inline]
    pub fn node_coords(&self, n: usize) -> [usize; 3] {
        let i = n % self.nnode[0];
        let rest = n / self.nnode[0];
        [i, rest % self.nnode[1], rest / self.nnode[1]]
    }

    #[inline]
    pub fn elem_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nel[0] * (j + self.nel[1] * k)
    }

    #[inline]
    pub fn elem_coords(&self, e: usize) -> [usize; 3] {
        let i = e % self.nel[0];
        let rest = e / self.nel[0];
        [i, rest % self.nel[1], rest / self.nel[1]]
    }

    pub fn corners(&self) -> &'static [[usize; 3]] {
        if self.dim == 2 {
            &CORNERS_2D
        } else {
            &CORNERS_3D
        }
    }

    /// Writes the element's node indices into `out`; returns the node count.
    #[inline]
    pub fn elem_nodes(&self, e: usize, out: &mut [usize; 8]) -> usize {
        let c = self.elem_coords(e);
        let corners = self.corners();
        for (slot, corner) in out.iter_mut().zip(corners.iter()) {
            *slot = self.node_index(c[0] + corner[0], c[1] + corner[1], c[2] + corner[2]);
        }
        corners.len()
    }

    /// Element centroid; nodes sit on the integer lattice.
    #[inline]
    pub fn elem_centroid(&self, e: usize) -> [f64; 3] {
        let c = self.elem_coords(e);
        let mut out = [0.0; 3];
        for d in 0..self.dim {
            out[d] = c[d] as f64 + 0.5;
        }
        out
    }
}

/// The discretized steady-state conduction problem.
#[derive(Debug, Clone)]
pub struct ThermalModel<T> {
    pub mesh: StructuredMesh,
    /// Solid conductivity.
    pub k0: T,
    /// Void conductivity (keeps the operator non-singular).
    pub kmin: T,
    /// Penalization exponent of the density interpolation.
    pub penal: T,
    /// Per-element volumetric heat generation.
    pub source: Vec<T>,
    /// Sorted node indices with prescribed temperature 0.
    pub dirichlet: Vec<usize>,
    /// Node mask mirroring `dirichlet`.
    pub dirichlet_mask: Vec<bool>,
}

impl<T: Real> ThermalModel<T> {
    pub fn new(
        mesh: StructuredMesh,
        k0: T,
        kmin: T,
        penal: T,
        source: Vec<T>,
        mut dirichlet: Vec<usize>,
    ) -> Result<Self> {
        if !(k0 > kmin && kmin > T::zero()) {
            return Err(Error::Mesh(format!(
                "conductivities must satisfy k0 > kmin > 0, got k0 = {k0}, kmin = {kmin}"
            )));
        }
        if source.len() != mesh.elem_count() {
            return Err(Error::Shape(format!(
                "source field has {} entries, mesh has {} elements",
                source.len(),
                mesh.elem_count()
            )));
        }
        if source.iter().any(|&q| q < T::zero()) || source.iter().all(|&q| q == T::zero()) {
            return Err(Error::Mesh(
                "source values must be non-negative with at least one positive".to_string(),
            ));
        }
        dirichlet.sort_unstable();
        dirichlet.dedup();
        if dirichlet.is_empty() {
            return Err(Error::Mesh(
                "empty Dirichlet set: the conductivity matrix would be singular".to_string(),
            ));
        }
        if *dirichlet.last().unwrap() >= mesh.node_count() {
            return Err(Error::Mesh("Dirichlet node index out of range".to_string()));
        }
        let mut mask = vec![false; mesh.node_count()];
        for &n in &dirichlet {
            mask[n] = true;
        }
        Ok(Self {
            mesh,
            k0,
            kmin,
            penal,
            source,
            dirichlet,
            dirichlet_mask: mask,
        })
    }
}

/// Nodes on the x = 0 edge whose y coordinate lies within the centered span
/// of one tenth of the side length. Implemented with integer arithmetic:
/// |20 y - 10 L| <= L with L the y-axis element count.
pub fn mid_left_nodes(mesh: &StructuredMesh) -> Vec<usize> {
    let l = mesh.nel[1];
    let mut nodes = Vec::new();
    for j in 0..mesh.nnode[1] {
        let lhs = (20 * j) as i64 - (10 * l) as i64;
        if lhs.abs() <= l as i64 {
            nodes.push(mesh.node_index(0, j, 0));
        }
    }
    nodes
}

/// Nodes on the z = 0 face of a quarter-symmetric cube model within one
/// eighth of the full side from the symmetry corner: 8 x <= nel_x and
/// 8 y <= nel_y. Mirrored through the symmetry planes this is the centered
/// square patch of side L/8 on the full domain's back face.
pub fn back_center_nodes(mesh: &StructuredMesh) -> Vec<usize> {
    let mut nodes = Vec::new();
    for j in 0..mesh.nnode[1] {
        if 8 * j > mesh.nel[1] {
            continue;
        }
        for i in 0..mesh.nnode[0] {
            if 8 * i > mesh.nel[0] {
                continue;
            }
            nodes.push(mesh.node_index(i, j, 0));
        }
    }
    nodes
}

fn source_field<T: Real>(cfg: &ParsedConfig, mesh: &StructuredMesh) -> Result<Vec<T>> {
    match &cfg.source {
        SourceSpec::Uniform(v) => Ok(vec![T::of(*v); mesh.elem_count()]),
        SourceSpec::Quadrants(q) => {
            let mut field = vec![T::zero(); mesh.elem_count()];
            let half_x = mesh.nel[0] as f64 / 2.0;
            let half_y = mesh.nel[1] as f64 / 2.0;
            for e in 0..mesh.elem_count() {
                let c = mesh.elem_centroid(e);
                let qx = usize::from(c[0] > half_x);
                let qy = usize::from(c[1] > half_y);
                field[e] = T::of(q[2 * qy + qx]);
            }
            Ok(field)
        }
        SourceSpec::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let values = crate::io::parse_field_csv::<T>(&text, mesh)?;
            Ok(values)
        }
    }
}

fn dirichlet_nodes(cfg: &ParsedConfig, mesh: &StructuredMesh) -> Result<Vec<usize>> {
    match cfg.dirichlet_spec() {
        DirichletSpec::Preset(name) => match name.as_str() {
            "mid-left" => Ok(mid_left_nodes(mesh)),
            "back-center" => Ok(back_center_nodes(mesh)),
            other => Err(Error::Mesh(format!("unknown boundary spec `{other}`"))),
        },
        DirichletSpec::File(path) => read_node_list(&path),
    }
}

fn read_node_list(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut nodes = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let n: usize = line.parse().map_err(|_| {
            Error::Mesh(format!(
                "node list {}: line {} is not a node index",
                path.display(),
                idx + 1
            ))
        })?;
        nodes.push(n);
    }
    Ok(nodes)
}

/// Builds the thermal model described by a validated configuration.
pub fn build_model<T: Real>(cfg: &ParsedConfig) -> Result<ThermalModel<T>> {
    let divisor = 1usize << (cfg.nl - 1);
    for &n in &cfg.nel {
        if n == 0 || n % divisor != 0 {
            return Err(Error::Mesh(format!(
                "axial element count {n} is not a multiple of 2^(nl-1) = {divisor}"
            )));
        }
    }
    let mesh = StructuredMesh::new(cfg.dim, &cfg.nel)?;
    let source = source_field::<T>(cfg, &mesh)?;
    let dirichlet = dirichlet_nodes(cfg, &mesh)?;
    ThermalModel::new(
        mesh,
        T::of(cfg.k0),
        T::of(cfg.kmin),
        T::of(cfg.penal),
        source,
        dirichlet,
    )
}

/// Consistent nodal heat load: each element spreads its total generation
/// equally onto its corner nodes (exact for a constant source under
/// multilinear shape functions); entries at Dirichlet nodes are zeroed.
pub fn heat_load<T: Real>(model: &ThermalModel<T>) -> Vec<T> {
    let mesh = &model.mesh;
    let share = T::one() / T::of(mesh.nodes_per_elem() as f64);
    let mut q = vec![T::zero(); mesh.node_count()];
    let mut nodes = [0usize; 8];
    for e in 0..mesh.elem_count() {
        let nen = mesh.elem_nodes(e, &mut nodes);
        let contrib = model.source[e] * share;
        for &n in &nodes[..nen] {
            q[n] += contrib;
        }
    }
    for &n in &model.dirichlet {
        q[n] = T::zero();
    }
    q
}

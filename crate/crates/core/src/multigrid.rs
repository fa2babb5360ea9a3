//! Geometric multigrid on the structured grid: nested-grid multilinear
//! prolongation, Galerkin coarse operators, damped-Jacobi smoothing, the
//! V-cycle, and a banded direct solve on the coarsest level.
//!
//! The fine-level operator stays matrix-free; coarser levels hold explicit
//! operators with the 3^dim stencil structure that Galerkin coarsening of a
//! multilinear interpolation produces. Constrained nodes follow the same
//! convention on every level: a coarse node is constrained iff its
//! coincident fine node is, prolongation rows of constrained fine nodes are
//! zero, and coarse operators are masked to the identity on constrained
//! rows/columns, which keeps them SPD.

use crate::error::{Error, Result};
use crate::fem;
use crate::linalg::{BandMatrix, BandedCholesky};
use crate::model::ThermalModel;
use crate::scalar::Real;

/// Multilinear interpolation from a coarse structured grid to the twice-as-
/// fine one, stored as compact per-fine-node rows (at most 2^dim entries).
#[derive(Debug, Clone)]
pub struct Prolongation<T> {
    pub fine_nodes: usize,
    pub coarse_nodes: usize,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<T>,
}

impl<T: Real> Prolongation<T> {
    /// Builds the interpolation for one grid pair. `fine_nn` / `coarse_nn`
    /// are per-axis node counts; rows of constrained fine nodes are zero.
    pub fn build(
        dim: usize,
        fine_nn: [usize; 3],
        coarse_nn: [usize; 3],
        fine_mask: &[bool],
    ) -> Self {
        let fine_nodes = fine_nn[0] * fine_nn[1] * fine_nn[2];
        let coarse_nodes = coarse_nn[0] * coarse_nn[1] * coarse_nn[2];
        let mut offsets = Vec::with_capacity(fine_nodes + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);

        let half = T::of(0.5);
        // per-axis (coarse coordinate, weight) pairs, at most 2
        let axis_weights = |i: usize| -> ([(usize, T); 2], usize) {
            if i % 2 == 0 {
                ([(i / 2, T::one()), (0, T::zero())], 1)
            } else {
                ([((i - 1) / 2, half), ((i + 1) / 2, half)], 2)
            }
        };

        let mut n = 0usize;
        for k in 0..fine_nn[2] {
            let (kw, knum) = if dim == 3 {
                axis_weights(k)
            } else {
                ([(0usize, T::one()), (0, T::zero())], 1)
            };
            for j in 0..fine_nn[1] {
                let (jw, jnum) = axis_weights(j);
                for i in 0..fine_nn[0] {
                    if !fine_mask[n] {
                        let (iw, inum) = axis_weights(i);
                        for kk in 0..knum {
                            for jj in 0..jnum {
                                for ii in 0..inum {
                                    let col = iw[ii].0
                                        + coarse_nn[0] * (jw[jj].0 + coarse_nn[1] * kw[kk].0);
                                    let w = iw[ii].1 * jw[jj].1 * kw[kk].1;
                                    cols.push(col as u32);
                                    weights.push(w);
                                }
                            }
                        }
                    }
                    offsets.push(cols.len());
                    n += 1;
                }
            }
        }
        Self {
            fine_nodes,
            coarse_nodes,
            offsets,
            cols,
            weights,
        }
    }

    #[inline]
    pub fn row(&self, n: usize) -> (&[u32], &[T]) {
        let lo = self.offsets[n];
        let hi = self.offsets[n + 1];
        (&self.cols[lo..hi], &self.weights[lo..hi])
    }

    /// x_fine += P x_coarse
    pub fn prolong_add(&self, xc: &[T], xf: &mut [T]) {
        debug_assert_eq!(xc.len(), self.coarse_nodes);
        debug_assert_eq!(xf.len(), self.fine_nodes);
        for n in 0..self.fine_nodes {
            let (cols, ws) = self.row(n);
            let mut acc = T::zero();
            for (c, w) in cols.iter().zip(ws.iter()) {
                acc += *w * xc[*c as usize];
            }
            xf[n] += acc;
        }
    }

    /// Returns P^T r.
    pub fn restrict(&self, rf: &[T]) -> Vec<T> {
        debug_assert_eq!(rf.len(), self.fine_nodes);
        let mut rc = vec![T::zero(); self.coarse_nodes];
        for n in 0..self.fine_nodes {
            let (cols, ws) = self.row(n);
            let v = rf[n];
            for (c, w) in cols.iter().zip(ws.iter()) {
                rc[*c as usize] += *w * v;
            }
        }
        rc
    }
}

/// Symmetric operator on a structured node grid with the 3^dim neighbor
/// stencil, stored dense-per-row over the stencil slots.
#[derive(Debug, Clone)]
pub struct StencilMatrix<T> {
    pub dim: usize,
    pub nn: [usize; 3],
    pub slots: usize,
    data: Vec<T>,
}

impl<T: Real> StencilMatrix<T> {
    pub fn zeros(dim: usize, nn: [usize; 3]) -> Self {
        let slots = if dim == 3 { 27 } else { 9 };
        let n = nn[0] * nn[1] * nn[2];
        Self {
            dim,
            nn,
            slots,
            data: vec![T::zero(); n * slots],
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nn[0] * self.nn[1] * self.nn[2]
    }

    #[inline]
    fn coords(&self, n: usize) -> [i64; 3] {
        let i = n % self.nn[0];
        let rest = n / self.nn[0];
        [i as i64, (rest % self.nn[1]) as i64, (rest / self.nn[1]) as i64]
    }

    #[inline]
    fn slot_of(&self, delta: [i64; 3]) -> usize {
        debug_assert!(delta.iter().all(|d| d.abs() <= 1));
        let base = (delta[0] + 1) + 3 * (delta[1] + 1);
        (if self.dim == 3 { base + 9 * (delta[2] + 1) } else { base }) as usize
    }

    #[inline]
    fn delta_of(&self, slot: usize) -> [i64; 3] {
        let s = slot as i64;
        let di = s % 3 - 1;
        let dj = (s / 3) % 3 - 1;
        let dk = if self.dim == 3 { s / 9 - 1 } else { 0 };
        [di, dj, dk]
    }

    /// Adds `v` into entry (row, col); the nodes must be stencil neighbors.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: T) {
        let a = self.coords(row);
        let b = self.coords(col);
        let slot = self.slot_of([b[0] - a[0], b[1] - a[1], b[2] - a[2]]);
        self.data[row * self.slots + slot] += v;
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        let a = self.coords(row);
        let b = self.coords(col);
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        if d.iter().any(|x| x.abs() > 1) {
            return T::zero();
        }
        self.data[row * self.slots + self.slot_of(d)]
    }

    /// Zeroes constrained rows and columns and puts 1 on their diagonal.
    pub fn mask_dirichlet(&mut self, mask: &[bool]) {
        let n = self.node_count();
        debug_assert_eq!(mask.len(), n);
        let center = self.slot_of([0, 0, 0]);
        for row in 0..n {
            let c = self.coords(row);
            if mask[row] {
                for s in 0..self.slots {
                    self.data[row * self.slots + s] = T::zero();
                }
                self.data[row * self.slots + center] = T::one();
                continue;
            }
            for s in 0..self.slots {
                let d = self.delta_of(s);
                let ti = c[0] + d[0];
                let tj = c[1] + d[1];
                let tk = c[2] + d[2];
                if ti < 0
                    || tj < 0
                    || tk < 0
                    || ti >= self.nn[0] as i64
                    || tj >= self.nn[1] as i64
                    || tk >= self.nn[2] as i64
                {
                    continue;
                }
                let target =
                    ti as usize + self.nn[0] * (tj as usize + self.nn[1] * tk as usize);
                if mask[target] {
                    self.data[row * self.slots + s] = T::zero();
                }
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.node_count());
        let (nx, ny, nz) = (self.nn[0], self.nn[1], self.nn[2]);
        let mut n = 0usize;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let mut acc = T::zero();
                    let row = &self.data[n * self.slots..(n + 1) * self.slots];
                    for (s, &v) in row.iter().enumerate() {
                        if v == T::zero() {
                            continue;
                        }
                        let d = self.delta_of(s);
                        let ti = i as i64 + d[0];
                        let tj = j as i64 + d[1];
                        let tk = k as i64 + d[2];
                        if ti < 0
                            || tj < 0
                            || tk < 0
                            || ti >= nx as i64
                            || tj >= ny as i64
                            || tk >= nz as i64
                        {
                            continue;
                        }
                        let t = ti as usize + nx * (tj as usize + ny * tk as usize);
                        acc += v * x[t];
                    }
                    y[n] = acc;
                    n += 1;
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        let center = self.slot_of([0, 0, 0]);
        (0..self.node_count())
            .map(|n| self.data[n * self.slots + center])
            .collect()
    }

    /// Copies the lower triangle into banded storage for factorization.
    pub fn to_band(&self) -> BandMatrix<T> {
        let n = self.node_count();
        let bw = 1 + self.nn[0] + if self.dim == 3 { self.nn[0] * self.nn[1] } else { 0 };
        let mut band = BandMatrix::zeros(n, bw);
        for row in 0..n {
            let c = self.coords(row);
            for s in 0..self.slots {
                let v = self.data[row * self.slots + s];
                if v == T::zero() {
                    continue;
                }
                let d = self.delta_of(s);
                let ti = c[0] + d[0];
                let tj = c[1] + d[1];
                let tk = c[2] + d[2];
                if ti < 0
                    || tj < 0
                    || tk < 0
                    || ti >= self.nn[0] as i64
                    || tj >= self.nn[1] as i64
                    || tk >= self.nn[2] as i64
                {
                    continue;
                }
                let col = ti as usize + self.nn[0] * (tj as usize + self.nn[1] * tk as usize);
                if col <= row {
                    band.add(row, col, v);
                }
            }
        }
        band
    }
}

/// Smoothing and cycling parameters.
#[derive(Debug, Clone, Copy)]
pub struct MgParams<T> {
    pub nl: usize,
    pub omega: T,
    pub nu_pre: usize,
    pub nu_post: usize,
}

impl<T: Real> Default for MgParams<T> {
    fn default() -> Self {
        Self {
            nl: 3,
            omega: T::of(0.6),
            nu_pre: 1,
            nu_post: 1,
        }
    }
}

/// The multigrid hierarchy for one density snapshot: matrix-free fine level,
/// explicit stencil operators on coarser levels, factorized coarsest level.
#[derive(Debug, Clone)]
pub struct MgHierarchy<T> {
    pub params: MgParams<T>,
    rho: Vec<T>,
    diag0: Vec<T>,
    masks: Vec<Vec<bool>>,
    prolong: Vec<Prolongation<T>>,
    coarse: Vec<StencilMatrix<T>>,
    coarse_diag: Vec<Vec<T>>,
    coarsest: BandedCholesky<T>,
    node_counts: Vec<usize>,
}

impl<T: Real> MgHierarchy<T> {
    /// Densities the hierarchy was built for.
    pub fn rho(&self) -> &[T] {
        &self.rho
    }

    pub fn levels(&self) -> usize {
        self.params.nl
    }

    pub fn prolongation(&self, level: usize) -> &Prolongation<T> {
        &self.prolong[level]
    }

    pub fn coarse_matrix(&self, level: usize) -> &StencilMatrix<T> {
        &self.coarse[level - 1]
    }

    pub fn mask(&self, level: usize) -> &[bool] {
        &self.masks[level]
    }
}

fn galerkin_from_elements<T: Real>(
    model: &ThermalModel<T>,
    rho: &[T],
    p: &Prolongation<T>,
    coarse_nn: [usize; 3],
) -> StencilMatrix<T> {
    let mesh = &model.mesh;
    let em = fem::reference_element::<T>(mesh.dim);
    let mut a = StencilMatrix::zeros(mesh.dim, coarse_nn);
    let mut nodes = [0usize; 8];
    for e in 0..mesh.elem_count() {
        let nen = mesh.elem_nodes(e, &mut nodes);
        let ke = fem::simp_value(rho[e], model);
        for ai in 0..nen {
            let (cols_a, ws_a) = p.row(nodes[ai]);
            if cols_a.is_empty() {
                continue;
            }
            for bi in 0..nen {
                let v = ke * em.a[ai][bi];
                let (cols_b, ws_b) = p.row(nodes[bi]);
                for (ca, wa) in cols_a.iter().zip(ws_a.iter()) {
                    let wav = *wa * v;
                    for (cb, wb) in cols_b.iter().zip(ws_b.iter()) {
                        a.add(*ca as usize, *cb as usize, wav * *wb);
                    }
                }
            }
        }
    }
    a
}

fn galerkin_from_stencil<T: Real>(
    af: &StencilMatrix<T>,
    p: &Prolongation<T>,
    coarse_nn: [usize; 3],
) -> StencilMatrix<T> {
    let mut ac = StencilMatrix::zeros(af.dim, coarse_nn);
    let n = af.node_count();
    for row in 0..n {
        let (cols_a, ws_a) = p.row(row);
        if cols_a.is_empty() {
            continue;
        }
        let c = af.coords(row);
        for s in 0..af.slots {
            let v = af.data[row * af.slots + s];
            if v == T::zero() {
                continue;
            }
            let d = af.delta_of(s);
            let ti = c[0] + d[0];
            let tj = c[1] + d[1];
            let tk = c[2] + d[2];
            if ti < 0
                || tj < 0
                || tk < 0
                || ti >= af.nn[0] as i64
                || tj >= af.nn[1] as i64
                || tk >= af.nn[2] as i64
            {
                continue;
            }
            let col = ti as usize + af.nn[0] * (tj as usize + af.nn[1] * tk as usize);
            let (cols_b, ws_b) = p.row(col);
            for (ca, wa) in cols_a.iter().zip(ws_a.iter()) {
                let wav = *wa * v;
                for (cb, wb) in cols_b.iter().zip(ws_b.iter()) {
                    ac.add(*ca as usize, *cb as usize, wav * *wb);
                }
            }
        }
    }
    ac
}

/// Builds the full hierarchy for one density snapshot: prolongations from
/// multilinear interpolation, Galerkin coarse operators, and the coarsest
/// factorization (done once per build, reused across V-cycles).
pub fn build_hierarchy<T: Real>(
    model: &ThermalModel<T>,
    rho: &[T],
    params: MgParams<T>,
) -> Result<MgHierarchy<T>> {
    let mesh = &model.mesh;
    if rho.len() != mesh.elem_count() {
        return Err(Error::Shape(format!(
            "density field has {} entries, mesh has {} elements",
            rho.len(),
            mesh.elem_count()
        )));
    }
    if params.nl < 2 {
        return Err(Error::Mesh("coarsening level must be at least 2".to_string()));
    }
    let divisor = 1usize << (params.nl - 1);
    for d in 0..mesh.dim {
        if mesh.nel[d] % divisor != 0 {
            return Err(Error::Mesh(format!(
                "axis {d} element count {} is not a multiple of 2^(nl-1) = {divisor}",
                mesh.nel[d]
            )));
        }
    }

    // per-level node grids
    let mut grids = Vec::with_capacity(params.nl);
    for level in 0..params.nl {
        let mut nn = [1usize; 3];
        for d in 0..mesh.dim {
            nn[d] = mesh.nel[d] / (1 << level) + 1;
        }
        grids.push(nn);
    }
    let node_counts: Vec<usize> = grids.iter().map(|g| g[0] * g[1] * g[2]).collect();

    // a coarse node is constrained iff its coincident fine node is
    let mut masks: Vec<Vec<bool>> = vec![model.dirichlet_mask.clone()];
    for level in 1..params.nl {
        let fine_nn = grids[level - 1];
        let nn = grids[level];
        let prev = &masks[level - 1];
        let mut mask = vec![false; node_counts[level]];
        let mut idx = 0usize;
        for k in 0..nn[2] {
            for j in 0..nn[1] {
                for i in 0..nn[0] {
                    let kk = if mesh.dim == 3 { 2 * k } else { 0 };
                    let fine = 2 * i + fine_nn[0] * (2 * j + fine_nn[1] * kk);
                    mask[idx] = prev[fine];
                    idx += 1;
                }
            }
        }
        masks.push(mask);
    }

    let mut prolong = Vec::with_capacity(params.nl - 1);
    for level in 0..params.nl - 1 {
        prolong.push(Prolongation::build(
            mesh.dim,
            grids[level],
            grids[level + 1],
            &masks[level],
        ));
    }

    let mut coarse: Vec<StencilMatrix<T>> = Vec::with_capacity(params.nl - 1);
    for level in 1..params.nl {
        let mut a = if level == 1 {
            galerkin_from_elements(model, rho, &prolong[0], grids[1])
        } else {
            galerkin_from_stencil(&coarse[level - 2], &prolong[level - 1], grids[level])
        };
        a.mask_dirichlet(&masks[level]);
        coarse.push(a);
    }

    let coarsest = BandedCholesky::factor(&coarse.last().unwrap().to_band()).map_err(|e| {
        Error::Solver(format!(
            "coarsest-level factorization failed (Dirichlet set lost under coarsening?): {e}"
        ))
    })?;
    let coarse_diag: Vec<Vec<T>> = coarse.iter().map(|a| a.diagonal()).collect();
    let diag0 = fem::diagonal_of_k(rho, model);

    Ok(MgHierarchy {
        params,
        rho: rho.to_vec(),
        diag0,
        masks,
        prolong,
        coarse,
        coarse_diag,
        coarsest,
        node_counts,
    })
}

fn apply_level<T: Real>(
    model: &ThermalModel<T>,
    h: &MgHierarchy<T>,
    level: usize,
    x: &[T],
) -> Vec<T> {
    if level == 0 {
        fem::apply_k(&h.rho, x, model).expect("level-0 shapes are hierarchy-checked")
    } else {
        h.coarse[level - 1].matvec(x)
    }
}

fn diag_level<'a, T: Real>(h: &'a MgHierarchy<T>, level: usize) -> &'a [T] {
    if level == 0 {
        &h.diag0
    } else {
        &h.coarse_diag[level - 1]
    }
}

/// `count` damped-Jacobi sweeps on one level: x += omega D^-1 (b - A x).
/// Constrained entries stay fixed because their row is the identity and the
/// right-hand side carries their value.
pub fn smooth<T: Real>(
    model: &ThermalModel<T>,
    h: &MgHierarchy<T>,
    level: usize,
    b: &[T],
    x: &mut [T],
    count: usize,
) {
    let omega = h.params.omega;
    let diag = diag_level(h, level);
    for _ in 0..count {
        let ax = apply_level(model, h, level, x);
        for i in 0..x.len() {
            x[i] += omega * (b[i] - ax[i]) / diag[i];
        }
    }
}

fn cycle_level<T: Real>(
    model: &ThermalModel<T>,
    h: &MgHierarchy<T>,
    level: usize,
    b: &[T],
    x: &mut Vec<T>,
) {
    let last = h.params.nl - 1;
    if level == last {
        *x = h.coarsest.solve(b);
        return;
    }
    smooth(model, h, level, b, x, h.params.nu_pre);
    let ax = apply_level(model, h, level, x);
    let r: Vec<T> = b.iter().zip(ax.iter()).map(|(&bi, &ai)| bi - ai).collect();
    let mut rc = h.prolong[level].restrict(&r);
    for (v, &m) in rc.iter_mut().zip(h.masks[level + 1].iter()) {
        if m {
            *v = T::zero();
        }
    }
    let mut xc = vec![T::zero(); h.node_counts[level + 1]];
    cycle_level(model, h, level + 1, &rc, &mut xc);
    h.prolong[level].prolong_add(&xc, x);
    smooth(model, h, level, b, x, h.params.nu_post);
}

/// One V-cycle: pre-smooth, restrict the residual, correct from the coarse
/// level (recursively; direct solve at the coarsest), prolong, post-smooth.
pub fn vcycle<T: Real>(model: &ThermalModel<T>, h: &MgHierarchy<T>, b: &[T], x: &mut Vec<T>) {
    debug_assert_eq!(b.len(), h.node_counts[0]);
    debug_assert_eq!(x.len(), h.node_counts[0]);
    cycle_level(model, h, 0, b, x);
}

//! Shared dense reference paths for the integration tests: quadrature
//! element matrices, dense assembly with the same masking convention, dense
//! LU solves, dense grid-transfer matrices, and a dense two-level V-cycle
//! replica. Everything here is independent of the library's compute path.

#![allow(dead_code)]

use heatopt::model::{ThermalModel, CORNERS_2D, CORNERS_3D};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Reference element matrix from 2-point Gauss quadrature per axis on the
/// unit element, instead of the closed-form product integrals.
pub fn gauss_element_matrix(dim: usize) -> Vec<Vec<f64>> {
    let corners: &[[usize; 3]] = if dim == 2 { &CORNERS_2D } else { &CORNERS_3D };
    let nen = corners.len();
    // Gauss points/weights for [0, 1]
    let g = 0.5 / 3.0f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let wts = [0.5, 0.5];

    let shape = |a: &[usize; 3], x: &[f64; 3], grad_dir: Option<usize>| -> f64 {
        let mut v = 1.0;
        for d in 0..dim {
            let phi = if a[d] == 0 { 1.0 - x[d] } else { x[d] };
            let dphi = if a[d] == 0 { -1.0 } else { 1.0 };
            v *= if grad_dir == Some(d) { dphi } else { phi };
        }
        v
    };

    let mut k = vec![vec![0.0; nen]; nen];
    let n_gauss = 1usize << dim;
    for gp in 0..n_gauss {
        let mut x = [0.0; 3];
        let mut w = 1.0;
        for d in 0..dim {
            let bit = (gp >> d) & 1;
            x[d] = pts[bit];
            w *= wts[bit];
        }
        for (i, ci) in corners.iter().enumerate() {
            for (j, cj) in corners.iter().enumerate() {
                let mut dot = 0.0;
                for d in 0..dim {
                    dot += shape(ci, &x, Some(d)) * shape(cj, &x, Some(d));
                }
                k[i][j] += w * dot;
            }
        }
    }
    k
}

fn node_index(nn: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + nn[0] * (j + nn[1] * k)
}

/// Element node indices in the shared corner-order convention.
pub fn elem_nodes_oracle(model: &ThermalModel<f64>, e: usize) -> Vec<usize> {
    let mesh = &model.mesh;
    let nel = mesh.nel;
    let i = e % nel[0];
    let rest = e / nel[0];
    let j = rest % nel[1];
    let k = rest / nel[1];
    let corners: &[[usize; 3]] = if mesh.dim == 2 { &CORNERS_2D } else { &CORNERS_3D };
    corners
        .iter()
        .map(|c| node_index(mesh.nnode, i + c[0], j + c[1], k + c[2]))
        .collect()
}

/// Dense masked conductivity operator: assembled from quadrature element
/// matrices, then constrained rows/columns zeroed with unit diagonal.
pub fn assemble_dense(model: &ThermalModel<f64>, rho: &[f64]) -> Vec<Vec<f64>> {
    let n = model.mesh.node_count();
    let em = gauss_element_matrix(model.mesh.dim);
    let mut a = vec![vec![0.0; n]; n];
    for e in 0..model.mesh.elem_count() {
        let ke = model.kmin + (model.k0 - model.kmin) * rho[e].powf(model.penal);
        let nodes = elem_nodes_oracle(model, e);
        for (ai, &na) in nodes.iter().enumerate() {
            for (bi, &nb) in nodes.iter().enumerate() {
                a[na][nb] += ke * em[ai][bi];
            }
        }
    }
    mask_dense(&mut a, &model.dirichlet_mask);
    a
}

pub fn mask_dense(a: &mut [Vec<f64>], mask: &[bool]) {
    let n = a.len();
    for i in 0..n {
        for j in 0..n {
            if mask[i] || mask[j] {
                a[i][j] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
}

pub fn matvec_dense(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x.iter()).map(|(r, v)| r * v).sum())
        .collect()
}

/// LU solve with partial pivoting on a copy of the matrix.
pub fn lu_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (pivot, _) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        m.swap(col, pivot);
        perm.swap(col, pivot);
        x.swap(col, pivot);
        assert!(m[col][col].abs() > 1e-300, "singular dense matrix");
        for r in (col + 1)..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in (r + 1)..n {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    x
}

/// Dense multilinear prolongation from the coarse grid to the fine one;
/// rows of constrained fine nodes are zero.
pub fn dense_prolongation(
    dim: usize,
    fine_nn: [usize; 3],
    coarse_nn: [usize; 3],
    fine_mask: &[bool],
) -> Vec<Vec<f64>> {
    let nf = fine_nn[0] * fine_nn[1] * fine_nn[2];
    let nc = coarse_nn[0] * coarse_nn[1] * coarse_nn[2];
    let mut p = vec![vec![0.0; nc]; nf];
    let axis = |i: usize| -> Vec<(usize, f64)> {
        if i % 2 == 0 {
            vec![(i / 2, 1.0)]
        } else {
            vec![((i - 1) / 2, 0.5), ((i + 1) / 2, 0.5)]
        }
    };
    let mut n = 0usize;
    for k in 0..fine_nn[2] {
        let kw = if dim == 3 { axis(k) } else { vec![(0usize, 1.0)] };
        for j in 0..fine_nn[1] {
            let jw = axis(j);
            for i in 0..fine_nn[0] {
                if !fine_mask[n] {
                    for (kc, wk) in &kw {
                        for (jc, wj) in &jw {
                            for (ic, wi) in axis(i) {
                                p[n][node_index(coarse_nn, ic, *jc, *kc)] += wi * wj * wk;
                            }
                        }
                    }
                }
                n += 1;
            }
        }
    }
    p
}

/// Coarse constrained-node mask: constrained iff the coincident fine node is.
pub fn coarse_mask_of(
    dim: usize,
    fine_nn: [usize; 3],
    coarse_nn: [usize; 3],
    fine_mask: &[bool],
) -> Vec<bool> {
    let mut mask = vec![false; coarse_nn[0] * coarse_nn[1] * coarse_nn[2]];
    let mut idx = 0usize;
    for k in 0..coarse_nn[2] {
        for j in 0..coarse_nn[1] {
            for i in 0..coarse_nn[0] {
                let kk = if dim == 3 { 2 * k } else { 0 };
                mask[idx] = fine_mask[node_index(fine_nn, 2 * i, 2 * j, kk)];
                idx += 1;
            }
        }
    }
    mask
}

/// P^T A P for dense matrices.
pub fn triple_product(p: &[Vec<f64>], a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let nf = p.len();
    let nc = p[0].len();
    // ap = A P
    let mut ap = vec![vec![0.0; nc]; nf];
    for r in 0..nf {
        for c in 0..nf {
            let v = a[r][c];
            if v == 0.0 {
                continue;
            }
            for j in 0..nc {
                ap[r][j] += v * p[c][j];
            }
        }
    }
    let mut out = vec![vec![0.0; nc]; nc];
    for r in 0..nf {
        for i in 0..nc {
            let w = p[r][i];
            if w == 0.0 {
                continue;
            }
            for j in 0..nc {
                out[i][j] += w * ap[r][j];
            }
        }
    }
    out
}

/// Dense replica of the implementation's two-level V-cycle (damped Jacobi
/// smoothing, masked restriction, direct coarse solve, prolongation).
pub struct DenseTwoGrid {
    pub a: Vec<Vec<f64>>,
    pub diag: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub ac: Vec<Vec<f64>>,
    pub coarse_mask: Vec<bool>,
    pub omega: f64,
    pub nu_pre: usize,
    pub nu_post: usize,
}

impl DenseTwoGrid {
    pub fn build(model: &ThermalModel<f64>, rho: &[f64]) -> Self {
        let mesh = &model.mesh;
        assert!(mesh.nel[..mesh.dim].iter().all(|&n| n % 2 == 0));
        let a = assemble_dense(model, rho);
        let diag: Vec<f64> = (0..a.len()).map(|i| a[i][i]).collect();
        let mut coarse_nn = [1usize; 3];
        for d in 0..mesh.dim {
            coarse_nn[d] = mesh.nel[d] / 2 + 1;
        }
        let p = dense_prolongation(mesh.dim, mesh.nnode, coarse_nn, &model.dirichlet_mask);
        let coarse_mask = coarse_mask_of(mesh.dim, mesh.nnode, coarse_nn, &model.dirichlet_mask);
        let mut ac = triple_product(&p, &a);
        mask_dense(&mut ac, &coarse_mask);
        Self {
            a,
            diag,
            p,
            ac,
            coarse_mask,
            omega: 0.6,
            nu_pre: 1,
            nu_post: 1,
        }
    }

    fn smooth(&self, b: &[f64], x: &mut [f64], count: usize) {
        for _ in 0..count {
            let ax = matvec_dense(&self.a, x);
            for i in 0..x.len() {
                x[i] += self.omega * (b[i] - ax[i]) / self.diag[i];
            }
        }
    }

    pub fn vcycle(&self, b: &[f64], x: &mut Vec<f64>) {
        self.smooth(b, x, self.nu_pre);
        let ax = matvec_dense(&self.a, x);
        let r: Vec<f64> = b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect();
        let nc = self.p[0].len();
        let mut rc = vec![0.0; nc];
        for (row, &ri) in self.p.iter().zip(r.iter()) {
            for (j, &w) in row.iter().enumerate() {
                rc[j] += w * ri;
            }
        }
        for (v, &m) in rc.iter_mut().zip(self.coarse_mask.iter()) {
            if m {
                *v = 0.0;
            }
        }
        let xc = lu_solve(&self.ac, &rc);
        for (i, row) in self.p.iter().enumerate() {
            let mut acc = 0.0;
            for (j, &w) in row.iter().enumerate() {
                acc += w * xc[j];
            }
            x[i] += acc;
        }
        self.smooth(b, x, self.nu_post);
    }
}

/// Deterministic pseudo-random vector in [-1, 1].
pub fn random_vector(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Largest principal-angle sine between the spans of two orthonormal column
/// sets (given as column vectors of equal count).
pub fn span_distance(q1: &[Vec<f64>], q2: &[Vec<f64>]) -> f64 {
    assert_eq!(q1.len(), q2.len());
    let m = q1.len();
    // R = Q2 - Q1 (Q1^T Q2), columnwise
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let mut resid = q2[j].clone();
        for qi in q1 {
            let c: f64 = qi.iter().zip(q2[j].iter()).map(|(a, b)| a * b).sum();
            for (r, &v) in resid.iter_mut().zip(qi.iter()) {
                *r -= c * v;
            }
        }
        let norm: f64 = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    worst
}

/// Modified Gram-Schmidt orthonormalization (test-side tool).
pub fn orthonormalize(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for col in cols {
        let mut v = col.clone();
        for _ in 0..2 {
            for q in &out {
                let c: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, &qi) in v.iter_mut().zip(q.iter()) {
                    *vi -= c * qi;
                }
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-13, "rank-deficient basis in oracle");
        out.push(v.into_iter().map(|x| x / norm).collect());
    }
    out
}

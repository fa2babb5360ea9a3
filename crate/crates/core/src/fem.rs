//! Element conductivity matrices, the SIMP interpolation, matrix-free
//! application of the global operator, and objective/sensitivity evaluation.
//!
//! Prescribed-temperature DOFs are kept in the system: the operator acts as
//! the identity on them (row and column of each constrained DOF are zeroed,
//! diagonal set to one). This keeps the structured-grid transfer operators
//! of the multigrid hierarchy intact.

use crate::error::{Error, Result};
use crate::model::ThermalModel;
use crate::scalar::Real;

/// Reference conductivity matrix of a unit element with unit conductivity.
/// Symmetric, positive semidefinite, zero row sums.
#[derive(Debug, Clone)]
pub struct ElementMatrix<T> {
    pub n: usize,
    pub a: [[T; 8]; 8],
}

/// Exact conduction matrix of the multilinear element on the unit
/// square/cube. With shape factors phi_0(t) = 1 - t, phi_1(t) = t the entry
/// for corners a, b is a sum over directions of the derivative integral
/// (+-1) times the mass integrals (1/3 same corner coordinate, 1/6 across).
pub fn reference_element<T: Real>(dim: usize) -> ElementMatrix<T> {
    assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
    let corners: &[[usize; 3]] = if dim == 2 {
        &crate::model::CORNERS_2D
    } else {
        &crate::model::CORNERS_3D
    };
    let n = corners.len();
    let mut a = [[T::zero(); 8]; 8];
    for (i, ci) in corners.iter().enumerate() {
        for (j, cj) in corners.iter().enumerate() {
            let mut total = 0.0f64;
            for d in 0..dim {
                let grad = if ci[d] == cj[d] { 1.0 } else { -1.0 };
                let mut mass = 1.0;
                for dd in 0..dim {
                    if dd == d {
                        continue;
                    }
                    mass *= if ci[dd] == cj[dd] { 1.0 / 3.0 } else { 1.0 / 6.0 };
                }
                total += grad * mass;
            }
            a[i][j] = T::of(total);
        }
    }
    ElementMatrix { n, a }
}

#[inline]
pub(crate) fn simp_unchecked<T: Real>(rho: T, k0: T, kmin: T, penal: T) -> T {
    kmin + (k0 - kmin) * rho.powf(penal)
}

#[inline]
pub(crate) fn simp_value<T: Real>(rho: T, model: &ThermalModel<T>) -> T {
    simp_unchecked(rho, model.k0, model.kmin, model.penal)
}

/// Power-law interpolation of the conductivity between void and solid.
pub fn simp_conductivity<T: Real>(rho: T, model: &ThermalModel<T>) -> Result<T> {
    let slack = T::of(1e-12);
    if rho < -slack || rho > T::one() + slack {
        return Err(Error::Solver(format!(
            "density {rho} outside [0, 1]"
        )));
    }
    let clamped = rho.max(T::zero()).min(T::one());
    Ok(simp_unchecked(clamped, model.k0, model.kmin, model.penal))
}

fn check_nodal<T>(v: &[T], model: &ThermalModel<T>, what: &str) -> Result<()> {
    if v.len() != model.mesh.node_count() {
        return Err(Error::Shape(format!(
            "{what} has {} entries, mesh has {} nodes",
            v.len(),
            model.mesh.node_count()
        )));
    }
    Ok(())
}

fn check_elem<T>(v: &[T], model: &ThermalModel<T>, what: &str) -> Result<()> {
    if v.len() != model.mesh.elem_count() {
        return Err(Error::Shape(format!(
            "{what} has {} entries, mesh has {} elements",
            v.len(),
            model.mesh.elem_count()
        )));
    }
    Ok(())
}

/// Applies the conductivity operator element by element without assembling
/// it. Constrained rows act as the identity; constrained columns are
/// ignored.
pub fn apply_k<T: Real>(rho: &[T], v: &[T], model: &ThermalModel<T>) -> Result<Vec<T>> {
    check_elem(rho, model, "density field")?;
    check_nodal(v, model, "input vector")?;
    let mesh = &model.mesh;
    let em = reference_element::<T>(mesh.dim);
    let mut masked = v.to_vec();
    for &s in &model.dirichlet {
        masked[s] = T::zero();
    }
    let mut out = vec![T::zero(); v.len()];
    let mut nodes = [0usize; 8];
    let mut te = [T::zero(); 8];
    for e in 0..mesh.elem_count() {
        let nen = mesh.elem_nodes(e, &mut nodes);
        let ke = simp_unchecked(rho[e], model.k0, model.kmin, model.penal);
        for a in 0..nen {
            te[a] = masked[nodes[a]];
        }
        for a in 0..nen {
            let mut acc = T::zero();
            for b in 0..nen {
                acc += em.a[a][b] * te[b];
            }
            out[nodes[a]] += ke * acc;
        }
    }
    for &s in &model.dirichlet {
        out[s] = v[s];
    }
    Ok(out)
}

/// Applies the difference of two conductivity operators in one element pass;
/// constrained rows yield zero.
pub fn apply_delta_k<T: Real>(
    rho_cur: &[T],
    rho_ref: &[T],
    v: &[T],
    model: &ThermalModel<T>,
) -> Result<Vec<T>> {
    check_elem(rho_cur, model, "current density field")?;
    check_elem(rho_ref, model, "reference density field")?;
    check_nodal(v, model, "input vector")?;
    let mesh = &model.mesh;
    let em = reference_element::<T>(mesh.dim);
    let mut masked = v.to_vec();
    for &s in &model.dirichlet {
        masked[s] = T::zero();
    }
    let mut out = vec![T::zero(); v.len()];
    let mut nodes = [0usize; 8];
    let mut te = [T::zero(); 8];
    for e in 0..mesh.elem_count() {
        let dk = simp_unchecked(rho_cur[e], model.k0, model.kmin, model.penal)
            - simp_unchecked(rho_ref[e], model.k0, model.kmin, model.penal);
        if dk == T::zero() {
            continue;
        }
        let nen = mesh.elem_nodes(e, &mut nodes);
        for a in 0..nen {
            te[a] = masked[nodes[a]];
        }
        for a in 0..nen {
            let mut acc = T::zero();
            for b in 0..nen {
                acc += em.a[a][b] * te[b];
            }
            out[nodes[a]] += dk * acc;
        }
    }
    for &s in &model.dirichlet {
        out[s] = T::zero();
    }
    Ok(out)
}

/// Per-node diagonal of the masked operator; 1 at constrained nodes.
pub fn diagonal_of_k<T: Real>(rho: &[T], model: &ThermalModel<T>) -> Vec<T> {
    let mesh = &model.mesh;
    let em = reference_element::<T>(mesh.dim);
    let mut diag = vec![T::zero(); mesh.node_count()];
    let mut nodes = [0usize; 8];
    for e in 0..mesh.elem_count() {
        let nen = mesh.elem_nodes(e, &mut nodes);
        let ke = simp_unchecked(rho[e], model.k0, model.kmin, model.penal);
        for a in 0..nen {
            diag[nodes[a]] += ke * em.a[a][a];
        }
    }
    for &s in &model.dirichlet {
        diag[s] = T::one();
    }
    diag
}

/// Thermal compliance evaluated as the load/temperature inner product. Equal
/// to the energy form at an exact solve; the standard surrogate otherwise.
pub fn objective<T: Real>(t: &[T], q: &[T]) -> T {
    crate::linalg::dot(q, t)
}

/// Derivative of the compliance with respect to each element's physical
/// density; always non-positive.
pub fn element_sensitivities<T: Real>(
    t: &[T],
    rho: &[T],
    model: &ThermalModel<T>,
) -> Vec<T> {
    let mesh = &model.mesh;
    let em = reference_element::<T>(mesh.dim);
    let scale = model.penal * (model.k0 - model.kmin);
    let mut out = vec![T::zero(); mesh.elem_count()];
    let mut nodes = [0usize; 8];
    let mut te = [T::zero(); 8];
    for e in 0..mesh.elem_count() {
        let nen = mesh.elem_nodes(e, &mut nodes);
        for a in 0..nen {
            te[a] = t[nodes[a]];
        }
        let mut quad = T::zero();
        for a in 0..nen {
            let mut acc = T::zero();
            for b in 0..nen {
                acc += em.a[a][b] * te[b];
            }
            quad += te[a] * acc;
        }
        out[e] = -scale * rho[e].powf(model.penal - T::one()) * quad;
    }
    out
}

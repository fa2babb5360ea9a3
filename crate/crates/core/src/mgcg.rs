//! Conjugate gradients preconditioned by one multigrid V-cycle per
//! application, with relative-residual stopping and an iteration cap.

use crate::error::{Error, Result};
use crate::fem;
use crate::linalg::{axpy, dot, norm2};
use crate::model::ThermalModel;
use crate::multigrid::{vcycle, MgHierarchy};
use crate::scalar::Real;

/// Per-solve accounting.
#[derive(Debug, Clone)]
pub struct SolveStats<T> {
    pub cg_iterations: usize,
    /// Relative residual of the returned iterate against the load norm.
    pub final_rel_residual: T,
    /// Preconditioner applications (one V-cycle each).
    pub vcycles_used: usize,
    pub converged: bool,
}

/// Preconditioned CG on the masked conductivity operator. The relative
/// residual is measured against the load norm so the stopping criterion is
/// directly comparable with the reduced-solve reconstruction criterion.
/// Returns the best iterate seen; its residual never exceeds that of `x0`.
pub fn mgcg_solve<T: Real>(
    model: &ThermalModel<T>,
    h: &MgHierarchy<T>,
    q: &[T],
    x0: &[T],
    eps2: T,
    cg_max: usize,
) -> Result<(Vec<T>, SolveStats<T>)> {
    solve_inner(model, h, q, x0, eps2, cg_max, None)
}

/// Same as [`mgcg_solve`] but records the CG energy functional
/// 1/2 x^T K x - q^T x after every iteration (test instrumentation).
pub fn mgcg_solve_traced<T: Real>(
    model: &ThermalModel<T>,
    h: &MgHierarchy<T>,
    q: &[T],
    x0: &[T],
    eps2: T,
    cg_max: usize,
    energies: &mut Vec<T>,
) -> Result<(Vec<T>, SolveStats<T>)> {
    solve_inner(model, h, q, x0, eps2, cg_max, Some(energies))
}

fn energy<T: Real>(model: &ThermalModel<T>, h: &MgHierarchy<T>, q: &[T], x: &[T]) -> T {
    let kx = fem::apply_k(h.rho(), x, model).expect("shapes checked on entry");
    T::of(0.5) * dot(x, &kx) - dot(q, x)
}

fn solve_inner<T: Real>(
    model: &ThermalModel<T>,
    h: &MgHierarchy<T>,
    q: &[T],
    x0: &[T],
    eps2: T,
    cg_max: usize,
    mut energies: Option<&mut Vec<T>>,
) -> Result<(Vec<T>, SolveStats<T>)> {
    let n = model.mesh.node_count();
    if q.len() != n || x0.len() != n {
        return Err(Error::Shape(format!(
            "load/start vectors must have {n} entries, got {} and {}",
            q.len(),
            x0.len()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("initial iterate contains non-finite values".to_string()));
    }
    let qnorm = norm2(q);
    if qnorm == T::zero() {
        return Err(Error::ZeroLoad);
    }

    let mut x = x0.to_vec();
    let kx = fem::apply_k(h.rho(), &x, model)?;
    let mut r: Vec<T> = q.iter().zip(kx.iter()).map(|(&a, &b)| a - b).collect();
    let mut rel = norm2(&r) / qnorm;
    let mut best_x = x.clone();
    let mut best_rel = rel;
    let mut vcycles = 0usize;
    let mut iterations = 0usize;

    if let Some(tr) = energies.as_deref_mut() {
        tr.push(energy(model, h, q, &x));
    }

    if rel <= eps2 {
        return Ok((
            x,
            SolveStats {
                cg_iterations: 0,
                final_rel_residual: rel,
                vcycles_used: 0,
                converged: true,
            },
        ));
    }

    // preconditioner: one V-cycle applied to the residual, zero start
    let mut z = vec![T::zero(); n];
    vcycle(model, h, &r, &mut z);
    vcycles += 1;
    let mut p = z;
    let mut rz = dot(&r, &p);
    let mut converged = false;

    while iterations < cg_max {
        let ap = fem::apply_k(h.rho(), &p, model)?;
        let pap = dot(&p, &ap);
        if pap <= T::zero() || !pap.is_finite() {
            return Err(Error::Solver(format!(
                "CG breakdown: p^T K p = {pap} (operator or preconditioner not SPD)"
            )));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        rel = norm2(&r) / qnorm;
        if let Some(tr) = energies.as_deref_mut() {
            tr.push(energy(model, h, q, &x));
        }
        if rel < best_rel {
            best_rel = rel;
            best_x.copy_from_slice(&x);
        }
        if rel <= eps2 {
            converged = true;
            break;
        }
        if iterations == cg_max {
            break;
        }
        let mut znew = vec![T::zero(); n];
        vcycle(model, h, &r, &mut znew);
        vcycles += 1;
        let rznew = dot(&r, &znew);
        let beta = rznew / rz;
        rz = rznew;
        for i in 0..n {
            p[i] = znew[i] + beta * p[i];
        }
    }

    Ok((
        best_x,
        SolveStats {
            cg_iterations: iterations,
            final_rel_residual: best_rel,
            vcycles_used: vcycles,
            converged,
        },
    ))
}

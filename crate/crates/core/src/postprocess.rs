//! One-shot boundary smoothing after the design loop: project element
//! sensitivities to nodes, bisect an iso-level that preserves the volume
//! fraction, and assign fractional densities to cut elements by counting
//! sub-lattice points above the level.
//!
//! Sensitivities are non-positive, so they are negated before projection:
//! larger nodal values mean more material.

use crate::error::{Error, Result};
use crate::fem;
use crate::linalg::dot;
use crate::mgcg::mgcg_solve;
use crate::model::{StructuredMesh, ThermalModel};
use crate::multigrid::{build_hierarchy, MgParams};
use crate::scalar::Real;

/// Projects an element field onto nodes with cone weights
/// max(0, r_proj - d(node, centroid)), normalized per node.
pub fn nodal_projection<T: Real>(
    sens_elem: &[T],
    mesh: &StructuredMesh,
    r_proj: T,
) -> Result<Vec<T>> {
    if sens_elem.len() != mesh.elem_count() {
        return Err(Error::Shape(format!(
            "element field has {} entries, mesh has {} elements",
            sens_elem.len(),
            mesh.elem_count()
        )));
    }
    let rf = r_proj.as_f64();
    if rf < 1.0 {
        return Err(Error::Postprocess(format!(
            "projection radius must be at least 1 element, got {rf}"
        )));
    }
    let reach = rf.ceil() as i64;
    let nn = mesh.nnode;
    let nel = mesh.nel;
    let mut out = vec![T::zero(); mesh.node_count()];
    let mut n = 0usize;
    for k in 0..nn[2] {
        for j in 0..nn[1] {
            for i in 0..nn[0] {
                let mut acc = T::zero();
                let mut wsum = T::zero();
                let klo = if mesh.dim == 3 { (k as i64 - reach).max(0) } else { 0 };
                let khi = if mesh.dim == 3 {
                    (k as i64 + reach - 1).min(nel[2] as i64 - 1)
                } else {
                    0
                };
                for ek in klo..=khi {
                    for ej in (j as i64 - reach).max(0)..=(j as i64 + reach - 1).min(nel[1] as i64 - 1)
                    {
                        for ei in
                            (i as i64 - reach).max(0)..=(i as i64 + reach - 1).min(nel[0] as i64 - 1)
                        {
                            let dx = ei as f64 + 0.5 - i as f64;
                            let dy = ej as f64 + 0.5 - j as f64;
                            let dz = if mesh.dim == 3 { ek as f64 + 0.5 - k as f64 } else { 0.0 };
                            let d = (dx * dx + dy * dy + dz * dz).sqrt();
                            if d < rf {
                                let w = T::of(rf - d);
                                let e = ei as usize + nel[0] * (ej as usize + nel[1] * ek as usize);
                                acc += w * sens_elem[e];
                                wsum += w;
                            }
                        }
                    }
                }
                debug_assert!(wsum > T::zero(), "node support cannot be empty for r >= 1");
                out[n] = acc / wsum;
                n += 1;
            }
        }
    }
    Ok(out)
}

/// Density field produced by one level choice.
#[derive(Debug, Clone)]
pub struct SmoothedField<T> {
    pub densities: Vec<T>,
    pub level: T,
    /// Achieved volume fraction.
    pub volume: T,
}

#[inline]
fn multilinear<T: Real>(corner_vals: &[T], dim: usize, fx: T, fy: T, fz: T) -> T {
    let corners: &[[usize; 3]] = if dim == 2 {
        &crate::model::CORNERS_2D
    } else {
        &crate::model::CORNERS_3D
    };
    let one = T::one();
    let mut acc = T::zero();
    for (val, c) in corner_vals.iter().zip(corners.iter()) {
        let wx = if c[0] == 0 { one - fx } else { fx };
        let wy = if c[1] == 0 { one - fy } else { fy };
        let wz = if dim == 3 {
            if c[2] == 0 {
                one - fz
            } else {
                fz
            }
        } else {
            one
        };
        acc += *val * wx * wy * wz;
    }
    acc
}

/// Thresholds the nodal field at `level`: an element becomes solid when all
/// corners are above, void when all are below, and otherwise gets the
/// fraction of its (subdiv+1)^dim interpolation-lattice points above the
/// level.
pub fn smooth_densities<T: Real>(
    ns: &[T],
    mesh: &StructuredMesh,
    level: T,
    subdiv: usize,
) -> SmoothedField<T> {
    assert!(subdiv >= 1, "subdivision must be at least 1");
    let ne = mesh.elem_count();
    let nen = mesh.nodes_per_elem();
    let mut nodes = [0usize; 8];
    let mut corner_vals = [T::zero(); 8];
    let mut densities = vec![T::zero(); ne];
    let lattice = subdiv + 1;
    let total_pts = if mesh.dim == 2 {
        lattice * lattice
    } else {
        lattice * lattice * lattice
    };
    let inv_total = T::one() / T::of(total_pts as f64);
    let inv_s = T::one() / T::of(subdiv as f64);

    let mut vol = T::zero();
    for e in 0..ne {
        mesh.elem_nodes(e, &mut nodes);
        let mut all_above = true;
        let mut all_below = true;
        for a in 0..nen {
            let v = ns[nodes[a]];
            corner_vals[a] = v;
            if v <= level {
                all_above = false;
            }
            if v >= level {
                all_below = false;
            }
        }
        let d = if all_above {
            T::one()
        } else if all_below {
            T::zero()
        } else {
            let mut count = 0usize;
            let kz = if mesh.dim == 3 { subdiv } else { 0 };
            for pk in 0..=kz {
                let fz = T::of(pk as f64) * inv_s;
                for pj in 0..=subdiv {
                    let fy = T::of(pj as f64) * inv_s;
                    for pi in 0..=subdiv {
                        let fx = T::of(pi as f64) * inv_s;
                        let v = multilinear(&corner_vals[..nen], mesh.dim, fx, fy, fz);
                        if v > level {
                            count += 1;
                        }
                    }
                }
            }
            T::of(count as f64) * inv_total
        };
        densities[e] = d;
        vol += d;
    }
    SmoothedField {
        densities,
        level,
        volume: vol / T::of(ne as f64),
    }
}

/// Bisects the iso-level so the smoothed field's volume fraction lands
/// within 1e-3 of the target. The volume is nonincreasing in the level,
/// which is what makes bisection valid.
pub fn find_level<T: Real>(
    ns: &[T],
    mesh: &StructuredMesh,
    vol_target: T,
    subdiv: usize,
) -> Result<T> {
    let mut min = ns[0];
    let mut max = ns[0];
    for &v in ns.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    let span = max - min;
    if !(span > T::zero()) {
        return Err(Error::Postprocess(
            "constant nodal sensitivity field: any level is degenerate".to_string(),
        ));
    }
    if vol_target < T::zero() || vol_target > T::one() {
        return Err(Error::Postprocess(format!(
            "volume target {vol_target} outside the achievable [0, 1]"
        )));
    }
    let pad = span * T::of(1e-9);
    let mut lo = min - pad; // volume 1 here
    let mut hi = max + pad; // volume 0 here
    let tol = T::of(1e-3);
    for _ in 0..100 {
        let mid = T::of(0.5) * (lo + hi);
        let field = smooth_densities(ns, mesh, mid, subdiv);
        let err = field.volume - vol_target;
        if err.abs() <= tol {
            return Ok(mid);
        }
        if err > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Postprocess(
        "level bisection did not reach the volume tolerance in 100 steps".to_string(),
    ))
}

/// Solver settings for the verification solve on the smoothed field.
#[derive(Debug, Clone, Copy)]
pub struct PostprocessParams<T> {
    pub r_proj: T,
    pub subdiv: usize,
    pub vol_target: T,
    pub mg: MgParams<T>,
    pub eps2: T,
    pub cg_max: usize,
}

/// Result of the one-shot smoothing pass.
#[derive(Debug, Clone)]
pub struct PostprocessReport<T> {
    pub smoothed: Vec<T>,
    pub level: T,
    pub volume: T,
    pub objective_before: T,
    /// Compliance of the smoothed design from a fresh converged solve, so
    /// the reported number is independent of the solve path used in the loop.
    pub objective_after: T,
    pub vcycles: usize,
}

/// Runs the three smoothing steps on a finished design and re-solves the
/// temperature field on the smoothed densities.
///
/// The incoming temperature field is first re-converged on the final design
/// (a no-op when the loop already solved it tightly): the projected
/// sensitivities and the before/after objectives are then independent of the
/// solve path the loop ended on.
pub fn postprocess<T: Real>(
    model: &ThermalModel<T>,
    physical: &[T],
    temperature: &[T],
    load: &[T],
    params: &PostprocessParams<T>,
) -> Result<PostprocessReport<T>> {
    let h_state = build_hierarchy(model, physical, params.mg)?;
    let (t_state, stats_state) =
        mgcg_solve(model, &h_state, load, temperature, params.eps2, params.cg_max)?;

    let sens = fem::element_sensitivities(&t_state, physical, model);
    let material_score: Vec<T> = sens.iter().map(|&s| -s).collect();
    let ns = nodal_projection(&material_score, &model.mesh, params.r_proj)?;
    let level = find_level(&ns, &model.mesh, params.vol_target, params.subdiv)?;
    let field = smooth_densities(&ns, &model.mesh, level, params.subdiv);

    let hierarchy = build_hierarchy(model, &field.densities, params.mg)?;
    let (t_after, stats) = mgcg_solve(
        model,
        &hierarchy,
        load,
        &t_state,
        params.eps2,
        params.cg_max,
    )?;
    Ok(PostprocessReport {
        objective_before: dot(load, &t_state),
        objective_after: dot(load, &t_after),
        smoothed: field.densities,
        level,
        volume: field.volume,
        vcycles: stats_state.vcycles_used + stats.vcycles_used,
    })
}

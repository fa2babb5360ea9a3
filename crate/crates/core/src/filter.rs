//! Cone-weighted density filter, its adjoint for the sensitivity chain rule,
//! and the geometrically decaying filter-radius schedule.
//!
//! The mesh is uniform, so the raw cone weight depends only on the integer
//! offset between element centroids. The filter stores one shared offset
//! stencil plus a per-element normalization (the sum of weights clipped at
//! the domain boundary); that is equivalent to per-element neighbor lists
//! but keeps memory linear in the mesh size for large radii.

use crate::error::{Error, Result};
use crate::model::StructuredMesh;
use crate::scalar::Real;

/// Normalized cone-weight stencil for one radius on one mesh.
#[derive(Debug, Clone)]
pub struct FilterWeights<T> {
    pub radius: T,
    nel: [usize; 3],
    /// Integer centroid offsets with positive cone weight.
    offsets: Vec<([i32; 3], T)>,
    /// Per-element sum of in-bounds raw weights.
    norm: Vec<T>,
}

impl<T: Real> FilterWeights<T> {
    /// Per-element normalization sums (test hook).
    pub fn norms(&self) -> &[T] {
        &self.norm
    }

    /// Number of stencil offsets with positive weight.
    pub fn stencil_len(&self) -> usize {
        self.offsets.len()
    }
}

/// Builds the filter stencil for radius `r`: raw weight max(0, r - d) over
/// centroid distances d, normalized per element.
pub fn build_filter<T: Real>(mesh: &StructuredMesh, r: T) -> Result<FilterWeights<T>> {
    if r <= T::zero() {
        return Err(Error::Solver(format!("filter radius must be positive, got {r}")));
    }
    let rf = r.as_f64();
    let reach = rf.ceil() as i32;
    let mut offsets = Vec::new();
    let kk_range = if mesh.dim == 3 { -reach..=reach } else { 0..=0 };
    for dk in kk_range {
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let d2 = (di * di + dj * dj + dk * dk) as f64;
                let d = d2.sqrt();
                if d < rf {
                    offsets.push(([di, dj, dk], T::of(rf - d)));
                }
            }
        }
    }
    let nel = mesh.nel;
    let ne = mesh.elem_count();
    let mut norm = vec![T::zero(); ne];
    for e in 0..ne {
        let c = mesh.elem_coords(e);
        let mut sum = T::zero();
        for &(off, w) in &offsets {
            if in_bounds(&c, &off, &nel) {
                sum += w;
            }
        }
        norm[e] = sum;
    }
    Ok(FilterWeights {
        radius: r,
        nel,
        offsets,
        norm,
    })
}

#[inline]
fn in_bounds(c: &[usize; 3], off: &[i32; 3], nel: &[usize; 3]) -> bool {
    for d in 0..3 {
        let v = c[d] as i64 + off[d] as i64;
        if v < 0 || v >= nel[d] as i64 {
            return false;
        }
    }
    true
}

#[inline]
fn neighbor(c: &[usize; 3], off: &[i32; 3], nel: &[usize; 3]) -> usize {
    let i = (c[0] as i64 + off[0] as i64) as usize;
    let j = (c[1] as i64 + off[1] as i64) as usize;
    let k = (c[2] as i64 + off[2] as i64) as usize;
    i + nel[0] * (j + nel[1] * k)
}

fn check_field<T>(field: &[T], w: &FilterWeights<T>) -> Result<()> {
    let ne = w.nel[0] * w.nel[1] * w.nel[2];
    if field.len() != ne {
        return Err(Error::Shape(format!(
            "field has {} entries, filter was built for {} elements",
            field.len(),
            ne
        )));
    }
    Ok(())
}

/// Physical densities: weighted local average of the design densities.
pub fn filter_density<T: Real>(rho: &[T], w: &FilterWeights<T>) -> Result<Vec<T>> {
    check_field(rho, w)?;
    let ne = rho.len();
    let mut out = vec![T::zero(); ne];
    let mesh_nel = w.nel;
    for e in 0..ne {
        let c = coords(e, &mesh_nel);
        let mut acc = T::zero();
        for &(off, wt) in &w.offsets {
            if in_bounds(&c, &off, &mesh_nel) {
                acc += wt * rho[neighbor(&c, &off, &mesh_nel)];
            }
        }
        out[e] = acc / w.norm[e];
    }
    Ok(out)
}

/// Transpose of [`filter_density`]: pushes a derivative with respect to the
/// physical densities back onto the design densities. Uses the symmetry of
/// the cone weight in the centroid offset.
pub fn chain_sensitivity<T: Real>(df_dphys: &[T], w: &FilterWeights<T>) -> Result<Vec<T>> {
    check_field(df_dphys, w)?;
    let ne = df_dphys.len();
    let mesh_nel = w.nel;
    let scaled: Vec<T> = df_dphys
        .iter()
        .zip(w.norm.iter())
        .map(|(&v, &n)| v / n)
        .collect();
    let mut out = vec![T::zero(); ne];
    for e in 0..ne {
        let c = coords(e, &mesh_nel);
        let mut acc = T::zero();
        for &(off, wt) in &w.offsets {
            if in_bounds(&c, &off, &mesh_nel) {
                acc += wt * scaled[neighbor(&c, &off, &mesh_nel)];
            }
        }
        out[e] = acc;
    }
    Ok(out)
}

#[inline]
fn coords(e: usize, nel: &[usize; 3]) -> [usize; 3] {
    let i = e % nel[0];
    let rest = e / nel[0];
    [i, rest % nel[1], rest / nel[1]]
}

/// Geometrically decaying filter-radius schedule: starts at `alpha * L`,
/// decays by a constant factor chosen so the radius reaches `r_min` after
/// `lp` cycles, then stays there.
#[derive(Debug, Clone)]
pub struct RadiusSchedule<T> {
    pub r_min: T,
    pub r0: T,
    pub eta: T,
    pub lp: usize,
}

impl<T: Real> RadiusSchedule<T> {
    pub fn new(r_min: T, alpha: T, domain_side: T, lp: usize) -> Self {
        let r0 = alpha * domain_side;
        let eta = if r0 > r_min {
            ((r_min.ln() - r0.ln()) / T::of(lp as f64)).exp()
        } else {
            // Schedule already at (or below) the floor: hold it constant so
            // the radius stays monotone.
            T::one()
        };
        Self { r_min, r0, eta, lp }
    }

    /// Radius at design cycle `k`, clamped below by `r_min`.
    pub fn radius_at(&self, k: usize) -> T {
        let decayed = self.r0 * self.eta.powf(T::of(k as f64));
        self.r_min.max(decayed)
    }
}

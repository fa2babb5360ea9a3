//! Reduced-order reanalysis path and the per-cycle solver dispatch.
//!
//! A reference design snapshot keeps the multigrid hierarchy that was built
//! for it; that hierarchy plays the role a factorized reference operator
//! would in classical combined-approximation reanalysis, without storing a
//! factorization. Each reduced solve builds a small basis by recursion —
//! the first vector is the previous cycle's temperature field, each further
//! vector is one V-cycle on the reference hierarchy against the conductivity
//! change applied to the previous vector — orthonormalizes it via a thin
//! singular-value factorization, and solves the m-by-m projected system.
//! The result is accepted only if its relative residual stays within the
//! reconstruction threshold; otherwise the full MGCG solver runs and the
//! reference snapshot is rebuilt from that solve.

use crate::error::{Error, Result};
use crate::fem;
use crate::linalg::{dot, norm2, orthonormalize_columns, solve_spd_dense};
use crate::metrics::SolverPath;
use crate::mgcg::{mgcg_solve, SolveStats};
use crate::model::ThermalModel;
use crate::multigrid::{build_hierarchy, vcycle, MgHierarchy, MgParams};
use crate::scalar::Real;

/// Reference snapshot: densities (carried by the hierarchy), the hierarchy
/// itself, and the temperature solution of the snapshot solve.
#[derive(Debug, Clone)]
pub struct CarmReference<T> {
    pub hierarchy: MgHierarchy<T>,
    pub t0: Vec<T>,
}

impl<T: Real> CarmReference<T> {
    pub fn rho_ref(&self) -> &[T] {
        self.hierarchy.rho()
    }
}

/// Orthonormal reduced basis built for one design cycle.
#[derive(Debug, Clone)]
pub struct Carm<T> {
    /// Orthonormal columns spanning the approximation subspace.
    pub basis: Vec<Vec<T>>,
    /// Requested basis size; `basis.len()` may be smaller after rank drops.
    pub m_requested: usize,
    /// Seed vector the recursion started from.
    pub seed: Vec<T>,
}

impl<T: Real> Carm<T> {
    pub fn m(&self) -> usize {
        self.basis.len()
    }

    /// Largest deviation of the basis Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let m = self.basis.len();
        let mut worst = T::zero();
        for i in 0..m {
            for j in i..m {
                let g = dot(&self.basis[i], &self.basis[j]);
                let expect = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g - expect).abs());
            }
        }
        worst
    }
}

/// When the reduced path activates and when its solutions are accepted.
#[derive(Debug, Clone, Copy)]
pub struct DispatchPolicy<T> {
    /// Design cycle before which only the full solver runs.
    pub n_on: usize,
    /// Reconstruction criterion: accept a reduced solution only if its
    /// relative residual stays at or below this threshold.
    pub eps1: T,
}

/// Builds the reduced basis: seed vector first, then `m - 1` recursion
/// steps, each one V-cycle on the reference hierarchy with right-hand side
/// minus the conductivity change applied to the previous vector, started
/// from the previous vector. Directions with singular values below
/// 1e-12 of the largest are dropped.
pub fn build_carm<T: Real>(
    model: &ThermalModel<T>,
    reference: &CarmReference<T>,
    rho_cur: &[T],
    seed: &[T],
    m: usize,
) -> Result<Carm<T>> {
    if m == 0 {
        return Err(Error::DegenerateBasis("basis size must be at least 1".to_string()));
    }
    if seed.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("basis seed contains non-finite values".to_string()));
    }
    let mut raw: Vec<Vec<T>> = Vec::with_capacity(m);
    raw.push(seed.to_vec());
    for i in 1..m {
        let minus_dk = {
            let mut b = fem::apply_delta_k(rho_cur, reference.rho_ref(), &raw[i - 1], model)?;
            for v in b.iter_mut() {
                *v = -*v;
            }
            b
        };
        let mut x = raw[i - 1].clone();
        vcycle(model, &reference.hierarchy, &minus_dk, &mut x);
        raw.push(x);
    }
    let basis = orthonormalize_columns(raw, T::of(1e-12));
    if basis.is_empty() {
        return Err(Error::DegenerateBasis(
            "all basis directions collapsed (zero seed?)".to_string(),
        ));
    }
    Ok(Carm {
        basis,
        m_requested: m,
        seed: seed.to_vec(),
    })
}

/// Projects the current operator onto the basis (m operator applications),
/// solves the dense m-by-m symmetric system, and expands the solution back.
pub fn reduced_solve<T: Real>(
    model: &ThermalModel<T>,
    rho_cur: &[T],
    carm: &Carm<T>,
    q: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    let m = carm.m();
    let mut kb: Vec<Vec<T>> = Vec::with_capacity(m);
    for col in &carm.basis {
        kb.push(fem::apply_k(rho_cur, col, model)?);
    }
    let mut kr = vec![vec![T::zero(); m]; m];
    for i in 0..m {
        for j in i..m {
            let v = dot(&carm.basis[i], &kb[j]);
            kr[i][j] = v;
            kr[j][i] = v;
        }
    }
    let qr: Vec<T> = carm.basis.iter().map(|col| dot(col, q)).collect();
    let y = solve_spd_dense(&kr, &qr)
        .map_err(|e| Error::DegenerateBasis(format!("projected system is singular: {e}")))?;
    let n = q.len();
    let mut t = vec![T::zero(); n];
    for (yi, col) in y.iter().zip(carm.basis.iter()) {
        crate::linalg::axpy(*yi, col, &mut t);
    }
    Ok((y, t))
}

/// Relative residual of a temperature field against the current operator.
pub fn residual_norm<T: Real>(
    model: &ThermalModel<T>,
    rho_cur: &[T],
    t: &[T],
    q: &[T],
) -> Result<T> {
    let qnorm = norm2(q);
    if qnorm == T::zero() {
        return Err(Error::ZeroLoad);
    }
    let kt = fem::apply_k(rho_cur, t, model)?;
    let mut acc = T::zero();
    for (a, b) in kt.iter().zip(q.iter()) {
        let d = *a - *b;
        acc += d * d;
    }
    Ok(acc.sqrt() / qnorm)
}

/// What one dispatched solve produced.
#[derive(Debug, Clone)]
pub struct CycleOutcome<T> {
    pub t: Vec<T>,
    pub path: SolverPath,
    /// Relative residual of the accepted field.
    pub res: T,
    pub cg_iters: usize,
    pub vcycles: usize,
    /// Orthonormality defect of the basis, when one was built this cycle.
    pub ortho_defect: Option<T>,
}

/// Per-run solver state: the dispatch policy, solver settings, and the
/// current reference snapshot. The snapshot changes only on cycles where the
/// full solver ran (initial phase or fallback), never on accepted reduced
/// cycles.
#[derive(Debug)]
pub struct Dispatcher<T> {
    pub policy: DispatchPolicy<T>,
    pub mg: MgParams<T>,
    pub eps2: T,
    pub cg_max: usize,
    pub m_basis: usize,
    pub reduced_enabled: bool,
    pub reference: Option<CarmReference<T>>,
}

impl<T: Real> Dispatcher<T> {
    pub fn new(
        policy: DispatchPolicy<T>,
        mg: MgParams<T>,
        eps2: T,
        cg_max: usize,
        m_basis: usize,
        reduced_enabled: bool,
    ) -> Self {
        Self {
            policy,
            mg,
            eps2,
            cg_max,
            m_basis,
            reduced_enabled,
            reference: None,
        }
    }

    fn full_solve(
        &mut self,
        model: &ThermalModel<T>,
        rho_cur: &[T],
        q: &[T],
        x0: &[T],
        path: SolverPath,
        extra_vcycles: usize,
        ortho_defect: Option<T>,
    ) -> Result<CycleOutcome<T>> {
        let hierarchy = build_hierarchy(model, rho_cur, self.mg)?;
        let (t, stats): (Vec<T>, SolveStats<T>) =
            mgcg_solve(model, &hierarchy, q, x0, self.eps2, self.cg_max)?;
        if self.reduced_enabled {
            self.reference = Some(CarmReference {
                hierarchy,
                t0: t.clone(),
            });
        }
        Ok(CycleOutcome {
            t,
            path,
            res: stats.final_rel_residual,
            cg_iters: stats.cg_iterations,
            vcycles: stats.vcycles_used + extra_vcycles,
            ortho_defect,
        })
    }

    /// Solves one design cycle's state equation, choosing between the
    /// reduced path and the full solver. `prev_t` seeds both the basis
    /// recursion and warm starts.
    pub fn solve_cycle(
        &mut self,
        model: &ThermalModel<T>,
        rho_cur: &[T],
        q: &[T],
        prev_t: &[T],
        cycle: usize,
    ) -> Result<CycleOutcome<T>> {
        let activate = self.reduced_enabled
            && cycle >= self.policy.n_on
            && self.reference.is_some();
        if !activate {
            return self.full_solve(model, rho_cur, q, prev_t, SolverPath::Mgcg, 0, None);
        }

        let reference = self.reference.as_ref().unwrap();
        let carm = build_carm(model, reference, rho_cur, prev_t, self.m_basis);
        let basis_vcycles = self.m_basis - 1;
        match carm {
            Ok(carm) => {
                let defect = carm.orthonormality_defect();
                match reduced_solve(model, rho_cur, &carm, q) {
                    Ok((_, t_reduced)) => {
                        let res = residual_norm(model, rho_cur, &t_reduced, q)?;
                        if res <= self.policy.eps1 {
                            Ok(CycleOutcome {
                                t: t_reduced,
                                path: SolverPath::Mgar,
                                res,
                                cg_iters: 0,
                                vcycles: basis_vcycles,
                                ortho_defect: Some(defect),
                            })
                        } else {
                            // never silently accept: fall back to the full
                            // solver, warm-started from the reduced solution
                            self.full_solve(
                                model,
                                rho_cur,
                                q,
                                &t_reduced,
                                SolverPath::MgcgFallback,
                                basis_vcycles,
                                Some(defect),
                            )
                        }
                    }
                    Err(Error::DegenerateBasis(_)) => self.full_solve(
                        model,
                        rho_cur,
                        q,
                        prev_t,
                        SolverPath::MgcgFallback,
                        basis_vcycles,
                        Some(defect),
                    ),
                    Err(e) => Err(e),
                }
            }
            Err(Error::DegenerateBasis(_)) => {
                self.full_solve(model, rho_cur, q, prev_t, SolverPath::MgcgFallback, 0, None)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{heat_load, mid_left_nodes, StructuredMesh, ThermalModel};

    fn setup(nel: usize, nl: usize) -> (ThermalModel<f64>, Vec<f64>, Vec<f64>) {
        let mesh = StructuredMesh::new(2, &[nel, nel]).unwrap();
        let ne = mesh.elem_count();
        let sink = mid_left_nodes(&mesh);
        let model = ThermalModel::new(mesh, 1.0, 1e-3, 3.0, vec![1e-4; ne], sink).unwrap();
        let rho = vec![0.5; ne];
        let q = heat_load(&model);
        let _ = nl;
        (model, rho, q)
    }

    fn reference_at(
        model: &ThermalModel<f64>,
        rho: &[f64],
        q: &[f64],
        nl: usize,
    ) -> CarmReference<f64> {
        let params = MgParams { nl, ..MgParams::default() };
        let h = build_hierarchy(model, rho, params).unwrap();
        let x0 = vec![0.0; q.len()];
        let (t0, _) = mgcg_solve(model, &h, q, &x0, 1e-12, 500).unwrap();
        CarmReference { hierarchy: h, t0 }
    }

    #[test]
    fn single_vector_basis_is_the_normalized_seed() {
        let (model, rho, q) = setup(6, 2);
        let reference = reference_at(&model, &rho, &q, 2);
        let seed = reference.t0.clone();
        let carm = build_carm(&model, &reference, &rho, &seed, 1).unwrap();
        assert_eq!(carm.m(), 1);
        let norm = norm2(&seed);
        for (b, s) in carm.basis[0].iter().zip(seed.iter()) {
            assert!((b - s / norm).abs() < 1e-14);
        }
    }

    #[test]
    fn unchanged_densities_keep_the_seed_in_the_span() {
        let (model, rho, q) = setup(6, 2);
        let reference = reference_at(&model, &rho, &q, 2);
        let seed = reference.t0.clone();
        let carm = build_carm(&model, &reference, &rho, &seed, 2).unwrap();
        assert!(carm.orthonormality_defect() < 1e-10);
        // projection of the seed onto the span reproduces it
        let mut proj = vec![0.0; seed.len()];
        for col in &carm.basis {
            let c = dot(col, &seed);
            crate::linalg::axpy(c, col, &mut proj);
        }
        let num: f64 = proj
            .iter()
            .zip(seed.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(num / norm2(&seed) < 1e-12);
    }

    #[test]
    fn galerkin_projection_is_exact_in_the_subspace() {
        // unchanged operator and exact seed: the reduced solution is the seed
        let (model, rho, q) = setup(6, 2);
        let reference = reference_at(&model, &rho, &q, 2);
        let seed = reference.t0.clone();
        let carm = build_carm(&model, &reference, &rho, &seed, 2).unwrap();
        let (_, t) = reduced_solve(&model, &rho, &carm, &q).unwrap();
        let res = residual_norm(&model, &rho, &t, &q).unwrap();
        assert!(res <= 1e-12, "res = {res}");
    }

    #[test]
    fn residual_norm_trivial_values() {
        let (model, rho, q) = setup(4, 2);
        let zeros = vec![0.0; q.len()];
        let res = residual_norm(&model, &rho, &zeros, &q).unwrap();
        assert!((res - 1.0).abs() < 1e-14);
        assert!(matches!(
            residual_norm(&model, &rho, &zeros, &zeros),
            Err(Error::ZeroLoad)
        ));
    }

    #[test]
    fn dispatcher_uses_full_solver_before_activation() {
        let (model, rho, q) = setup(8, 3);
        let mut d = Dispatcher::new(
            DispatchPolicy { n_on: 3, eps1: 0.5 },
            MgParams::default(),
            1e-6,
            200,
            2,
            true,
        );
        let prev = vec![0.0; q.len()];
        let out = d.solve_cycle(&model, &rho, &q, &prev, 0).unwrap();
        assert_eq!(out.path, SolverPath::Mgcg);
        assert!(d.reference.is_some());
        // reduced path activates once the cycle index reaches the threshold
        let out2 = d.solve_cycle(&model, &rho, &q, &out.t, 3).unwrap();
        assert_eq!(out2.path, SolverPath::Mgar);
        assert_eq!(out2.cg_iters, 0);
        assert!(out2.res <= 0.5);
    }

    #[test]
    fn reference_only_changes_on_full_solves() {
        let (model, rho, q) = setup(8, 3);
        let mut d = Dispatcher::new(
            DispatchPolicy { n_on: 0, eps1: 0.5 },
            MgParams::default(),
            1e-6,
            200,
            2,
            true,
        );
        let prev = vec![0.0; q.len()];
        let out = d.solve_cycle(&model, &rho, &q, &prev, 0).unwrap();
        assert_eq!(out.path, SolverPath::Mgcg); // no reference yet
        let t0_snapshot = d.reference.as_ref().unwrap().t0.clone();
        let out2 = d.solve_cycle(&model, &rho, &q, &out.t, 1).unwrap();
        assert_eq!(out2.path, SolverPath::Mgar);
        assert_eq!(d.reference.as_ref().unwrap().t0, t0_snapshot);
    }
}

//! The outer design loop: filter, solve, sensitivities, chain rule, density
//! update under the volume constraint, radius-schedule advance, stopping.
//!
//! Densities are updated with the classical optimality-criteria rule with a
//! move limit and damping; the Lagrange multiplier is found by bisection on
//! the *filtered* volume, since the constraint acts on physical material.

use crate::config::{ParsedConfig, SolverKind};
use crate::error::{Error, Result};
use crate::fem;
use crate::filter::{build_filter, chain_sensitivity, filter_density, FilterWeights, RadiusSchedule};
use crate::metrics::IterationRecord;
use crate::model::{build_model, heat_load, ThermalModel};
use crate::multigrid::MgParams;
use crate::reanalysis::{DispatchPolicy, Dispatcher};
use crate::scalar::Real;
use std::time::Instant;

/// Optimality-criteria update parameters.
#[derive(Debug, Clone, Copy)]
pub struct OcParams<T> {
    pub move_limit: T,
    pub damping: T,
    /// Absolute tolerance on the volume fraction reached by bisection.
    pub vol_tol: T,
    /// Multiplier-bracket growth factor.
    pub bracket_growth: T,
}

impl<T: Real> Default for OcParams<T> {
    fn default() -> Self {
        Self {
            move_limit: T::of(0.2),
            damping: T::of(0.5),
            vol_tol: T::of(1e-4),
            bracket_growth: T::of(2.0),
        }
    }
}

fn oc_candidate<T: Real>(rho: &[T], dfdrho: &[T], lambda: T, params: &OcParams<T>, out: &mut [T]) {
    let mv = params.move_limit;
    for ((o, &r), &s) in out.iter_mut().zip(rho.iter()).zip(dfdrho.iter()) {
        let s = s.min(T::zero()); // clamp positive round-off
        let factor = (-s / lambda).powf(params.damping);
        let lo = (r - mv).max(T::zero());
        let hi = (r + mv).min(T::one());
        *o = (r * factor).max(lo).min(hi);
    }
}

/// Optimality-criteria update: scales each density by (-dfdrho / lambda)^damping
/// within move limits and box bounds, with lambda bisected so the filtered
/// volume hits the target.
pub fn oc_update<T: Real>(
    rho: &[T],
    dfdrho: &[T],
    vol_target: T,
    params: &OcParams<T>,
    weights: &FilterWeights<T>,
) -> Result<Vec<T>> {
    if rho.len() != dfdrho.len() {
        return Err(Error::Shape(format!(
            "density and sensitivity lengths differ: {} vs {}",
            rho.len(),
            dfdrho.len()
        )));
    }
    let n = rho.len();
    let inv_n = T::one() / T::of(n as f64);
    let mut cand = vec![T::zero(); n];
    let filtered_mean = |lambda: T, cand: &mut Vec<T>| -> Result<T> {
        oc_candidate(rho, dfdrho, lambda, params, cand);
        let phys = filter_density(cand, weights)?;
        let mut sum = T::zero();
        for &v in &phys {
            sum += v;
        }
        Ok(sum * inv_n)
    };

    // bracket the multiplier: volume is nonincreasing in lambda
    let growth = params.bracket_growth;
    let mut lo = T::one();
    let mut hi = T::one();
    let g0 = filtered_mean(T::one(), &mut cand)? - vol_target;
    if g0.abs() <= params.vol_tol {
        return Ok(cand);
    }
    if g0 > T::zero() {
        let mut steps = 0;
        loop {
            let g = filtered_mean(hi, &mut cand)? - vol_target;
            if g.abs() <= params.vol_tol {
                return Ok(cand);
            }
            if g < T::zero() {
                break;
            }
            lo = hi;
            hi *= growth;
            steps += 1;
            if steps > 200 {
                return Err(Error::Solver(
                    "volume bisection bracket failure (degenerate sensitivities?)".to_string(),
                ));
            }
        }
    } else {
        let mut steps = 0;
        loop {
            let g = filtered_mean(lo, &mut cand)? - vol_target;
            if g.abs() <= params.vol_tol {
                return Ok(cand);
            }
            if g > T::zero() {
                break;
            }
            hi = lo;
            lo /= growth;
            steps += 1;
            if steps > 200 {
                return Err(Error::Solver(
                    "volume bisection bracket failure (degenerate sensitivities?)".to_string(),
                ));
            }
        }
    }

    for _ in 0..512 {
        let mid = T::of(0.5) * (lo + hi);
        let g = filtered_mean(mid, &mut cand)? - vol_target;
        if g.abs() <= params.vol_tol {
            oc_candidate(rho, dfdrho, mid, params, &mut cand);
            return Ok(cand);
        }
        if g > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Solver("volume bisection did not reach tolerance".to_string()))
}

/// Everything a finished run hands back: the last analyzed design triple,
/// the load vector, per-cycle records, and run-level diagnostics.
#[derive(Debug, Clone)]
pub struct OptResult<T> {
    pub model: ThermalModel<T>,
    /// Design densities of the last analyzed cycle.
    pub design: Vec<T>,
    /// Physical (filtered) densities of the last analyzed cycle.
    pub physical: Vec<T>,
    /// Temperature field accepted on the last cycle.
    pub temperature: Vec<T>,
    pub load: Vec<T>,
    pub history: Vec<IterationRecord>,
    /// Filter radius of the last cycle.
    pub final_radius: f64,
    /// Worst basis orthonormality defect seen across the run.
    pub max_basis_ortho_defect: f64,
}

/// Runs the full design loop for a validated configuration.
pub fn run<T: Real>(cfg: &ParsedConfig) -> Result<OptResult<T>> {
    run_with_progress(cfg, |_| {})
}

/// Same as [`run`]; invokes `on_cycle` after each completed cycle.
pub fn run_with_progress<T: Real>(
    cfg: &ParsedConfig,
    mut on_cycle: impl FnMut(&IterationRecord),
) -> Result<OptResult<T>> {
    let model: ThermalModel<T> = build_model(cfg)?;
    let mesh = &model.mesh;
    let q = heat_load(&model);
    let schedule = RadiusSchedule::new(
        T::of(cfg.r_min),
        T::of(cfg.alpha),
        T::of(cfg.domain_side()),
        cfg.lp_cycles(),
    );
    let mg = MgParams {
        nl: cfg.nl,
        omega: T::of(cfg.omega_jac),
        nu_pre: cfg.nu_pre,
        nu_post: cfg.nu_post,
    };
    let mut dispatcher = Dispatcher::new(
        DispatchPolicy {
            n_on: cfg.n_on_cycles(),
            eps1: T::of(cfg.eps1),
        },
        mg,
        T::of(cfg.eps2),
        cfg.cg_max(),
        cfg.m_basis,
        cfg.solver == SolverKind::Mgar,
    );
    let oc = OcParams::<T>::default();
    let volfrac = T::of(cfg.volfrac);

    let ne = mesh.elem_count();
    let nn = mesh.node_count();
    let mut rho = vec![volfrac; ne];
    let mut t_prev = vec![T::zero(); nn];
    let mut weights: Option<FilterWeights<T>> = None;
    let mut stencil_reach: i64 = -1;

    let mut history: Vec<IterationRecord> = Vec::with_capacity(cfg.max_cycles);
    let mut max_defect = 0.0f64;
    let mut final_design = rho.clone();
    let mut final_physical = Vec::new();
    let mut final_temperature = Vec::new();
    let mut final_radius = 0.0f64;

    for cycle in 0..cfg.max_cycles {
        let started = Instant::now();
        let radius = schedule.radius_at(cycle);
        let reach = radius.as_f64().ceil() as i64;
        if cfg.rebuild_every_cycle || weights.is_none() || reach != stencil_reach {
            weights = Some(build_filter(mesh, radius)?);
            stencil_reach = reach;
        }
        let w = weights.as_ref().unwrap();
        let physical = filter_density(&rho, w)?;
        debug_assert!(physical
            .iter()
            .all(|&v| v >= -T::of(1e-12) && v <= T::one() + T::of(1e-12)));

        let outcome = dispatcher.solve_cycle(&model, &physical, &q, &t_prev, cycle)?;
        let objective = fem::objective(&outcome.t, &q);
        if !objective.is_finite() {
            return Err(Error::Solver(format!(
                "non-finite objective at cycle {cycle}"
            )));
        }
        if let Some(d) = outcome.ortho_defect {
            max_defect = max_defect.max(d.as_f64());
        }

        let sens_phys = fem::element_sensitivities(&outcome.t, &physical, &model);
        let dfdrho = chain_sensitivity(&sens_phys, w)?;
        let rho_new = oc_update(&rho, &dfdrho, volfrac, &oc, w)?;

        let mut volume = T::zero();
        for &v in &physical {
            volume += v;
        }
        volume /= T::of(ne as f64);

        let record = IterationRecord {
            cycle,
            objective: objective.as_f64(),
            volume: volume.as_f64(),
            radius: radius.as_f64(),
            solver_path: outcome.path,
            res: outcome.res.as_f64(),
            cg_iters: outcome.cg_iters,
            vcycles: outcome.vcycles,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        on_cycle(&record);
        history.push(record);

        let mut change = T::zero();
        for (a, b) in rho_new.iter().zip(rho.iter()) {
            change = change.max((*a - *b).abs());
        }

        final_design = std::mem::take(&mut rho);
        final_physical = physical;
        final_temperature = outcome.t.clone();
        final_radius = radius.as_f64();
        t_prev = outcome.t;
        rho = rho_new;

        if cfg.early_stop && change.as_f64() < cfg.change_tol {
            break;
        }
    }

    Ok(OptResult {
        model,
        design: final_design,
        physical: final_physical,
        temperature: final_temperature,
        load: q,
        history,
        final_radius,
        max_basis_ortho_defect: max_defect,
    })
}

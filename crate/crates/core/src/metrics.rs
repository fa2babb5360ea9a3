//! Per-cycle accounting: solver path, residuals, CG iterations, V-cycle
//! counts, and run summaries with a hardware-independent cost proxy.
//!
//! The cost proxy is the total V-cycle count: a V-cycle's cost is dominated
//! by fine-level operator applications on every solve path, so the ratio of
//! totals compares runs without depending on the machine. Wall time is
//! measured and reported on stdout but never written into output files,
//! which keeps them byte-deterministic.

use crate::error::{Error, Result};
use std::fmt;

/// Which solve path produced a cycle's temperature field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Full multigrid-preconditioned CG solve.
    Mgcg,
    /// Accepted reduced-order solution.
    Mgar,
    /// Reduced solution rejected; full solve re-run and reference rebuilt.
    MgcgFallback,
}

impl SolverPath {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverPath::Mgcg => "mgcg",
            SolverPath::Mgar => "mgar",
            SolverPath::MgcgFallback => "mgcg-fallback",
        }
    }

    /// A cycle counts as an MGCG evaluation when the full solver ran.
    pub fn is_mgcg_evaluation(self) -> bool {
        matches!(self, SolverPath::Mgcg | SolverPath::MgcgFallback)
    }
}

impl fmt::Display for SolverPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One design cycle's record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub cycle: usize,
    pub objective: f64,
    /// Mean physical density of the analyzed design.
    pub volume: f64,
    /// Filter radius used this cycle, in element units.
    pub radius: f64,
    pub solver_path: SolverPath,
    /// Relative residual of the accepted temperature field.
    pub res: f64,
    pub cg_iters: usize,
    pub vcycles: usize,
    /// Measured wall time; reported on stdout, zeroed in file output.
    pub wall_ms: f64,
}

/// Totals over one run, optionally normalized against a baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub cycles: usize,
    pub final_objective: f64,
    pub final_volume: f64,
    pub total_vcycles: usize,
    pub total_cg_iterations: usize,
    pub mgcg_evaluations: usize,
    pub total_wall_ms: f64,
    /// total_vcycles / baseline.total_vcycles, when a baseline is given.
    pub normalized_cost: Option<f64>,
    /// 1 - normalized_cost.
    pub improvement_vcycles: Option<f64>,
    /// 1 - wall ratio against the baseline.
    pub improvement_wall: Option<f64>,
}

/// Reduces a history to totals; with a baseline the efficiency improvement
/// is reported both in V-cycles and wall time.
pub fn summarize(history: &[IterationRecord], baseline: Option<&RunSummary>) -> Result<RunSummary> {
    if history.is_empty() {
        return Err(Error::Solver("cannot summarize an empty history".to_string()));
    }
    let last = history.last().unwrap();
    let total_vcycles: usize = history.iter().map(|r| r.vcycles).sum();
    let total_cg_iterations: usize = history.iter().map(|r| r.cg_iters).sum();
    let mgcg_evaluations = history
        .iter()
        .filter(|r| r.solver_path.is_mgcg_evaluation())
        .count();
    let total_wall_ms: f64 = history.iter().map(|r| r.wall_ms).sum();
    let (normalized_cost, improvement_vcycles, improvement_wall) = match baseline {
        Some(b) if b.total_vcycles > 0 => {
            let ratio = total_vcycles as f64 / b.total_vcycles as f64;
            let wall = if b.total_wall_ms > 0.0 {
                Some(1.0 - total_wall_ms / b.total_wall_ms)
            } else {
                None
            };
            (Some(ratio), Some(1.0 - ratio), wall)
        }
        _ => (None, None, None),
    };
    Ok(RunSummary {
        cycles: history.len(),
        final_objective: last.objective,
        final_volume: last.volume,
        total_vcycles,
        total_cg_iterations,
        mgcg_evaluations,
        total_wall_ms,
        normalized_cost,
        improvement_vcycles,
        improvement_wall,
    })
}

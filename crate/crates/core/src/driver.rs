//! End-to-end flows behind the command-line entry points: run a
//! configuration and write its outputs, compare two runs, smooth an
//! exported field. All numeric work happens in f64 here.

use crate::config::ParsedConfig;
use crate::error::Result;
use crate::io::{self, FieldFormat};
use crate::metrics::{summarize, IterationRecord, RunSummary};
use crate::model::heat_load;
use crate::multigrid::MgParams;
use crate::optimizer::{run_with_progress, OptResult};
use crate::postprocess::{postprocess, PostprocessParams, PostprocessReport};
use std::path::Path;

/// A finished run plus its summary and optional smoothing report.
#[derive(Debug)]
pub struct RunArtifacts {
    pub result: OptResult<f64>,
    pub summary: RunSummary,
    pub post: Option<PostprocessReport<f64>>,
}

fn mg_params(cfg: &ParsedConfig) -> MgParams<f64> {
    MgParams {
        nl: cfg.nl,
        omega: cfg.omega_jac,
        nu_pre: cfg.nu_pre,
        nu_post: cfg.nu_post,
    }
}

fn postprocess_params(cfg: &ParsedConfig) -> PostprocessParams<f64> {
    PostprocessParams {
        // incident-element nodal averaging unless overridden; larger radii
        // erode features whose width is close to the filter radius
        r_proj: cfg.r_proj.unwrap_or(1.5),
        subdiv: cfg.subdiv,
        vol_target: cfg.volfrac,
        mg: mg_params(cfg),
        eps2: cfg.eps2,
        cg_max: cfg.cg_max(),
    }
}

/// Runs the loop only (no files); used by `compare`.
pub fn execute_in_memory(
    cfg: &ParsedConfig,
    on_cycle: impl FnMut(&IterationRecord),
) -> Result<RunArtifacts> {
    let result = run_with_progress::<f64>(cfg, on_cycle)?;
    let summary = summarize(&result.history, None)?;
    let post = if cfg.postprocess_enabled {
        Some(postprocess(
            &result.model,
            &result.physical,
            &result.temperature,
            &result.load,
            &postprocess_params(cfg),
        )?)
    } else {
        None
    };
    Ok(RunArtifacts {
        result,
        summary,
        post,
    })
}

fn write_field_set(
    field: &[f64],
    mesh: &crate::model::StructuredMesh,
    dir: &Path,
    stem: &str,
) -> Result<()> {
    io::export_field(field, mesh, &dir.join(format!("{stem}.csv")), FieldFormat::Csv)?;
    io::export_field(field, mesh, &dir.join(format!("{stem}.vtk")), FieldFormat::VtkLegacy)?;
    if mesh.dim == 2 {
        io::export_field(field, mesh, &dir.join(format!("{stem}.pgm")), FieldFormat::Graymap)?;
    }
    Ok(())
}

/// Runs a configuration and writes fields, metrics.csv, and summary.txt
/// into `outdir` (which is created if missing).
pub fn execute_run(
    cfg: &ParsedConfig,
    outdir: &Path,
    on_cycle: impl FnMut(&IterationRecord),
) -> Result<RunArtifacts> {
    let artifacts = execute_in_memory(cfg, on_cycle)?;
    std::fs::create_dir_all(outdir)?;
    let mesh = &artifacts.result.model.mesh;
    write_field_set(&artifacts.result.physical, mesh, outdir, "density")?;
    io::export_field(
        &artifacts.result.design,
        mesh,
        &outdir.join("design.csv"),
        FieldFormat::Csv,
    )?;
    if let Some(post) = &artifacts.post {
        write_field_set(&post.smoothed, mesh, outdir, "smoothed")?;
    }
    io::write_metrics_csv(&artifacts.result.history, &outdir.join("metrics.csv"))?;
    io::write_summary(
        &artifacts.summary,
        artifacts.post.as_ref(),
        &outdir.join("summary.txt"),
    )?;
    Ok(artifacts)
}

/// Side-by-side report of two runs, with run B as the cost baseline.
#[derive(Debug)]
pub struct CompareReport {
    pub summary_a: RunSummary,
    pub summary_b: RunSummary,
    /// |f_A - f_B| / |f_B|
    pub rel_objective_diff: f64,
    /// total V-cycles of A over total V-cycles of B.
    pub vcycle_ratio: f64,
    /// 1 - vcycle_ratio.
    pub improvement_vcycles: f64,
    /// wall time of A over wall time of B (measured, machine-dependent).
    pub wall_ratio: f64,
}

/// Runs both configurations in memory and reports parity and cost.
pub fn execute_compare(
    cfg_a: &ParsedConfig,
    cfg_b: &ParsedConfig,
    mut on_cycle: impl FnMut(&str, &IterationRecord),
) -> Result<CompareReport> {
    let a = execute_in_memory(cfg_a, |r| on_cycle("A", r))?;
    let baseline = execute_in_memory(cfg_b, |r| on_cycle("B", r))?;
    let summary_a = summarize(&a.result.history, Some(&baseline.summary))?;
    let summary_b = baseline.summary;
    let rel_objective_diff = (summary_a.final_objective - summary_b.final_objective).abs()
        / summary_b.final_objective.abs();
    let vcycle_ratio = summary_a.total_vcycles as f64 / summary_b.total_vcycles as f64;
    let wall_ratio = if summary_b.total_wall_ms > 0.0 {
        summary_a.total_wall_ms / summary_b.total_wall_ms
    } else {
        f64::NAN
    };
    Ok(CompareReport {
        summary_a,
        summary_b,
        rel_objective_diff,
        vcycle_ratio,
        improvement_vcycles: 1.0 - vcycle_ratio,
        wall_ratio,
    })
}

/// Standalone smoothing of an exported density field: solves the state
/// equation on the field, smooths, re-solves, and writes the results.
pub fn execute_postprocess(
    cfg: &ParsedConfig,
    field_csv: &Path,
    outdir: &Path,
) -> Result<PostprocessReport<f64>> {
    let model = crate::model::build_model::<f64>(cfg)?;
    let text = std::fs::read_to_string(field_csv)?;
    let physical = io::parse_field_csv::<f64>(&text, &model.mesh)?;
    if physical.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(crate::error::Error::Postprocess(
            "density field values must lie in [0, 1]".to_string(),
        ));
    }
    let q = heat_load(&model);
    // postprocess converges the state itself; start it from zero
    let t0 = vec![0.0; q.len()];
    let report = postprocess(&model, &physical, &t0, &q, &postprocess_params(cfg))?;
    std::fs::create_dir_all(outdir)?;
    write_field_set(&report.smoothed, &model.mesh, outdir, "smoothed")?;
    Ok(report)
}

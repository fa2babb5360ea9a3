//! File output and field parsing: density fields as binary graymaps, CSV,
//! or legacy-VTK structured points, plus the per-cycle metrics CSV and the
//! run summary.
//!
//! Every writer is byte-deterministic for a fixed configuration. Floats are
//! printed with Rust's shortest round-trip formatting, so CSV exports parse
//! back to the exact same values. The `wall_ms` column of the metrics CSV is
//! always written as 0; measured timings are reported on stdout instead so
//! files stay reproducible.

use crate::error::{Error, Result};
use crate::metrics::{IterationRecord, RunSummary};
use crate::model::StructuredMesh;
use crate::postprocess::PostprocessReport;
use crate::scalar::Real;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Field export formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    /// Binary portable graymap (P5), solid rendered black. 2D only.
    Graymap,
    /// One text row per mesh row, full-precision values.
    Csv,
    /// ASCII legacy VTK structured-points dataset with cell data.
    VtkLegacy,
}

fn check_finite<T: Real>(field: &[T]) -> Result<()> {
    if field.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("field contains non-finite values".to_string()));
    }
    Ok(())
}

/// Writes an element field in the requested format.
pub fn export_field<T: Real>(
    field: &[T],
    mesh: &StructuredMesh,
    path: &Path,
    format: FieldFormat,
) -> Result<()> {
    if field.len() != mesh.elem_count() {
        return Err(Error::Shape(format!(
            "field has {} entries, mesh has {} elements",
            field.len(),
            mesh.elem_count()
        )));
    }
    check_finite(field)?;
    match format {
        FieldFormat::Graymap => export_graymap(field, mesh, path),
        FieldFormat::Csv => export_csv(field, mesh, path),
        FieldFormat::VtkLegacy => export_vtk(field, mesh, path),
    }
}

fn export_graymap<T: Real>(field: &[T], mesh: &StructuredMesh, path: &Path) -> Result<()> {
    if mesh.dim != 2 {
        return Err(Error::Shape("graymap export requires a 2D mesh".to_string()));
    }
    let (nx, ny) = (mesh.nel[0], mesh.nel[1]);
    let mut bytes = Vec::with_capacity(64 + nx * ny);
    bytes.extend_from_slice(format!("P5\n{nx} {ny}\n255\n").as_bytes());
    // image rows run top to bottom; the mesh y axis points up
    for j in (0..ny).rev() {
        for i in 0..nx {
            let rho = field[mesh.elem_index(i, j, 0)].as_f64();
            let v = (255.0 * (1.0 - rho)).round().clamp(0.0, 255.0) as u8;
            bytes.push(v);
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn export_csv<T: Real>(field: &[T], mesh: &StructuredMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    let (nx, ny, nz) = (mesh.nel[0], mesh.nel[1], mesh.nel[2]);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", field[mesh.elem_index(i, j, k)]);
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses a CSV element field written by [`export_field`]; row layout must
/// match the mesh.
pub fn parse_field_csv<T: Real>(text: &str, mesh: &StructuredMesh) -> Result<Vec<T>> {
    let (nx, ny, nz) = (mesh.nel[0], mesh.nel[1], mesh.nel[2]);
    let mut values = vec![T::zero(); mesh.elem_count()];
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if rows >= ny * nz {
            return Err(Error::Shape(format!(
                "field CSV has more than {} rows",
                ny * nz
            )));
        }
        let j = rows % ny;
        let k = rows / ny;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != nx {
            return Err(Error::Shape(format!(
                "field CSV line {}: expected {nx} values, got {}",
                lineno + 1,
                cells.len()
            )));
        }
        for (i, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::Shape(format!("field CSV line {}: `{cell}` is not a number", lineno + 1))
            })?;
            values[mesh.elem_index(i, j, k)] = T::of(v);
        }
        rows += 1;
    }
    if rows != ny * nz {
        return Err(Error::Shape(format!(
            "field CSV has {rows} rows, expected {}",
            ny * nz
        )));
    }
    Ok(values)
}

fn export_vtk<T: Real>(field: &[T], mesh: &StructuredMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("density field\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    let _ = writeln!(
        out,
        "DIMENSIONS {} {} {}",
        mesh.nnode[0],
        mesh.nnode[1],
        if mesh.dim == 3 { mesh.nnode[2] } else { 1 }
    );
    out.push_str("ORIGIN 0 0 0\n");
    out.push_str("SPACING 1 1 1\n");
    let _ = writeln!(out, "CELL_DATA {}", mesh.elem_count());
    out.push_str("SCALARS density double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for k in 0..mesh.nel[2] {
        for j in 0..mesh.nel[1] {
            for i in 0..mesh.nel[0] {
                let _ = writeln!(out, "{}", field[mesh.elem_index(i, j, k)]);
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Fixed metrics CSV schema, one row per design cycle.
pub const METRICS_HEADER: &str =
    "cycle,objective,volume,radius,solver_path,res,cg_iters,vcycles,wall_ms";

/// Writes the per-cycle metrics CSV. The wall_ms column is zeroed so the
/// file is byte-identical across runs of the same configuration.
pub fn write_metrics_csv(history: &[IterationRecord], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},0",
            r.cycle,
            r.objective,
            r.volume,
            r.radius,
            r.solver_path,
            r.res,
            r.cg_iters,
            r.vcycles
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the deterministic run summary (no timings).
pub fn write_summary(
    summary: &RunSummary,
    post: Option<&PostprocessReport<f64>>,
    path: &Path,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "cycles = {}", summary.cycles)?;
    writeln!(f, "final_objective = {}", summary.final_objective)?;
    writeln!(f, "final_volume = {}", summary.final_volume)?;
    writeln!(f, "total_vcycles = {}", summary.total_vcycles)?;
    writeln!(f, "total_cg_iterations = {}", summary.total_cg_iterations)?;
    writeln!(f, "mgcg_evaluations = {}", summary.mgcg_evaluations)?;
    if let Some(p) = post {
        writeln!(f, "postprocess_level = {}", p.level)?;
        writeln!(f, "postprocess_volume = {}", p.volume)?;
        writeln!(f, "objective_before_smoothing = {}", p.objective_before)?;
        writeln!(f, "objective_after_smoothing = {}", p.objective_after)?;
    }
    Ok(())
}

//! Stable plot-ready outputs: the per-iteration CSV, final field dumps
//! (long-format CSV in 1D, raw little-endian f64 plus a JSON sidecar in 2D),
//! and the resolved-config echo.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use mfg_core::grid::ScalarField;
use mfg_core::play::IterationRecord;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// `iterations.csv` with the frozen header; one row per outer iteration,
/// empty cells for absent optionals.
pub fn write_iterations_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut out = String::from(
        "k,level,delta,gain,consec_residue,fp_residue,ref_error,cosine,btls_trials,wall_s\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{:.6}\n",
            r.k,
            r.level,
            fmt_opt(r.delta),
            r.gain,
            r.consec_residue,
            r.fp_residue,
            fmt_opt(r.ref_error),
            fmt_opt(r.cosine),
            r.btls_trials,
            r.wall_s,
        ));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Final fields in 1D: long-format CSV with columns x,t,rho,phi.
pub fn write_fields_1d(path: &Path, rho: &ScalarField, phi: &ScalarField) -> Result<()> {
    let grid = rho.grid();
    let mut out = String::from("x,t,rho,phi\n");
    for n in 0..=grid.n_t() {
        let t = grid.time(n);
        for s in 0..grid.n_space() {
            let x = grid.coords(s)[0];
            out.push_str(&format!("{x},{t},{},{}\n", rho.slice(n)[s], phi.slice(n)[s]));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn write_f64_binary(path: &Path, field: &ScalarField) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut buf = Vec::with_capacity(field.data().len() * 8);
    for v in field.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf)
        .with_context(|| format!("writing {}", path.display()))
}

/// Final fields in 2D: one raw binary per field plus a JSON sidecar holding
/// dims, extents, and ordering.
pub fn write_fields_2d(dir: &Path, rho: &ScalarField, phi: &ScalarField) -> Result<()> {
    let grid = rho.grid();
    write_f64_binary(&dir.join("rho.f64"), rho)?;
    write_f64_binary(&dir.join("phi.f64"), phi)?;
    let meta = serde_json::json!({
        "fields": [
            {"name": "rho", "file": "rho.f64"},
            {"name": "phi", "file": "phi.f64"},
        ],
        "scalar": "f64 little-endian",
        "ordering": "time-major; within a slice the first axis varies fastest",
        "dims": {
            "points_x": [grid.points(0), grid.points(1)],
            "points_t": grid.n_t() + 1,
        },
        "extents": {
            "x_min": [grid.axis(0).x_min, grid.axis(1).x_min],
            "x_max": [grid.axis(0).x_max, grid.axis(1).x_max],
            "t_final": grid.t_final(),
        },
    });
    fs::write(
        dir.join("fields.json"),
        serde_json::to_string_pretty(&meta)?,
    )
    .context("writing fields.json")
}

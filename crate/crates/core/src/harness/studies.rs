//! Study drivers: δ-convergence, θ-regularization, shielding curves and the
//! cell/corrector pipeline, with CSV/JSON/SVG emission.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use crate::cell::{solve_cell_problem, CellParams, CellSolution, ElementOrder};
use crate::error::{CageError, Result};
use crate::fem::{interpolate, norms, trace_dz_at_gamma, NodalField, RegionFilter};
use crate::geometry::{DimensionMode, StructuredMesh};
use crate::harness::config::StudyConfig;
use crate::harness::rate::ConvergenceTable;
use crate::harness::svg::loglog_plot;
use crate::problems::{
    eigen_gap_check, solve_delta_problem, solve_delta_with_contrast, solve_limit,
    solve_regularized, EigenGapReport, EigenOptions, ResonanceGate, SolveReport,
};
use crate::unfolding::{profile_defect, unfold};

pub struct StudyOutputs {
    pub table: ConvergenceTable,
    pub summary: serde_json::Value,
    pub files: Vec<PathBuf>,
}

/// One solved δ-case of a convergence study.
pub struct DeltaCase {
    pub n_periods: usize,
    pub mesh: StructuredMesh,
    pub report: SolveReport,
    /// Limit baseline interpolated onto this mesh.
    pub u_interp: NodalField,
    /// u_δ − u on this mesh.
    pub v_delta: NodalField,
    pub h1_err: f64,
    pub l2_layer_err: f64,
}

/// Everything the δ-convergence pipeline produces, for reuse by downstream
/// comparisons (the limit baseline is solved exactly once).
pub struct ConvergeProducts {
    pub gate: EigenGapReport,
    pub limit_mesh: StructuredMesh,
    pub limit: SolveReport,
    pub cases: Vec<DeltaCase>,
    pub f_norm: f64,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CageError::Config(format!("worker pool: {e}")))
}

fn run_resonance_gate(cfg: &StudyConfig) -> Result<EigenGapReport> {
    let spec = cfg.domain_spec()?;
    let pattern = cfg.layer_pattern()?;
    let params = cfg.physical_params();
    let mesh = crate::geometry::build_mesh(
        &spec,
        &pattern,
        &cfg.mesh_params(cfg.study.delta_periods[0]),
    )?;
    let report = eigen_gap_check(
        &mesh,
        &params.a_spec,
        params.omega,
        params.eps3,
        &EigenOptions { seed: cfg.seed, ..EigenOptions::default() },
    )?;
    if !report.pass {
        return Err(CageError::Resonance(format!(
            "configuration rejected: gap {:.6} below threshold {:.6} near eigenvalue {:.6}",
            report.gap, report.threshold, report.nearest_eigenvalue
        )));
    }
    Ok(report)
}

pub fn converge_delta_products(cfg: &StudyConfig) -> Result<ConvergeProducts> {
    cfg.validate()?;
    let spec = cfg.domain_spec()?;
    let pattern = cfg.layer_pattern()?;
    let params = cfg.physical_params();
    let gate = run_resonance_gate(cfg)?;

    let limit_mesh = crate::geometry::build_mesh(&spec, &pattern, &cfg.limit_mesh_params())?;
    let limit = solve_limit(&limit_mesh, &params, ResonanceGate::Verified)?;

    let pool = thread_pool(cfg.workers)?;
    let cases: Result<Vec<DeltaCase>> = pool.install(|| {
        cfg.study
            .delta_periods
            .par_iter()
            .map(|&n| {
                let mesh = crate::geometry::build_mesh(&spec, &pattern, &cfg.mesh_params(n))?;
                let report = solve_delta_problem(&mesh, &params, ResonanceGate::Verified)?;
                let u_interp = interpolate(&limit.field, &limit_mesh, &mesh)?;
                let v_delta = report.field.sub(&u_interp)?;
                let h1_err = norms(&v_delta, &mesh, RegionFilter::All)?.h1;
                let l2_layer_err = norms(&v_delta, &mesh, RegionFilter::Layer)?.l2;
                Ok(DeltaCase { n_periods: n, mesh, report, u_interp, v_delta, h1_err, l2_layer_err })
            })
            .collect()
    });
    let cases = cases?;
    let f_norm = cases
        .first()
        .map(|c| c.report.summary.f_norm)
        .unwrap_or(0.0);
    Ok(ConvergeProducts { gate, limit_mesh, limit, cases, f_norm })
}

/// In-plane linear interpolation of per-node plane values (as produced by
/// the interface derivative extraction).
pub fn inplane_interpolator<'a>(
    values: &'a [Complex64],
    mesh: &'a StructuredMesh,
) -> impl Fn(&[f64; 2]) -> Complex64 + 'a {
    let nx = mesh.nx();
    let ny = mesh.ny();
    move |x: &[f64; 2]| {
        let xs = mesh.x_nodes();
        let hx = (xs[nx - 1] - xs[0]) / (nx - 1) as f64;
        let ex = (((x[0] - xs[0]) / hx).floor() as isize).clamp(0, nx as isize - 2) as usize;
        let tx = ((x[0] - xs[ex]) / hx).clamp(0.0, 1.0);
        match mesh.mode {
            DimensionMode::Reduced2d => {
                values[ex * ny] * (1.0 - tx) + values[(ex + 1) * ny] * tx
            }
            DimensionMode::Full3d => {
                let ys = mesh.y_nodes().expect("3d mesh");
                let hy = (ys[ny - 1] - ys[0]) / (ny - 1) as f64;
                let ey = (((x[1] - ys[0]) / hy).floor() as isize).clamp(0, ny as isize - 2) as usize;
                let ty = ((x[1] - ys[ey]) / hy).clamp(0.0, 1.0);
                values[ex * ny + ey] * (1.0 - tx) * (1.0 - ty)
                    + values[ex * ny + ey + 1] * (1.0 - tx) * ty
                    + values[(ex + 1) * ny + ey] * tx * (1.0 - ty)
                    + values[(ex + 1) * ny + ey + 1] * tx * ty
            }
        }
    }
}

/// `‖δ⁻¹T(u_δ−u) − V·∂₃u|_Γ‖_{L²(O×Y)}` for one δ-case.
pub fn corrector_defect_for_case(
    case: &DeltaCase,
    products: &ConvergeProducts,
    cell: &CellSolution,
) -> Result<f64> {
    let g_vals = trace_dz_at_gamma(&products.limit.field, &products.limit_mesh)?;
    let g = inplane_interpolator(&g_vals, &products.limit_mesh);
    let unf = unfold(&case.v_delta, &case.mesh, 0.5)?;
    let delta = case.mesh.delta;
    profile_defect(&unf, &case.mesh, |x, z3| {
        let frac = [(x[0] / delta).fract(), (x[1] / delta).fract()];
        cell.sample(&frac, z3) * g(x)
    })
}

/// Norm of the unfolded difference over the unit cell strip, scaled by
/// `1/(δ‖f‖)`; boundedness of this ratio is the unfolded smallness of
/// `u_δ − u` near the layer.
pub fn unfolded_layer_ratio(case: &DeltaCase, f_norm: f64) -> Result<f64> {
    let unf = unfold(&case.v_delta, &case.mesh, 0.5)?;
    let n = unf.l2_zrange(-0.5, 0.5)?;
    Ok(n / (case.mesh.delta * f_norm))
}

fn write_outputs(
    cfg: &StudyConfig,
    stem: &str,
    table: &ConvergenceTable,
    summary: &serde_json::Value,
    plot: Option<String>,
) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let csv_path = dir.join("results.csv");
    std::fs::write(&csv_path, table.to_csv())?;
    files.push(csv_path);
    let json_path = dir.join("summary.json");
    std::fs::write(&json_path, format!("{}\n", serde_json::to_string_pretty(summary).unwrap()))?;
    files.push(json_path);
    if let Some(svg) = plot {
        let p = dir.join(format!("plot_{stem}.svg"));
        std::fs::write(&p, svg)?;
        files.push(p);
    }
    Ok(files)
}

fn fits_json(table: &ConvergenceTable) -> serde_json::Value {
    json!(table.fits)
}

pub fn run_converge_delta(cfg: &StudyConfig) -> Result<StudyOutputs> {
    let products = converge_delta_products(cfg)?;
    let params = cfg.physical_params();
    let pattern = cfg.layer_pattern()?;

    // Corrector profile from the strip cell problem at the study pattern.
    let cell = solve_cell_problem(
        &pattern,
        &params.a_spec,
        &CellParams {
            omega: params.omega,
            eps2: params.eps2,
            zeta: cfg.cell.zeta,
            resolution: cfg.cell.resolution,
        },
        ElementOrder::Natural,
        Complex64::new(1.0, 0.0),
    )?;

    let mut table = ConvergenceTable::new("delta");
    for case in &products.cases {
        let d = case.mesh.delta;
        let s = &case.report.summary;
        table.push(d, "h1_err", case.h1_err);
        table.push(d, "l2_layer_err", case.l2_layer_err);
        table.push(d, "grid_contrast_ratio", s.grid_scaled / products.f_norm.max(1e-300));
        table.push(d, "l2_gamma", s.l2_gamma);
        table.push(d, "l2_minus", s.l2_minus);
        table.push(d, "corrector_defect", corrector_defect_for_case(case, &products, &cell)?);
        table.push(d, "unfolded_layer_ratio", unfolded_layer_ratio(case, products.f_norm)?);
    }
    table.fit_all();

    if cfg.output.write_vtk {
        std::fs::create_dir_all(&cfg.output.dir)?;
        for case in &products.cases {
            let p = cfg.output.dir.join(format!("u_delta_n{}.vtk", case.n_periods));
            crate::vtk::write_field(&case.mesh, &case.report.field, "u_delta", &p)?;
        }
        let p = cfg.output.dir.join("u_limit.vtk");
        crate::vtk::write_field(&products.limit_mesh, &products.limit.field, "u", &p)?;
    }

    let series: Vec<(String, Vec<(f64, f64)>)> = ["h1_err", "l2_layer_err", "l2_gamma", "l2_minus"]
        .iter()
        .map(|n| (n.to_string(), table.series(n)))
        .collect();
    let plot = loglog_plot("convergence to the limit problem", "delta", "norm", &series);
    let summary = json!({
        "study": "converge_delta",
        "delta_periods": cfg.study.delta_periods,
        "resonance_gate": products.gate,
        "f_norm": products.f_norm,
        "limit": {
            "h1": products.limit.summary.h1_omega,
            "l2": products.limit.summary.l2_omega,
            "l2_gamma": products.limit.summary.l2_gamma,
            "l2_minus": products.limit.summary.l2_minus,
        },
        "cell_decay": cell.summary(),
        "fits": fits_json(&table),
        "rows": table.rows,
    });
    let files = write_outputs(cfg, "converge", &table, &summary, Some(plot))?;
    Ok(StudyOutputs { table, summary, files })
}

pub fn run_regularize_theta(cfg: &StudyConfig) -> Result<StudyOutputs> {
    cfg.validate()?;
    let spec = cfg.domain_spec()?;
    let pattern = cfg.layer_pattern()?;
    let params = cfg.physical_params();
    let gate = run_resonance_gate(cfg)?;
    let mesh = crate::geometry::build_mesh(
        &spec,
        &pattern,
        &cfg.mesh_params(cfg.study.theta_delta_periods),
    )?;
    let baseline = solve_delta_problem(&mesh, &params, ResonanceGate::Verified)?;
    let pool = thread_pool(cfg.workers)?;
    let cases: Result<Vec<(f64, SolveReport, f64)>> = pool.install(|| {
        cfg.study
            .theta_list
            .par_iter()
            .map(|&theta| {
                let rep = solve_regularized(&mesh, &params, theta)?;
                let diff = rep.field.sub(&baseline.field)?;
                let err = norms(&diff, &mesh, RegionFilter::All)?.h1;
                Ok((theta, rep, err))
            })
            .collect()
    });
    let cases = cases?;

    let mut table = ConvergenceTable::new("theta");
    for (theta, rep, err) in &cases {
        table.push(*theta, "h1_err_vs_delta", *err);
        table.push(*theta, "h1", rep.summary.h1_omega);
        let ap = rep.summary.apriori.as_ref().expect("regularized solves carry bounds");
        table.push(*theta, "gradient_bound", ap.gradient_bound);
        table.push(*theta, "gradient_measured", ap.gradient_measured);
    }
    if cfg.study.theta_list.len() >= 3 {
        table.fit_all();
    }
    let bounds_ok = cases
        .iter()
        .all(|(_, rep, _)| rep.summary.apriori.as_ref().map(|a| a.satisfied).unwrap_or(false));
    let series = vec![("h1_err_vs_delta".to_string(), table.series("h1_err_vs_delta"))];
    let plot = loglog_plot("regularization error", "theta", "H1 distance", &series);
    let summary = json!({
        "study": "regularize_theta",
        "delta": mesh.delta,
        "theta_list": cfg.study.theta_list,
        "resonance_gate": gate,
        "baseline_h1": baseline.summary.h1_omega,
        "bounds_satisfied": bounds_ok,
        "energy_defect_max": cases.iter().map(|(_, r, _)| r.summary.energy_identity_defect)
            .fold(0.0_f64, f64::max),
        "fits": fits_json(&table),
        "rows": table.rows,
    });
    let files = write_outputs(cfg, "regularize", &table, &summary, Some(plot))?;
    Ok(StudyOutputs { table, summary, files })
}

pub fn run_shielding(cfg: &StudyConfig) -> Result<StudyOutputs> {
    cfg.validate()?;
    let spec = cfg.domain_spec()?;
    let pattern = cfg.layer_pattern()?;
    let params = cfg.physical_params();
    let gate = run_resonance_gate(cfg)?;

    let pool = thread_pool(cfg.workers)?;
    let cases: Result<Vec<(f64, SolveReport)>> = pool.install(|| {
        cfg.study
            .delta_periods
            .par_iter()
            .map(|&n| {
                let mesh = crate::geometry::build_mesh(&spec, &pattern, &cfg.mesh_params(n))?;
                let rep = solve_delta_problem(&mesh, &params, ResonanceGate::Verified)?;
                Ok((mesh.delta, rep))
            })
            .collect()
    });
    let cases = cases?;

    // Contrast ablation at a fixed δ.
    let sweep_n = cfg
        .study
        .eps2_delta_periods
        .unwrap_or(*cfg.study.delta_periods.last().expect("nonempty"));
    let sweep_mesh = crate::geometry::build_mesh(&spec, &pattern, &cfg.mesh_params(sweep_n))?;
    let sweep: Result<Vec<(f64, f64)>> = cfg
        .study
        .eps2_sweep
        .iter()
        .map(|&e2| {
            let rep =
                solve_delta_with_contrast(&sweep_mesh, &params, e2, ResonanceGate::Verified)?;
            Ok((e2, rep.summary.l2_minus))
        })
        .collect();
    let sweep = sweep?;

    // The limit problem transmits nothing, by construction.
    let limit_mesh = crate::geometry::build_mesh(&spec, &pattern, &cfg.limit_mesh_params())?;
    let limit = solve_limit(&limit_mesh, &params, ResonanceGate::Verified)?;
    let zeros_below = limit
        .field
        .values
        .iter()
        .enumerate()
        .all(|(id, v)| limit_mesh.node_coords(id)[2] > 0.0 || v.norm_sqr() == 0.0);

    let mut table = ConvergenceTable::new("delta");
    for (d, rep) in &cases {
        table.push(*d, "l2_minus", rep.summary.l2_minus);
        table.push(*d, "l2_gamma", rep.summary.l2_gamma);
        table.push(*d, "l2_omega", rep.summary.l2_omega);
    }
    table.fit_all();
    let transmitted_decreasing =
        cases.windows(2).all(|w| w[0].1.summary.l2_minus > w[1].1.summary.l2_minus);

    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut sweep_csv = String::from("eps2,l2_minus\n");
    for (e2, v) in &sweep {
        sweep_csv.push_str(&format!("{e2:.16e},{v:.16e}\n"));
    }
    let sweep_path = dir.join("sweep.csv");
    std::fs::write(&sweep_path, sweep_csv)?;

    let series = vec![
        ("l2_minus".to_string(), table.series("l2_minus")),
        ("l2_gamma".to_string(), table.series("l2_gamma")),
    ];
    let plot = loglog_plot("transmitted and interface energy", "delta", "L2 norm", &series);
    let summary = json!({
        "study": "shielding",
        "resonance_gate": gate,
        "transmitted_decreasing": transmitted_decreasing,
        "limit_zero_below_interface": zeros_below,
        "limit_l2_gamma": limit.summary.l2_gamma,
        "eps2_sweep": sweep.iter().map(|(e2, v)| json!({"eps2": e2, "l2_minus": v})).collect::<Vec<_>>(),
        "fits": fits_json(&table),
        "rows": table.rows,
    });
    let mut files = write_outputs(cfg, "shielding", &table, &summary, Some(plot))?;
    files.push(sweep_path);
    Ok(StudyOutputs { table, summary, files })
}

pub fn run_cell_study(cfg: &StudyConfig) -> Result<StudyOutputs> {
    cfg.validate()?;
    let pattern = cfg.layer_pattern()?;
    let params = cfg.physical_params();
    let zeta = cfg.cell.zeta;
    let base = CellParams {
        omega: params.omega,
        eps2: params.eps2,
        zeta,
        resolution: cfg.cell.resolution,
    };
    let one = Complex64::new(1.0, 0.0);
    let sol = solve_cell_problem(&pattern, &params.a_spec, &base, ElementOrder::Natural, one)?;
    let halved = if zeta >= 4.0 {
        let p = CellParams { zeta: zeta / 2.0, ..base };
        Some(solve_cell_problem(&pattern, &params.a_spec, &p, ElementOrder::Natural, one)?)
    } else {
        None
    };
    let doubling_rel_change = halved.as_ref().map(|h| {
        (h.v_plus_inf - sol.v_plus_inf).norm() / sol.v_plus_inf.norm().max(1e-300)
    });
    let (_, _, energy_defect) = sol.energy_identity();

    let mut table = ConvergenceTable::new("zeta_prime");
    for &(zp, e) in &sol.tail_energies {
        table.push(zp, "tail_energy", e);
    }
    let series = vec![("tail_energy".to_string(), table.series("tail_energy"))];
    let plot = loglog_plot("corrector tail energy", "zeta'", "energy", &series);
    let summary = json!({
        "study": "cell",
        "cell": sol.summary(),
        "doubling_rel_change": doubling_rel_change,
        "energy_identity_defect": energy_defect,
        "weighted_gradient_energy_half": halved.as_ref().map(|h| h.weighted_gradient_energy()),
    });
    let files = write_outputs(cfg, "cell_decay", &table, &summary, Some(plot))?;
    Ok(StudyOutputs { table, summary, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(dir: &std::path::Path) -> StudyConfig {
        let mut cfg = StudyConfig::c0_reduced();
        cfg.study.delta_periods = vec![4, 8];
        cfg.study.theta_list = vec![1e-1, 1e-2];
        cfg.study.theta_delta_periods = 4;
        cfg.study.eps2_sweep = vec![0.0, 1.0];
        cfg.resolution.limit_refine = 2;
        cfg.resolution.max_step = 1.0 / 16.0;
        cfg.cell.zeta = 4.0;
        cfg.output.dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn study_outputs_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let a = run_shielding(&cfg).unwrap();
        let csv_a = std::fs::read(dir.path().join("results.csv")).unwrap();
        let json_a = std::fs::read(dir.path().join("summary.json")).unwrap();
        let b = run_shielding(&cfg).unwrap();
        let csv_b = std::fs::read(dir.path().join("results.csv")).unwrap();
        let json_b = std::fs::read(dir.path().join("summary.json")).unwrap();
        assert_eq!(csv_a, csv_b, "byte-identical CSV");
        assert_eq!(json_a, json_b, "byte-identical JSON");
        assert_eq!(a.table.rows.len(), b.table.rows.len());
    }

    #[test]
    fn regularize_errors_decrease_along_theta() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path());
        let out = run_regularize_theta(&cfg).unwrap();
        let errs = out.table.series("h1_err_vs_delta");
        assert_eq!(errs.len(), 2);
        // theta_list is decreasing, so the error rows must decrease too.
        assert!(errs[0].1 > errs[1].1, "θ-error not decreasing: {errs:?}");
        assert_eq!(out.summary["bounds_satisfied"], serde_json::Value::Bool(true));
    }

    #[test]
    fn single_theta_produces_values_without_fit() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(dir.path());
        cfg.study.theta_list = vec![1e-2];
        let out = run_regularize_theta(&cfg).unwrap();
        assert!(out.table.fits.is_empty());
        assert_eq!(out.table.series("h1_err_vs_delta").len(), 1);
    }
}

//! The three boundary-value problems of the shielding model: the
//! layer-resolved problem with the δ⁻² contrast, its θ-regularized variant,
//! and the interface limit problem, plus the resonance probe they rely on.

mod eigen;

pub use eigen::{eigen_gap_check, EigenGapReport, EigenOptions};

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants;
use crate::error::{CageError, Result};
use crate::fem::{
    assemble, norms, solve, source_inner_product, trace_l2, AssembleOptions, CoefficientSpec,
    MaterialField, NodalField, RegionFilter, SourceTerm,
};
use crate::geometry::{Region, StructuredMesh};

/// Declarative source description (the general function-valued source is a
/// library-level API, not a config item).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SourceSpec {
    Zero,
    /// `amplitude · 1_{z ∈ (z_lo, z_hi)}` across the whole cross section.
    IndicatorZ { z_lo: f64, z_hi: f64, amplitude: [f64; 2] },
}

impl SourceSpec {
    pub fn term(&self) -> SourceTerm<'static> {
        match self {
            SourceSpec::Zero => SourceTerm::Zero,
            SourceSpec::IndicatorZ { z_lo, z_hi, amplitude } => SourceTerm::IndicatorZ {
                z_lo: *z_lo,
                z_hi: *z_hi,
                amplitude: Complex64::new(amplitude[0], amplitude[1]),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    #[serde(default)]
    pub a_spec: CoefficientSpec,
    pub source: SourceSpec,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(CageError::Parameter("omega must be positive".into()));
        }
        for (name, v) in [("eps1", self.eps1), ("eps2", self.eps2), ("eps3", self.eps3)] {
            if !(v > 0.0) {
                return Err(CageError::Parameter(format!("{name} must be strictly positive")));
            }
        }
        Ok(())
    }

    /// τ = max{ε₁, ε₃}, the zero-order real-part bound.
    pub fn tau(&self) -> f64 {
        self.eps1.max(self.eps3)
    }
}

/// Whether a solve runs the spectral-gap probe itself or trusts the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResonanceGate {
    Check,
    Verified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveSummary {
    pub delta: f64,
    pub theta: Option<f64>,
    pub omega: f64,
    pub f_norm: f64,
    pub residual: f64,
    pub wall_time_s: f64,
    pub h1_omega: f64,
    pub h1_semi_omega: f64,
    pub l2_omega: f64,
    pub l2_grid: f64,
    pub l2_layer: f64,
    pub l2_gamma: f64,
    pub l2_minus: f64,
    /// δ⁻¹‖u‖_{L²(grid)}, the contrast-scaled grid norm.
    pub grid_scaled: f64,
    /// Relative defect of the imaginary-part energy identity.
    pub energy_identity_defect: f64,
    /// A-priori bound check (regularized problem only).
    pub apriori: Option<AprioriCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AprioriCheck {
    pub gradient_bound: f64,
    pub gradient_measured: f64,
    pub h1_bound: f64,
    pub h1_measured: f64,
    pub satisfied: bool,
}

pub struct SolveReport {
    pub field: NodalField,
    pub summary: SolveSummary,
}

fn eps_for_delta(params: &PhysicalParams, delta: f64) -> impl Fn(Region) -> Complex64 + '_ {
    let contrast = params.eps2 / (delta * delta);
    move |r| match r {
        Region::Grid => Complex64::new(params.eps1, contrast),
        _ => Complex64::new(params.eps3, 0.0),
    }
}

fn run_gate(mesh: &StructuredMesh, params: &PhysicalParams, gate: ResonanceGate) -> Result<()> {
    if gate == ResonanceGate::Check {
        let report = eigen_gap_check(
            mesh,
            &params.a_spec,
            params.omega,
            params.eps3,
            &EigenOptions::default(),
        )?;
        if !report.pass {
            return Err(CageError::Resonance(format!(
                "spectral gap {:.6} below threshold {:.6} (nearest eigenvalue {:.6}, target {:.6})",
                report.gap, report.threshold, report.nearest_eigenvalue, report.target
            )));
        }
    }
    Ok(())
}

fn collect_summary(
    mesh: &StructuredMesh,
    params: &PhysicalParams,
    field: &NodalField,
    residual: f64,
    wall: f64,
    theta: Option<f64>,
    energy_defect: f64,
    f_norm: f64,
) -> Result<SolveSummary> {
    let all = norms(field, mesh, RegionFilter::All)?;
    let grid = norms(field, mesh, RegionFilter::Grid)?;
    let layer = norms(field, mesh, RegionFilter::Layer)?;
    let minus = norms(field, mesh, RegionFilter::BulkMinus)?;
    let gamma = trace_l2(field, mesh, 0.0)?;
    Ok(SolveSummary {
        delta: mesh.delta,
        theta,
        omega: params.omega,
        f_norm,
        residual,
        wall_time_s: wall,
        h1_omega: all.h1,
        h1_semi_omega: all.h1_semi,
        l2_omega: all.l2,
        l2_grid: grid.l2,
        l2_layer: layer.l2,
        l2_gamma: gamma,
        l2_minus: minus.l2,
        grid_scaled: grid.l2 / mesh.delta,
        energy_identity_defect: energy_defect,
        apriori: None,
    })
}

fn relative_defect(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Solves the layer-resolved problem with zero-order coefficient
/// `ε₁ + iε₂/δ²` on the grid and `ε₃` elsewhere.
pub fn solve_delta_problem(
    mesh: &StructuredMesh,
    params: &PhysicalParams,
    gate: ResonanceGate,
) -> Result<SolveReport> {
    params.validate()?;
    solve_delta_with_contrast(mesh, params, params.eps2, gate)
}

/// Ablation entry point: like [`solve_delta_problem`] but with an explicit
/// contrast numerator (0 switches the shielding mechanism off entirely).
pub fn solve_delta_with_contrast(
    mesh: &StructuredMesh,
    params: &PhysicalParams,
    eps2: f64,
    gate: ResonanceGate,
) -> Result<SolveReport> {
    if eps2 < 0.0 {
        return Err(CageError::Parameter("eps2 must be nonnegative".into()));
    }
    if !(params.omega > 0.0 && params.eps1 > 0.0 && params.eps3 > 0.0) {
        return Err(CageError::Parameter("omega, eps1, eps3 must be positive".into()));
    }
    let params = PhysicalParams { eps2, ..params.clone() };
    let params = &params;
    run_gate(mesh, params, gate)?;
    let start = Instant::now();
    let material = MaterialField::build(mesh, &params.a_spec, eps_for_delta(params, mesh.delta))?;
    let source = params.source.term();
    let system = assemble(
        mesh,
        &material,
        params.omega,
        &source,
        &AssembleOptions { require_plus_support: true, dirichlet_below_gamma: false },
    )?;
    let (field, stats) = solve(&system)?;
    if stats.near_singular {
        return Err(CageError::Resonance(format!(
            "near-singular factorization (min pivot {:.3e} vs max entry scale)",
            stats.min_pivot
        )));
    }

    // Imaginary part of the discrete energy:
    // ω²(ε₂/δ²)‖u‖²_{grid} = −ω·Re ∫ f ū.
    let w = params.omega;
    let grid_l2 = norms(&field, mesh, RegionFilter::Grid)?.l2;
    let lhs = w * w * params.eps2 / (mesh.delta * mesh.delta) * grid_l2 * grid_l2;
    let fu = source_inner_product(mesh, &source, &field)?;
    let defect = relative_defect(lhs, -w * fu.re);

    let summary = collect_summary(
        mesh,
        params,
        &field,
        stats.residual,
        start.elapsed().as_secs_f64(),
        None,
        defect,
        source.l2_norm(mesh),
    )?;
    Ok(SolveReport { field, summary })
}

/// Solves the θ-regularized problem: `ε₃ + iθ` outside the grid.
pub fn solve_regularized(
    mesh: &StructuredMesh,
    params: &PhysicalParams,
    theta: f64,
) -> Result<SolveReport> {
    params.validate()?;
    let contrast = params.eps2 / (mesh.delta * mesh.delta);
    if !(theta > 0.0 && theta < contrast) {
        return Err(CageError::Parameter(format!(
            "theta must lie in (0, eps2/delta^2) = (0, {contrast}), got {theta}"
        )));
    }
    let start = Instant::now();
    let material = MaterialField::build(mesh, &params.a_spec, |r| match r {
        Region::Grid => Complex64::new(params.eps1, contrast),
        _ => Complex64::new(params.eps3, theta),
    })?;
    let source = params.source.term();
    let system = assemble(
        mesh,
        &material,
        params.omega,
        &source,
        &AssembleOptions { require_plus_support: true, dirichlet_below_gamma: false },
    )?;
    let (field, stats) = solve(&system)?;

    let w = params.omega;
    let all_l2 = norms(&field, mesh, RegionFilter::All)?.l2;
    let grid_l2 = norms(&field, mesh, RegionFilter::Grid)?.l2;
    let outside_sq = (all_l2 * all_l2 - grid_l2 * grid_l2).max(0.0);
    let lhs = w * w * (theta * outside_sq + contrast * grid_l2 * grid_l2);
    let fu = source_inner_product(mesh, &source, &field)?;
    let defect = relative_defect(lhs, -w * fu.re);

    let f_norm = source.l2_norm(mesh);
    let mut summary = collect_summary(
        mesh,
        params,
        &field,
        stats.residual,
        start.elapsed().as_secs_f64(),
        Some(theta),
        defect,
        f_norm,
    )?;
    let material_alpha = material.alpha;
    let bounds = constants::apriori_bounds(
        material_alpha,
        params.tau(),
        w,
        theta,
        domain_diameter(mesh),
        f_norm,
    )?;
    let gradient_measured = summary.h1_semi_omega;
    let h1_measured = summary.h1_omega;
    summary.apriori = Some(AprioriCheck {
        gradient_bound: bounds.gradient_bound,
        gradient_measured,
        h1_bound: bounds.h1_bound,
        h1_measured,
        satisfied: gradient_measured <= bounds.gradient_bound * (1.0 + 1e-12)
            && h1_measured <= bounds.h1_bound * (1.0 + 1e-12),
    });
    Ok(SolveReport { field, summary })
}

fn domain_diameter(mesh: &StructuredMesh) -> f64 {
    let mut d2 = (2.0 * mesh.half_height).powi(2);
    for e in mesh.extents() {
        d2 += e * e;
    }
    d2.sqrt()
}

/// Solves the limit problem on the upper bulk with a Dirichlet condition on
/// the interface, extended by zero below it. The returned field lives on the
/// full mesh and vanishes identically for `x₃ ≤ 0`.
pub fn solve_limit(
    mesh: &StructuredMesh,
    params: &PhysicalParams,
    gate: ResonanceGate,
) -> Result<SolveReport> {
    params.validate()?;
    run_gate(mesh, params, gate)?;
    let start = Instant::now();
    let material = MaterialField::build(mesh, &params.a_spec, |_| Complex64::new(params.eps3, 0.0))?;
    let source = params.source.term();
    let system = assemble(
        mesh,
        &material,
        params.omega,
        &source,
        &AssembleOptions { require_plus_support: true, dirichlet_below_gamma: true },
    )?;
    let (field, stats) = solve(&system)?;
    if stats.near_singular {
        return Err(CageError::Resonance(
            "limit problem factorization is nearly singular".into(),
        ));
    }
    let summary = collect_summary(
        mesh,
        params,
        &field,
        stats.residual,
        start.elapsed().as_secs_f64(),
        None,
        0.0,
        source.l2_norm(mesh),
    )?;
    Ok(SolveReport { field, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_mesh, DomainSpec, GradingPolicy, LayerPattern, MeshParams, PatternKind,
    };

    fn c0_params() -> PhysicalParams {
        PhysicalParams {
            omega: 1.0,
            eps1: 1.0,
            eps2: 1.0,
            eps3: 1.0,
            a_spec: CoefficientSpec::Identity,
            source: SourceSpec::IndicatorZ { z_lo: 0.5, z_hi: 0.75, amplitude: [1.0, 0.0] },
        }
    }

    fn mesh(n: usize) -> StructuredMesh {
        let dom = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        build_mesh(&dom, &pat, &MeshParams::new(n, 8, GradingPolicy::default())).unwrap()
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let m = mesh(4);
        let mut p = c0_params();
        p.source = SourceSpec::Zero;
        let rep = solve_delta_problem(&m, &p, ResonanceGate::Verified).unwrap();
        assert_eq!(rep.summary.h1_omega, 0.0);
        assert_eq!(rep.summary.l2_gamma, 0.0);
        let lim = solve_limit(&m, &p, ResonanceGate::Verified).unwrap();
        assert_eq!(lim.summary.l2_omega, 0.0);
        let reg = solve_regularized(&m, &p, 1e-2).unwrap();
        assert_eq!(reg.summary.l2_omega, 0.0);
    }

    #[test]
    fn theta_out_of_range_is_rejected() {
        let m = mesh(4);
        let p = c0_params();
        let contrast = p.eps2 / (m.delta * m.delta);
        assert!(solve_regularized(&m, &p, contrast).is_err());
        assert!(solve_regularized(&m, &p, 0.0).is_err());
        assert!(solve_regularized(&m, &p, contrast * 0.5).is_ok());
    }

    #[test]
    fn energy_identities_hold_discretely() {
        let m = mesh(8);
        let p = c0_params();
        let rep = solve_delta_problem(&m, &p, ResonanceGate::Verified).unwrap();
        assert!(
            rep.summary.energy_identity_defect < 1e-8,
            "delta-problem defect {}",
            rep.summary.energy_identity_defect
        );
        let reg = solve_regularized(&m, &p, 1e-2).unwrap();
        assert!(
            reg.summary.energy_identity_defect < 1e-8,
            "theta-problem defect {}",
            reg.summary.energy_identity_defect
        );
        let ap = reg.summary.apriori.unwrap();
        assert!(ap.satisfied, "a-priori bounds violated: {ap:?}");
    }

    #[test]
    fn limit_solution_vanishes_below_interface() {
        let m = mesh(4);
        let p = c0_params();
        let rep = solve_limit(&m, &p, ResonanceGate::Verified).unwrap();
        assert!(rep.summary.l2_omega > 0.0, "nontrivial solution");
        for id in 0..m.node_count() {
            if m.node_coords(id)[2] <= 0.0 {
                assert_eq!(rep.field.values[id], Complex64::new(0.0, 0.0));
            }
        }
        assert_eq!(rep.summary.l2_gamma, 0.0);
        assert_eq!(rep.summary.l2_minus, 0.0);
    }

    #[test]
    fn source_support_validation() {
        let m = mesh(4);
        let mut p = c0_params();
        // Support dips below the layer top.
        p.source = SourceSpec::IndicatorZ { z_lo: 0.05, z_hi: 0.75, amplitude: [1.0, 0.0] };
        assert!(solve_delta_problem(&m, &p, ResonanceGate::Verified).is_err());
    }

    #[test]
    fn deterministic_solves() {
        let m = mesh(4);
        let p = c0_params();
        let a = solve_delta_problem(&m, &p, ResonanceGate::Verified).unwrap();
        let b = solve_delta_problem(&m, &p, ResonanceGate::Verified).unwrap();
        assert_eq!(a.field.values, b.field.values, "bit-identical repeat solve");
    }
}

//! Empirical verification of the layer trace/extension inequalities on
//! ensembles of random discrete fields.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};
use crate::fem::field::NodalField;
use crate::fem::norms::{dz_l2_zrange, norms, norms_zrange, trace_l2, RegionFilter};
use crate::geometry::StructuredMesh;

/// Empirical constants of the layer inequalities over a field ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerInequalityReport {
    pub delta: f64,
    pub samples: usize,
    /// max over samples of ‖v‖_{L²(layer)} / (‖v‖_{L²(grid)} + δ‖∇v‖_{L²(layer)}).
    pub ratio_extension_max: f64,
    /// max over samples of δ‖v‖²_{L²(Γ)} / (‖v‖²_{L²(layer)} + δ²‖∇v‖²_{L²(layer)}).
    pub ratio_trace_max: f64,
    /// max over samples of lhs/rhs for the thin-strip inequality
    /// ‖φ‖²_{O×(0,δ/2)} ≤ δ‖φ‖²_{Ω⁺} + δ²‖∂₃φ‖²_{Ω⁺} on fields with φ(·,0)=0.
    pub strip_ratio_max: f64,
    /// Number of strip-inequality violations (ratio > 1).
    pub strip_violations: usize,
}

pub fn check_layer_inequalities(
    mesh: &StructuredMesh,
    samples: usize,
    seed: u64,
) -> Result<LayerInequalityReport> {
    if samples < 20 {
        return Err(CageError::Parameter(
            "layer inequality check needs at least 20 sample fields".into(),
        ));
    }
    let delta = mesh.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratio1: f64 = 0.0;
    let mut ratio2: f64 = 0.0;
    let mut strip: f64 = 0.0;
    let mut violations = 0usize;
    let iz_gamma = mesh
        .z_plane_index(0.0)
        .ok_or_else(|| CageError::Geometry("mesh lacks an interface plane".into()))?;
    for _ in 0..samples {
        let v = NodalField::random_smoothed(mesh, &mut rng, false);
        let layer = norms(&v, mesh, RegionFilter::Layer)?;
        let grid = norms(&v, mesh, RegionFilter::Grid)?;
        if layer.l2 > 0.0 {
            let denom = grid.l2 + delta * layer.h1_semi;
            if denom > 0.0 {
                ratio1 = ratio1.max(layer.l2 / denom);
            }
            let gamma = trace_l2(&v, mesh, 0.0)?;
            let denom2 = layer.l2 * layer.l2 + delta * delta * layer.h1_semi * layer.h1_semi;
            if denom2 > 0.0 {
                ratio2 = ratio2.max(delta * gamma * gamma / denom2);
            }
        }

        // Strip inequality on a field vanishing at the interface.
        let mut w = v.clone();
        for ix in 0..mesh.nx() {
            for iy in 0..mesh.ny() {
                w.values[mesh.node_id(ix, iy, iz_gamma)] = num_complex::Complex64::new(0.0, 0.0);
            }
        }
        let lhs = norms_zrange(&w, mesh, 0.0, delta / 2.0)?.l2.powi(2);
        let plus = norms_zrange(&w, mesh, 0.0, mesh.half_height)?;
        let dz = dz_l2_zrange(&w, mesh, 0.0, mesh.half_height)?;
        let rhs = delta * plus.l2 * plus.l2 + delta * delta * dz * dz;
        if rhs > 0.0 {
            let r = lhs / rhs;
            strip = strip.max(r);
            if r > 1.0 + 1e-12 {
                violations += 1;
            }
        }
    }
    Ok(LayerInequalityReport {
        delta,
        samples,
        ratio_extension_max: ratio1,
        ratio_trace_max: ratio2,
        strip_ratio_max: strip,
        strip_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::norms::RegionFilter;
    use crate::geometry::{
        build_mesh, DomainSpec, GradingPolicy, LayerPattern, MeshParams, PatternKind,
    };
    use num_complex::Complex64;

    fn mesh(n: usize) -> StructuredMesh {
        let dom = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        build_mesh(&dom, &pat, &MeshParams::new(n, 8, GradingPolicy::default())).unwrap()
    }

    #[test]
    fn constant_field_ratio_is_inverse_sqrt_fill() {
        let m = mesh(4);
        let v = NodalField::from_fn(&m, |_| Complex64::new(1.0, 0.0));
        let layer = norms(&v, &m, RegionFilter::Layer).unwrap();
        let grid = norms(&v, &m, RegionFilter::Grid).unwrap();
        let ratio = layer.l2 / (grid.l2 + m.delta * layer.h1_semi);
        let expect = 1.0 / m.pattern().fill_fraction().sqrt();
        assert!((ratio - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_field_gives_zero_ratios() {
        let m = mesh(4);
        let v = NodalField::zeros(&m);
        let layer = norms(&v, &m, RegionFilter::Layer).unwrap();
        assert_eq!(layer.l2, 0.0);
        // check_layer_inequalities skips zero denominators by convention
        let rep = check_layer_inequalities(&m, 20, 1).unwrap();
        assert!(rep.ratio_extension_max.is_finite());
    }

    #[test]
    fn ratios_stay_bounded_along_delta() {
        let mut maxima = Vec::new();
        for n in [4usize, 8, 16] {
            let m = mesh(n);
            let rep = check_layer_inequalities(&m, 24, 42).unwrap();
            assert_eq!(rep.strip_violations, 0, "strip inequality must hold");
            maxima.push((m.delta, rep.ratio_extension_max));
        }
        // Log-log slope of the max ratio vs δ must be near zero.
        let xs: Vec<f64> = maxima.iter().map(|(d, _)| d.ln()).collect();
        let ys: Vec<f64> = maxima.iter().map(|(_, r)| r.ln()).collect();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let slope: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - xm) * (y - ym))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
        assert!(slope.abs() <= 0.1, "ratio grows with δ: slope {slope}");
    }
}

//! Explicit constants for the coercivity lemma and the regularized problem.
//!
//! A sesquilinear form `a` on a pair of spaces `H ⊂ L` that satisfies
//!
//! * `|Im a(v,v)| ≥ k₁‖v‖_L²`
//! * `|Re a(v,v)| ≥ k₂‖v‖_H² − k₃‖v‖_L²`
//!
//! is coercive with the computable constant `β₁ = min{k₁k₂/k₃, √μ⁻}`, where
//! `μ⁻` is the smaller eigenvalue of the 2×2 quadratic-form matrix
//! `[[k₂², −k₂k₃], [−k₂k₃, k₃²+k₁²]]`. This module evaluates that chain of
//! constants, the specialized ellipticity constant of the regularized
//! Helmholtz form, and the a-priori bounds that follow from it.

use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};

/// Inputs of the generic coercivity estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoercivityInputs {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl CoercivityInputs {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self> {
        if !(k1 > 0.0 && k2 > 0.0 && k3 > 0.0) || !(k1 + k2 + k3).is_finite() {
            return Err(CageError::Parameter(format!(
                "coercivity constants must be strictly positive, got k1={k1}, k2={k2}, k3={k3}"
            )));
        }
        Ok(Self { k1, k2, k3 })
    }
}

/// Eigenvalues of the quadratic-form matrix, computed from trace and
/// determinant with the stable branch of the quadratic formula.
///
/// The discriminant `T² − 4D` is evaluated in the exactly factored form
/// `((k₂−k₁)² + k₃²)((k₂+k₁)² + k₃²)`, which avoids cancellation.
pub fn form_matrix_eigenvalues(k1: f64, k2: f64, k3: f64) -> Result<(f64, f64)> {
    let k = CoercivityInputs::new(k1, k2, k3)?;
    let trace = k.k1 * k.k1 + k.k2 * k.k2 + k.k3 * k.k3;
    let det = (k.k1 * k.k2) * (k.k1 * k.k2);
    let disc = form_matrix_discriminant(k.k1, k.k2, k.k3);
    let root = disc.sqrt();
    let mu_plus = 0.5 * (trace + root);
    // mu_minus via det/mu_plus so small eigenvalues keep full precision.
    let mu_minus = det / mu_plus;
    Ok((mu_minus, mu_plus))
}

/// Discriminant of the 2×2 form matrix in factored form.
pub fn form_matrix_discriminant(k1: f64, k2: f64, k3: f64) -> f64 {
    let a = (k2 - k1) * (k2 - k1) + k3 * k3;
    let b = (k2 + k1) * (k2 + k1) + k3 * k3;
    a * b
}

/// The discriminant as it is usually quoted with `k₃` replaced by `k₁`.
/// Kept for the deviation report; coincides with the true value iff k₁ = k₃.
pub fn form_matrix_discriminant_printed(k1: f64, k2: f64) -> f64 {
    let a = (k2 - k1) * (k2 - k1) + k1 * k1;
    let b = (k2 + k1) * (k2 + k1) + k1 * k1;
    a * b
}

/// Coercivity constant `β₁ = min{k₁k₂/k₃, √μ⁻}`.
pub fn coercivity_constant(k1: f64, k2: f64, k3: f64) -> Result<f64> {
    let (mu_minus, _) = form_matrix_eigenvalues(k1, k2, k3)?;
    Ok((k1 * k2 / k3).min(mu_minus.sqrt()))
}

/// Ellipticity constant of the regularized Helmholtz form, via both routes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EllipticityConstant {
    /// Value from the generic coercivity route with k = (ω²θ, α, ω²τ).
    pub lemma_value: f64,
    /// Value of the closed formula quoted for this constant, evaluated
    /// verbatim (it embeds the `k₃ → k₁` substitution and an outer `/2`).
    pub printed_value: f64,
    /// |lemma − printed|.
    pub discrepancy: f64,
    /// True when `αθ/τ` is the active branch of the lemma route.
    pub theta_branch_active: bool,
}

/// Evaluates `C'(θ)` for the regularized form, whose real and imaginary
/// parts obey the coercivity hypotheses with `k₁ = ω²θ`, `k₂ = α`,
/// `k₃ = ω²τ` when `H` carries the gradient norm.
pub fn regularized_ellipticity_constant(
    alpha: f64,
    tau: f64,
    omega: f64,
    theta: f64,
) -> Result<EllipticityConstant> {
    if !(alpha > 0.0 && tau > 0.0 && omega > 0.0 && theta > 0.0) {
        return Err(CageError::Parameter(format!(
            "ellipticity inputs must be positive, got alpha={alpha}, tau={tau}, omega={omega}, theta={theta}"
        )));
    }
    let w2 = omega * omega;
    let (k1, k2, k3) = (w2 * theta, alpha, w2 * tau);
    let lemma_value = coercivity_constant(k1, k2, k3)?;
    let theta_branch_active = k1 * k2 / k3 <= form_matrix_eigenvalues(k1, k2, k3)?.0.sqrt();

    // Verbatim closed formula: min{ αθ/τ, √(α² + (ω²τ)² + (ω²θ)² − √Δp) / 2 }
    // with Δp = ((α−ω²θ)² + (ω²θ)²)((α+ω²θ)² + (ω²θ)²).
    let trace = alpha * alpha + k3 * k3 + k1 * k1;
    let inner = form_matrix_discriminant_printed(k1, k2);
    let printed_value = (alpha * theta / tau).min((trace - inner.sqrt()).max(0.0).sqrt() / 2.0);

    Ok(EllipticityConstant {
        lemma_value,
        printed_value,
        discrepancy: (lemma_value - printed_value).abs(),
        theta_branch_active,
    })
}

/// A-priori bounds for the regularized solution in terms of the data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AprioriBounds {
    /// Bound on ‖∇u‖: τω/(αθ)·‖f‖.
    pub gradient_bound: f64,
    /// Bound on the H¹ norm: τω·diam(Ω)/(αθ)·‖f‖.
    pub h1_bound: f64,
}

pub fn apriori_bounds(
    alpha: f64,
    tau: f64,
    omega: f64,
    theta: f64,
    domain_diameter: f64,
    f_norm: f64,
) -> Result<AprioriBounds> {
    if !(alpha > 0.0 && tau > 0.0 && omega > 0.0 && theta > 0.0 && domain_diameter > 0.0) {
        return Err(CageError::Parameter(
            "a-priori bound inputs must be positive".into(),
        ));
    }
    if f_norm < 0.0 {
        return Err(CageError::Parameter("f_norm must be nonnegative".into()));
    }
    let gradient_bound = tau * omega / (alpha * theta) * f_norm;
    Ok(AprioriBounds {
        gradient_bound,
        h1_bound: gradient_bound * domain_diameter,
    })
}

/// Full constant report for shield-design sizing, emitted as JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantReport {
    pub alpha: f64,
    pub tau: f64,
    pub omega: f64,
    pub theta: f64,
    pub domain_diameter: f64,
    pub f_norm: f64,
    /// The coercivity triple used for the regularized form.
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub discriminant: f64,
    /// Discriminant with the commonly printed `k₃ → k₁` substitution.
    pub discriminant_printed: f64,
    pub discriminant_deviation: f64,
    pub beta1: f64,
    pub c_prime_lemma: f64,
    pub c_prime_printed: f64,
    pub c_prime_discrepancy: f64,
    pub theta_branch_active: bool,
    pub apriori_gradient_bound: f64,
    pub apriori_h1_bound: f64,
}

pub fn constant_report(
    alpha: f64,
    tau: f64,
    omega: f64,
    theta: f64,
    domain_diameter: f64,
    f_norm: f64,
) -> Result<ConstantReport> {
    let w2 = omega * omega;
    let (k1, k2, k3) = (w2 * theta, alpha, w2 * tau);
    let (mu_minus, mu_plus) = form_matrix_eigenvalues(k1, k2, k3)?;
    let beta1 = coercivity_constant(k1, k2, k3)?;
    let cprime = regularized_ellipticity_constant(alpha, tau, omega, theta)?;
    let bounds = apriori_bounds(alpha, tau, omega, theta, domain_diameter, f_norm)?;
    let discriminant = form_matrix_discriminant(k1, k2, k3);
    let discriminant_printed = form_matrix_discriminant_printed(k1, k2);
    Ok(ConstantReport {
        alpha,
        tau,
        omega,
        theta,
        domain_diameter,
        f_norm,
        k1,
        k2,
        k3,
        mu_minus,
        mu_plus,
        discriminant,
        discriminant_printed,
        discriminant_deviation: (discriminant - discriminant_printed).abs(),
        beta1,
        c_prime_lemma: cprime.lemma_value,
        c_prime_printed: cprime.printed_value,
        c_prime_discrepancy: cprime.discrepancy,
        theta_branch_active: cprime.theta_branch_active,
        apriori_gradient_bound: bounds.gradient_bound,
        apriori_h1_bound: bounds.h1_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_eigenvalues(k1: f64, k2: f64, k3: f64) -> (f64, f64) {
        let m = Matrix2::new(k2 * k2, -k2 * k3, -k2 * k3, k3 * k3 + k1 * k1);
        let eig = m.symmetric_eigen();
        let (a, b) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        (a.min(b), a.max(b))
    }

    #[test]
    fn unit_triple_matches_closed_form() {
        let (lo, hi) = form_matrix_eigenvalues(1.0, 1.0, 1.0).unwrap();
        let s5 = 5.0_f64.sqrt();
        assert!((lo - (3.0 - s5) / 2.0).abs() < 1e-14);
        assert!((hi - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((lo - 0.381_966_011_250_105).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_match_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let k1 = rng.gen_range(0.1..10.0);
            let k2 = rng.gen_range(0.1..10.0);
            let k3 = rng.gen_range(0.1..10.0);
            let (lo, hi) = form_matrix_eigenvalues(k1, k2, k3).unwrap();
            let (dl, dh) = dense_eigenvalues(k1, k2, k3);
            assert!((lo - dl).abs() <= 1e-10 * dh.max(1.0), "lo {lo} vs {dl}");
            assert!((hi - dh).abs() <= 1e-10 * dh.max(1.0), "hi {hi} vs {dh}");
        }
    }

    #[test]
    fn trace_and_determinant_identities() {
        let (lo, hi) = form_matrix_eigenvalues(2.0, 3.0, 5.0).unwrap();
        assert!((lo * hi - 36.0).abs() < 1e-12 * 36.0);
        assert!((lo + hi - 38.0).abs() < 1e-12 * 38.0);
    }

    #[test]
    fn tiny_k1_drives_mu_minus_to_zero() {
        let (lo, _) = form_matrix_eigenvalues(1e-9, 1.0, 1.0).unwrap();
        assert!(lo < 1e-15);
        assert!(lo > 0.0);
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(form_matrix_eigenvalues(0.0, 1.0, 1.0).is_err());
        assert!(form_matrix_eigenvalues(1.0, -1.0, 1.0).is_err());
        assert!(coercivity_constant(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn beta1_unit_triple() {
        let b = coercivity_constant(1.0, 1.0, 1.0).unwrap();
        assert!((b - 0.618_033_988_749_894).abs() < 1e-12);
    }

    #[test]
    fn beta1_large_k3_branch() {
        // k₁k₂/k₃ → 0 dominates as k₃ grows.
        let b = coercivity_constant(1.0, 1.0, 1e9).unwrap();
        assert!((b - 1e-9).abs() < 1e-18);
    }

    #[test]
    fn ellipticity_example_values() {
        let c = regularized_ellipticity_constant(1.0, 1.0, 1.0, 0.5).unwrap();
        // k = (0.5, 1, 1): trace 2.25, det 0.25, μ⁻ ≈ 0.117218.
        assert!((c.lemma_value - 0.342_371_086_240_644).abs() < 1e-11, "{}", c.lemma_value);
    }

    #[test]
    fn ellipticity_small_theta_is_linear_branch() {
        for &theta in &[1e-3, 1e-5, 1e-7] {
            let c = regularized_ellipticity_constant(1.0, 1.0, 1.0, theta).unwrap();
            assert!(c.theta_branch_active);
            assert!((c.lemma_value - theta).abs() < 1e-9 * theta.max(1e-12) + 1e-15);
        }
    }

    #[test]
    fn apriori_bound_algebra() {
        // θ = τω·diam/α and ‖f‖ = 1 makes the H¹ bound exactly 1.
        let (alpha, tau, omega, diam) = (2.0, 1.5, 3.0, 0.7);
        let theta = tau * omega * diam / alpha;
        let b = apriori_bounds(alpha, tau, omega, theta, diam, 1.0).unwrap();
        assert!((b.h1_bound - 1.0).abs() < 1e-14);
        let z = apriori_bounds(alpha, tau, omega, theta, diam, 0.0).unwrap();
        assert_eq!(z.gradient_bound, 0.0);
        assert_eq!(z.h1_bound, 0.0);
    }

    #[test]
    fn monotone_in_k1() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k2 = rng.gen_range(0.1..10.0);
            let k3 = rng.gen_range(0.1..10.0);
            let mut last = 0.0;
            for i in 1..=20 {
                let k1 = 0.05 * i as f64;
                let b = coercivity_constant(k1, k2, k3).unwrap();
                assert!(b >= last - 1e-12, "beta1 not monotone in k1");
                last = b;
            }
        }
    }

    /// Brute-force check of the lemma conclusion on model diagonal forms:
    /// the two hypotheses are built in, the conclusion must follow.
    #[test]
    fn coercivity_bound_on_model_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let dim = 50;
        for _ in 0..200 {
            let k1 = rng.gen_range(0.1..10.0);
            let k2 = rng.gen_range(0.1..10.0);
            let k3 = rng.gen_range(0.1..10.0);
            let beta1 = coercivity_constant(k1, k2, k3).unwrap();
            // Diagonal model: ‖v‖_H² = Σ h_i|v_i|², ‖v‖_L² = Σ l_i|v_i|²,
            // a(v,v) = Σ (r_i + i s_i)|v_i|² with r_i ≥ k₂h_i − k₃l_i, s_i ≥ k₁l_i.
            let h: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect();
            let l: Vec<f64> = h.iter().map(|&hi| hi * rng.gen_range(0.01..1.0)).collect();
            let r: Vec<f64> = (0..dim)
                .map(|i| k2 * h[i] - k3 * l[i] + rng.gen_range(0.0..1.0))
                .collect();
            let s: Vec<f64> = (0..dim)
                .map(|i| k1 * l[i] * (1.0 + rng.gen_range(0.0..1.0)))
                .collect();
            for _ in 0..50 {
                let v: Vec<(f64, f64)> = (0..dim)
                    .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let vv: Vec<f64> = v.iter().map(|(re, im)| re * re + im * im).collect();
                let norm_h: f64 = vv.iter().zip(&h).map(|(q, hi)| q * hi).sum();
                let norm_l: f64 = vv.iter().zip(&l).map(|(q, li)| q * li).sum();
                let a_re: f64 = vv.iter().zip(&r).map(|(q, ri)| q * ri).sum();
                let a_im: f64 = vv.iter().zip(&s).map(|(q, si)| q * si).sum();
                // Hypotheses hold by construction.
                assert!(a_im.abs() >= k1 * norm_l * (1.0 - 1e-12));
                assert!(a_re.abs().max(a_re) >= k2 * norm_h - k3 * norm_l - 1e-12);
                let a_abs = (a_re * a_re + a_im * a_im).sqrt();
                assert!(
                    a_abs >= beta1 * norm_h * (1.0 - 1e-12),
                    "|a| = {a_abs} < β₁‖v‖² = {}",
                    beta1 * norm_h
                );
            }
        }
    }
}

//! Convergence tables and log-log rate fitting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub parameter: f64,
    pub norm: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub norm: String,
    /// Slope of ln(value) against ln(parameter).
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
    /// Set when the value sequence is not monotone along the parameter.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub parameter_name: String,
    pub rows: Vec<TableRow>,
    pub fits: Vec<RateFit>,
}

impl ConvergenceTable {
    pub fn new(parameter_name: &str) -> Self {
        Self { parameter_name: parameter_name.to_string(), rows: Vec::new(), fits: Vec::new() }
    }

    pub fn push(&mut self, parameter: f64, norm: &str, value: f64) {
        self.rows.push(TableRow { parameter, norm: norm.to_string(), value });
    }

    pub fn series(&self, norm: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.norm == norm)
            .map(|r| (r.parameter, r.value))
            .collect()
    }

    pub fn norm_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.norm) {
                names.push(r.norm.clone());
            }
        }
        names
    }

    /// Fits every norm that has at least three positive rows.
    pub fn fit_all(&mut self) {
        self.fits.clear();
        for name in self.norm_names() {
            if let Ok(fit) = fit_loglog(&name, &self.series(&name)) {
                self.fits.push(fit);
            }
        }
    }

    pub fn fit(&self, norm: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.norm == norm)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{},norm,value", self.parameter_name);
        for r in &self.rows {
            let _ = writeln!(out, "{:.16e},{},{:.16e}", r.parameter, r.norm, r.value);
        }
        out
    }
}

/// Least-squares slope of ln y against ln x; needs ≥ 3 strictly positive
/// samples. The returned residual is the RMS log-misfit.
pub fn fit_loglog(name: &str, series: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0)
        .collect();
    if pts.len() < 3 {
        return Err(CageError::Parameter(format!(
            "rate fit for {name} needs at least 3 positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|(x, _)| x.ln()).sum::<f64>() / n;
    let ym = pts.iter().map(|(_, y)| y.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in &pts {
        let dx = x.ln() - xm;
        sxx += dx * dx;
        sxy += dx * (y.ln() - ym);
    }
    if sxx == 0.0 {
        return Err(CageError::Parameter(format!("degenerate abscissas for {name}")));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let mut ss = 0.0;
    for &(x, y) in &pts {
        let predicted = intercept + slope * x.ln();
        let r = y.ln() - predicted;
        ss += r * r;
    }
    let residual = (ss / n).sqrt();

    // Monotonicity flag against the parameter ordering.
    let mut ordered = pts.clone();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let increasing = ordered.windows(2).all(|w| w[0].1 <= w[1].1);
    let decreasing = ordered.windows(2).all(|w| w[0].1 >= w[1].1);
    Ok(RateFit {
        norm: name.to_string(),
        slope,
        intercept,
        residual,
        points: pts.len(),
        low_confidence: !(increasing || decreasing),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let series: Vec<(f64, f64)> =
            [0.25f64, 0.125, 0.0625, 0.03125].iter().map(|&d| (d, 3.0 * d.powf(1.5))).collect();
        let fit = fit_loglog("err", &series).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
        assert!(!fit.low_confidence);
        assert_eq!(fit.points, 4);
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(fit_loglog("x", &[(0.5, 1.0), (0.25, 0.5)]).is_err());
    }

    #[test]
    fn non_monotone_series_is_flagged() {
        let fit = fit_loglog(
            "noisy",
            &[(0.5, 1.0), (0.25, 2.0), (0.125, 0.5), (0.0625, 0.7)],
        )
        .unwrap();
        assert!(fit.low_confidence);
    }

    #[test]
    fn csv_is_stable() {
        let mut t = ConvergenceTable::new("delta");
        t.push(0.25, "h1_err", 0.5);
        t.push(0.125, "h1_err", 0.35);
        let csv = t.to_csv();
        assert!(csv.starts_with("delta,norm,value\n"));
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv, t.to_csv());
    }
}

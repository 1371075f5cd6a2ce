//! Declarative study configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};
use crate::fem::CoefficientSpec;
use crate::geometry::{
    DimensionMode, DomainSpec, GradingPolicy, LayerPattern, MeshParams, PatternKind,
};
use crate::problems::{PhysicalParams, SourceSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads for independent cases; 0 picks the rayon default.
    #[serde(default)]
    pub workers: usize,
    pub domain: DomainConfig,
    pub pattern: PatternConfig,
    pub physics: PhysicsConfig,
    pub source: SourceSpec,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub study: StudyLists,
    #[serde(default)]
    pub cell: CellConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub mode: DimensionMode,
    pub extents: Vec<f64>,
    pub half_height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub kind: PatternKind,
    #[serde(default = "default_bar_width")]
    pub bar_width: f64,
    #[serde(default = "default_raster_res")]
    pub raster_res: usize,
    /// Raster file for custom patterns (rows of 0/1).
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_bar_width() -> f64 {
    0.5
}

fn default_raster_res() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub omega: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    #[serde(default)]
    pub a_spec: CoefficientSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    pub cells_per_period: usize,
    /// Uniformly fine vertical band around the layer, in units of δ.
    pub uniform_band: f64,
    pub grading_ratio: f64,
    /// Cap on bulk element height (keeps the far-field error flat).
    pub max_step: f64,
    /// Vertical refinement factor of the limit baseline mesh.
    pub limit_refine: usize,
    pub mem_cap_mib: f64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            cells_per_period: 8,
            uniform_band: 1.25,
            grading_ratio: 1.3,
            max_step: 1.0 / 64.0,
            limit_refine: 4,
            mem_cap_mib: 2048.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyLists {
    /// δ = extent / N for each listed N; must be strictly increasing.
    pub delta_periods: Vec<usize>,
    /// θ values for the regularization study; strictly decreasing.
    pub theta_list: Vec<f64>,
    /// N used for the θ study.
    pub theta_delta_periods: usize,
    /// ε₂ ablation values for the shielding study (0 allowed).
    pub eps2_sweep: Vec<f64>,
    /// N used for the ε₂ sweep; defaults to the finest δ in the list.
    #[serde(default)]
    pub eps2_delta_periods: Option<usize>,
}

impl Default for StudyLists {
    fn default() -> Self {
        Self {
            delta_periods: vec![4, 8, 16, 32],
            theta_list: vec![1e-1, 1e-2, 1e-3, 1e-4],
            theta_delta_periods: 8,
            eps2_sweep: vec![0.0, 0.25, 1.0, 4.0],
            eps2_delta_periods: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub zeta: f64,
    pub resolution: usize,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self { zeta: 8.0, resolution: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default)]
    pub write_vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), write_vtk: false }
    }
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CageError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: StudyConfig =
            toml::from_str(&text).map_err(|e| CageError::Config(e.to_string()))?;
        cfg.apply_env_overrides();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env_overrides(&mut self) {
        if let Ok(w) = std::env::var("CAGE_HOMOG_WORKERS") {
            if let Ok(n) = w.parse::<usize>() {
                self.workers = n;
            }
        }
        if let Ok(dir) = std::env::var("CAGE_HOMOG_OUT") {
            if !dir.is_empty() {
                self.output.dir = PathBuf::from(dir);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain_spec()?;
        self.layer_pattern()?;
        self.physical_params().validate()?;
        let lists = &self.study;
        if lists.delta_periods.is_empty() {
            return Err(CageError::Config("delta_periods must not be empty".into()));
        }
        if !lists.delta_periods.windows(2).all(|w| w[0] < w[1]) {
            return Err(CageError::Config(
                "delta_periods must be strictly increasing (δ strictly decreasing)".into(),
            ));
        }
        if !lists.theta_list.windows(2).all(|w| w[0] > w[1]) {
            return Err(CageError::Config("theta_list must be strictly decreasing".into()));
        }
        let extent = self.domain.extents[0];
        let delta_theta = extent / lists.theta_delta_periods as f64;
        let cap = self.physics.eps2 / (delta_theta * delta_theta);
        for &t in &lists.theta_list {
            if !(t > 0.0 && t < cap) {
                return Err(CageError::Config(format!(
                    "theta {t} outside (0, eps2/delta^2) = (0, {cap})"
                )));
            }
        }
        if self.resolution.cells_per_period % 2 != 0 {
            return Err(CageError::Config("cells_per_period must be even".into()));
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        DomainSpec::new(self.domain.mode, self.domain.extents.clone(), self.domain.half_height)
    }

    pub fn layer_pattern(&self) -> Result<LayerPattern> {
        let dims = self.domain.mode.in_plane_dims();
        match self.pattern.kind {
            PatternKind::Custom => {
                let file = self.pattern.file.as_ref().ok_or_else(|| {
                    CageError::Config("custom pattern needs a raster file".into())
                })?;
                let text = std::fs::read_to_string(file)
                    .map_err(|e| CageError::Config(format!("pattern file: {e}")))?;
                let pat = LayerPattern::from_text(&text)?;
                if pat.dims() != dims {
                    return Err(CageError::Config(format!(
                        "pattern raster has {} axes, domain needs {dims}",
                        pat.dims()
                    )));
                }
                Ok(pat)
            }
            kind => LayerPattern::build(kind, self.pattern.bar_width, self.pattern.raster_res, dims),
        }
    }

    pub fn physical_params(&self) -> PhysicalParams {
        PhysicalParams {
            omega: self.physics.omega,
            eps1: self.physics.eps1,
            eps2: self.physics.eps2,
            eps3: self.physics.eps3,
            a_spec: self.physics.a_spec.clone(),
            source: self.source.clone(),
        }
    }

    pub fn mesh_params(&self, n_periods: usize) -> MeshParams {
        MeshParams {
            n_periods,
            cells_per_period: self.resolution.cells_per_period,
            grading: GradingPolicy::Graded {
                uniform_band: self.resolution.uniform_band,
                ratio: self.resolution.grading_ratio,
                max_step: self.resolution.max_step,
                refine: 1,
            },
            mem_cap_mib: self.resolution.mem_cap_mib,
        }
    }

    /// Mesh parameters for the limit baseline: finest in-plane lattice of
    /// the study plus extra vertical refinement near the interface.
    pub fn limit_mesh_params(&self) -> MeshParams {
        let finest = *self.study.delta_periods.last().expect("validated nonempty");
        let mut p = self.mesh_params(finest);
        p.grading = GradingPolicy::Graded {
            uniform_band: self.resolution.uniform_band,
            ratio: self.resolution.grading_ratio,
            max_step: self.resolution.max_step,
            refine: self.resolution.limit_refine.max(1),
        };
        p
    }

    /// The standard desk-scale verification configuration.
    pub fn c0_reduced() -> Self {
        Self {
            seed: 42,
            workers: 0,
            domain: DomainConfig {
                mode: DimensionMode::Reduced2d,
                extents: vec![1.0],
                half_height: 1.0,
            },
            pattern: PatternConfig {
                kind: PatternKind::Cross,
                bar_width: 0.5,
                raster_res: 8,
                file: None,
            },
            physics: PhysicsConfig {
                omega: 1.0,
                eps1: 1.0,
                eps2: 1.0,
                eps3: 1.0,
                a_spec: CoefficientSpec::Identity,
            },
            source: SourceSpec::IndicatorZ { z_lo: 0.5, z_hi: 0.75, amplitude: [1.0, 0.0] },
            resolution: ResolutionConfig::default(),
            study: StudyLists::default(),
            cell: CellConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Coarse full-mode variant (resolved 3D is only affordable at δ = 1/4).
    pub fn c0_full3d() -> Self {
        let mut cfg = Self::c0_reduced();
        cfg.domain =
            DomainConfig { mode: DimensionMode::Full3d, extents: vec![1.0, 1.0], half_height: 1.0 };
        cfg.pattern.raster_res = 4;
        cfg.resolution.cells_per_period = 4;
        cfg.resolution.max_step = 1.0 / 8.0;
        cfg.study.delta_periods = vec![2, 4];
        cfg.study.theta_delta_periods = 4;
        cfg.cell.resolution = 8;
        cfg.cell.zeta = 4.0;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0_round_trips_through_toml() {
        let cfg = StudyConfig::c0_reduced();
        cfg.validate().unwrap();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: StudyConfig = toml::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.study.delta_periods, vec![4, 8, 16, 32]);
    }

    #[test]
    fn validation_rejects_bad_lists() {
        let mut cfg = StudyConfig::c0_reduced();
        cfg.study.delta_periods = vec![8, 8];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::c0_reduced();
        cfg.study.theta_list = vec![1e-3, 1e-2];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::c0_reduced();
        // θ above the contrast at the study δ.
        cfg.study.theta_list = vec![1e9];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn env_overrides_apply() {
        let mut cfg = StudyConfig::c0_reduced();
        std::env::set_var("CAGE_HOMOG_WORKERS", "3");
        std::env::set_var("CAGE_HOMOG_OUT", "elsewhere");
        cfg.apply_env_overrides();
        std::env::remove_var("CAGE_HOMOG_WORKERS");
        std::env::remove_var("CAGE_HOMOG_OUT");
        assert_eq!(cfg.workers, 3);
        assert_eq!(cfg.output.dir, PathBuf::from("elsewhere"));
    }
}

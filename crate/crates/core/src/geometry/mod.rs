//! Computational domains: the layered box, the reference-cell pattern, and
//! structured meshes with per-element region labels.

mod mesh;
mod pattern;

pub use mesh::{
    build_mesh, classify_point, DimensionMode, DomainSpec, GradingPolicy, MeshId, MeshParams,
    Region, StructuredMesh,
};
pub use pattern::{LayerPattern, PatternKind};

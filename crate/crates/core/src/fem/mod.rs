//! Complex-valued first-order finite elements on structured meshes:
//! assembly of the sesquilinear forms, Dirichlet elimination, sparse
//! solves, and the norm/trace functionals used throughout.

mod assemble;
mod band_lu;
mod cocg;
mod csr;
mod field;
mod inequalities;
mod material;
mod norms;
pub(crate) mod quadrature;
mod solve;

pub use assemble::{
    assemble, assemble_load, source_inner_product, AssembleOptions, SourceTerm,
    SparseHermitianSystem, SymmetryKind,
};
pub use band_lu::BandLu;
pub use cocg::{cocg_solve, CocgOutcome};
pub use csr::CsrMatrix;
pub use field::NodalField;
pub use inequalities::{check_layer_inequalities, LayerInequalityReport};
pub use material::{CoefficientSpec, MaterialField};
pub use norms::{
    dz_l2_zrange, inner_product, interpolate, norms, norms_zrange, sample, trace_dz_at_gamma,
    trace_l2, NormSet, RegionFilter,
};
pub use solve::{solve, SolveMethod, SolveStats, DIRECT_LIMIT, ITERATIVE_TOL, NEAR_SINGULAR_PIVOT};

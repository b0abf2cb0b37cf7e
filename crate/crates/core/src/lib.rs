//! Lax pairs of the classical Ruijsenaars-Schneider and Calogero-Moser
//! systems: direct and factorized matrices in the elliptic, trigonometric and
//! rational classes, the quantum R-matrices and their IRF-Vertex relations,
//! the intertwiner-built M matrices, the rational B/C/D root-system family,
//! and the verification engines that check every identity numerically.

pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod factorization;
pub mod linalg;
pub mod models;
pub mod rmatrix;
pub mod rootsys;
pub mod schlesinger;
pub mod verify;

pub use elliptic::{EllipticModulus, FunctionClass, ThetaChar};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, TwoSiteOperator};
pub use models::{LaxEvaluator, ModelKind, ModelSpec, PhasePoint, TopSpec};
pub use rootsys::BcnSpec;

//! Numerical laboratory for the geometry and entropy of singular holomorphic
//! foliations at desk scale: Poincaré-disk automorphism algebra, prescribed-step
//! sets with explicit covering bounds, complex-time leaf tracing, conformal
//! uniformization of leaf patches, Birkhoff-type harmonic-measure sampling and
//! Bowen-ball entropy estimators.

pub mod disk;
pub mod foliation;
pub mod measure;
pub mod steps;
pub mod theodorsen;
pub mod uniformize;

pub use disk::{DiskAutomorphism, DiskPoint, HypRadius};

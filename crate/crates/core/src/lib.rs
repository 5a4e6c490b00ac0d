//! Anisotropic Minkowski contents of compact sets: exact support-function and
//! surface-measure arithmetic, voxel dilation, limit estimators and the
//! pathological packing constructions used to probe them.

pub mod convex;
pub mod error;
pub mod estimate;
pub mod generate;
pub mod linalg;
pub mod mesh;
pub mod surface;
pub mod voxel;

pub use convex::{PreparedBody, StructuringElement, SymmetricBody};
pub use error::{Error, Result};
pub use surface::{DiscreteSurfaceMeasure, MeasureKind};

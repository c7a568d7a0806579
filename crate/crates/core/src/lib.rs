//! Heat flow of closed magnetic geodesics on embedded surfaces and flat tori.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod exterior;
pub mod flow;
pub mod force;
pub mod geometry;
pub mod oracle;
pub mod spectral;

pub use analysis::{AnalysisError, EnergyReport, StabilityReport};
pub use exterior::{MultiLinearMap, MultiVector};
pub use flow::{FlowConfig, FlowError, FlowTrajectory, LoopState, ProjectionMode, SpatialScheme, TimeScheme, TimeStep};
pub use force::{ForceError, ForceField, ForceKind};
pub use geometry::{GeometryError, ManifoldModel, ModelKind, Vec3};
pub use oracle::{CylinderFourierState, OracleError};

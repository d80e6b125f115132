//! Enclosed-volume functionals for closed curves in R^n, length
//! minimization under volume constraints, and second-variation stability.
//!
//! A closed curve in higher codimension encloses no region, so "volume" is
//! one of three surrogates:
//!
//! * the least area of a spanning surface, `v(S)`, which is only bracketed
//!   here ([`functionals::spanning_volume_bracket`]);
//! * the Ω-volume `∫_S ω` for a constant 2-form `Ω = dω`
//!   ([`functionals::omega_volume`]);
//! * the multi-volume, the vector of signed areas of the projections to the
//!   axis planes ([`functionals::multi_volume`]).
//!
//! Curves are polygons ([`DiscreteCurve`]); trigonometric curves
//! ([`FourierCurve`]) are sampled onto them.

pub mod calibration;
pub mod constraints;
pub mod curves;
pub mod error;
pub mod forms;
pub mod functionals;
pub mod hessian;
mod linalg;
pub mod optimizer;
pub mod stability;
pub mod sweep;

pub use constraints::{ConstraintSet, ConstraintSpec};
pub use curves::{DiscreteCurve, FourierCurve, FourierTerm, VertexField};
pub use error::{Error, Result};
pub use forms::{AxisPlane, ConstantTwoForm, FormEntry};
pub use functionals::{MultiVolume, StationarityFit, VolumeBracket};
pub use optimizer::{OptimizationReport, OptimizerConfig};
pub use stability::{SpectrumConfig, SpectrumReport, Verdict};
pub use sweep::{SweepConfig, SweepPoint};

//! Comparison geometry for smooth and `C^{1,1}` metrics on a single chart:
//! curvature, geodesics, comparison spacetimes, mollification, time
//! separation and volume comparison.

pub mod error;
pub mod expr;
pub mod geodesic;
pub mod hypersurface;
pub mod jet;
pub mod linalg;
pub mod metric;
pub mod models;
pub mod mollifier;
pub mod quadrature;
pub mod volume;

pub use error::{GeomError, Result};
pub use geodesic::{GeodesicSolution, GeodesicState, StepControl, Termination, TransportFrame};
pub use hypersurface::{Hypersurface, NormalBundle, Patch, SearchConfig, SeparationEstimate};
pub use metric::{ChartDomain, CurvatureSample, MetricField, Signature, Smoothness, TangentVector};
pub use models::ComparisonModel;

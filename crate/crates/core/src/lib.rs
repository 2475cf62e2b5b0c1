//! Numerical laboratory for dissipative Hénon-like families.

pub mod cantor;
pub mod error;
pub mod io;
pub mod maps;
pub mod numerics;
pub mod paramcantor;
pub mod renorm;
pub mod tangency;
pub mod unimodal;
pub mod windows;

pub use cantor::{CantorSchedule, DimensionEstimate, GapVerdict, IntervalCover, ThicknessReport};
pub use error::{Error, Result};
pub use maps::{
    derivative_products, find_periodic_orbit, DerivativeProducts, DerivativeSeries, DiagonalMap, HenonLikeFamily,
    HenonSlice, Monomial, Orbit, PeriodicOrbit, PlanarMap, Point, Poly,
};
pub use paramcantor::{CantorTree, ScaleSchedule, SyntheticSource, WindowOracle, WindowSource};
pub use renorm::{ConditionsReport, RenormOptions, RenormalizedFamily, SampledMap};
pub use tangency::{TangencyOptions, TangencyRecord};
pub use unimodal::{AlphaLadder, CantorKind, Metric, UnimodalMap};
pub use windows::{Generator, ScalingFit, StabilityWindow};

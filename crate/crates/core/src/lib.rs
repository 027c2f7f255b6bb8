//! Chaining functionals and Monte Carlo verification for suprema of
//! infinitely divisible processes over finite atomic Lévy measures.
//!
//! The process is `X_t = Σ_i ε_i t(Z_i)` where `(Z_i)` is a Poisson point
//! process of intensity `ν` and `(ε_i)` are independent random signs.

pub mod error;
pub mod lab;
pub mod majorizing;
pub mod metric;
pub mod partition;
pub mod poisson_mc;
pub mod scale;
pub mod scenario;
pub mod stats;

pub use error::{LabError, McError, MeasureError, PartitionError, ScenarioError};
pub use majorizing::{LabelProfile, MeasureOnT};
pub use metric::{DistanceKind, DistanceMatrix, PhiFamily, ScaleDistance};
pub use partition::{GammaValue, PartitionTree};
pub use poisson_mc::{EsupMode, PointConfiguration};
pub use scale::Scale;
pub use scenario::{FunctionFamily, MeasureSpace, ScenarioConfig};
pub use stats::McEstimate;

//! Empirical characteristic functions on grids and the weighted metric.

mod ecf;
mod grid;
mod metric;

pub(crate) use ecf::uniform_symmetric;
pub use ecf::{ecf_from_points, ecf_grid, EcfMethod};
pub use grid::{symmetric_axis, CharFnGrid};
pub use metric::{distance_terms, weight, weighted_sup_distance, DistanceTerms, WeightedMetricConfig, DEFAULT_DELTA};

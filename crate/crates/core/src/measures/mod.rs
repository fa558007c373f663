//! Empirical measures, the weak-topology proxy, Birkhoff averages and
//! physical-measure extraction.

pub mod dictionary;
pub mod empirical;
pub mod holonomy;
pub mod physical;

pub use dictionary::{OrbitAccumulator, TestDictionary, DEFAULT_DEGREE};
pub use empirical::{birkhoff_moments, weak_distance, Atom, BirkhoffMoments, EmpiricalMeasure};
pub use holonomy::{holonomy_probe, holonomy_probe_with, HolonomyOptions, HolonomyReport};
pub use physical::{
    basin_labels, basin_map, cluster_samples, extract_physical_measures, intermingling, sample_grid, BasinCell,
    BasinMap, ExtractParams, GridSample, GridSpec, IntermingleReport, PhysicalMeasureReport,
};

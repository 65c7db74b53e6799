//! Divide-and-color percolation on the square and hexagonal lattices.
//!
//! The model has two stages: Bernoulli bond percolation with density `p`,
//! then an independent black/white coloring of each bond cluster with
//! probability `r`. This crate simulates the model on finite windows,
//! extracts the exact coloring level at which rectangle-crossing events
//! first hold (one uniform per cluster couples all levels at once), and
//! turns order statistics of those thresholds into rigorous confidence
//! intervals for the critical level `r_c(p)`:
//!
//! * a crossing criterion met with probability at least 0.8639 certifies
//!   percolation of the renormalized 1-dependent process, giving an upper
//!   bound route;
//! * the same criterion on the matching (star-adjacency) lattice bounds the
//!   dual critical level, and `r_c(p) + r_c*(p) = 1` below the bond
//!   threshold turns that into a lower bound;
//! * an exact binomial tail computation picks the order-statistic rank `m`
//!   for the requested confidence level.

pub mod binom;
pub mod bonds;
pub mod coupling;
pub mod error;
pub mod lattice;
pub mod params;
pub mod runner;

pub use binom::{binomial_cdf, binomial_tail, design_m, DesignParams, DEFAULT_CRITERION_Q};
pub use bonds::{detect_f, label_clusters, sample_bonds, BondConfig, ClusterLabels, UnionFind};
pub use coupling::{
    assign_uniforms, color_at_level, compute_thresholds, crossing_event, ColorConfig,
    ThresholdPair, UniformAssignment,
};
pub use error::{Error, Result};
pub use lattice::{build_window, LatticeKind, LatticeWindow, Rect, RegionSpec, WindowParts};
pub use params::{appendix_parameters, appendix_table, AppendixRow};
pub use runner::{
    calibrate_ell, confidence_interval, estimate_f_probability, estimate_trial_memory,
    estimate_window_memory, run_trial_detailed, run_trials, substream_seed, trial_rng,
    Calibration, ExperimentConfig, IntervalResult, TrialData, TrialRecord,
};

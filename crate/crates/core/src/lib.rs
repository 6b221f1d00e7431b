//! Automated good-time culling for grid-structured particle-count surveys.
//!
//! The library covers the full batch pipeline:
//!
//! 1. [`model`] — observations, per-arc (ESA x angle x time) grids, ingest.
//! 2. [`sim`] — synthetic arcs with planted contamination and ground truth.
//! 3. [`fov`] — field-of-view exclusion from pointing + ephemeris tables.
//! 4. [`features`] — the 28 engineered predictors per observation.
//! 5. [`forest`] — bagged classification trees, trained leave-one-orbit-out.
//! 6. [`pipeline`] — three-stage culling: per-observation probabilities,
//!    per-time aggregation with FOV reinstatement, consecutive-run refinement.
//! 7. [`rates`] / [`skymap`] — good-time ENA rates, exposure groups, 6-degree
//!    sky maps and percent-difference maps.
//! 8. [`stats`] — label- and map-comparison statistics (confusion metrics,
//!    KS, lagged cross-correlation + paired t, concordance, pass/fail summary).
//!
//! Everything is deterministic given the run seed: stochastic components draw
//! from splittable [`rng::Stream`]s keyed by purpose, so serial and parallel
//! runs produce bit-identical results. The `parallel` feature (default)
//! enables rayon data-parallel paths; sequential fallbacks stay compiled and
//! are benchmarked against them in `benches/parallel_vs_serial.rs`.

pub mod error;
pub mod features;
pub mod forest;
pub mod fov;
pub mod model;
pub mod pipeline;
pub mod rates;
pub mod rng;
pub mod sim;
pub mod skymap;
pub mod stats;
pub mod tables;

pub use error::{Error, Result};

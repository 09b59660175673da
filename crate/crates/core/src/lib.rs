//! Online category discovery over a fixed support set.
//!
//! The pipeline has an offline half and an online half. Offline, a labeled
//! support set defines a per-coordinate standardization, a bank of base-class
//! reference directions, and every decision threshold (each one picked by
//! maximizing balanced accuracy on a proxy task built from the support set
//! alone). Online, each standardized sample walks a small decision tree:
//! route by base-class evidence, test whether any prototype explains it well
//! enough, then either attach it to an evolving novel prototype or create a
//! new one.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. File formats and the command-line front end live in the
//! companion `discovery-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod stats;
pub mod support;
pub mod synthetic;

pub use engine::{Decision, DecisionTrace, NovelPrototype, PrototypeMemory, Route, Routing, StreamState};
pub use error::{Error, Result};
pub use evaluation::{
    evaluate, greedy_accuracy, hungarian_assign, retain_top_clusters, strict_accuracy, Assignment,
    EvalReport, Retention, StreamResult, SubsetAccuracy,
};
pub use geometry::{
    compute_support_stats, log_uniform_density, standardize, vmf_concentration, SpaceConfig,
    SupportStats, UnitEmbedding,
};
pub use support::{
    build_class_prototypes, calibrate, calibrate_birth, calibrate_create, calibrate_routing,
    optimize_balanced_threshold, select_base_references, BalancedThreshold, BaseReferenceBank,
    CalibrationReport, LabeledSupportSet, ReferenceSource, ThresholdSet,
};
pub use synthetic::{generate_benchmark, sample_vmf, Benchmark, BenchmarkSpec, MeanScheme};

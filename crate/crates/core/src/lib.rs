//! Structured analysis dictionary learning (SADL).
//!
//! Learns an analysis dictionary `Ω` (codes are `U ≈ ΩX`), a structuring
//! transform `Q` that maps codes onto a block-diagonal class-structure target
//! `H`, and a linear one-against-all classifier `W` mapping `QU` onto one-hot
//! labels `L`. Training runs a linearized alternating-direction scheme on the
//! augmented Lagrangian of the coupled problem; inference is a single chain of
//! matrix-vector products, `argmax(W·Q·Ω·x)`.
//!
//! Matrices follow the usual convention of this crate: samples are columns.
//!
//! ```no_run
//! use sadl::{generate_synthetic, solver, structure, SynthSpec, TrainConfig};
//!
//! let (train, test) = generate_synthetic(&SynthSpec::default()).unwrap();
//! let cfg = TrainConfig::default();
//! let targets = structure::build_targets(&train, cfg.block_rows).unwrap();
//! let (model, _state) = solver::train(&train, &targets, &cfg).unwrap();
//! let report = sadl::classifier::evaluate(&model, &test, 5).unwrap();
//! println!("{}", report.to_table("SADL"));
//! ```

pub mod classifier;
pub mod config;
pub mod data;
mod error;
mod linalg;
pub mod model;
pub mod ridge;
pub mod solver;
pub mod structure;

pub use classifier::{evaluate, Classify, EvalReport, Scorer};
pub use config::{DualStep, Mode, StepRule, TrainConfig};
pub use data::{generate_synthetic, Dataset, Split, SynthSpec};
pub use error::{Error, Result};
pub use model::Model;
pub use ridge::RidgeClassifier;
pub use solver::{train, train_observed, StepSizes, TrainState};
pub use structure::StructureTargets;

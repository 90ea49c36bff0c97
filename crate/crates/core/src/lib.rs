//! Sparse polynomial chaos surrogates trained with a variational relevance
//! vector machine.
//!
//! The crate is organised around the pieces of the pipeline:
//!
//! - [`basis`]: orthonormal Hermite bases, multi-index truncation sets and
//!   design matrices.
//! - [`expfam`]: canonical exponential families and the special functions
//!   the variational updates consume.
//! - [`rvm`]: the mean-field variational RVM (coordinate ascent on the
//!   evidence lower bound, with active-set pruning).
//! - [`cs`]: an l1 basis-pursuit baseline solved by Douglas–Rachford
//!   splitting.
//! - [`surrogate`]: fitted expansions, prediction, moments and comparison
//!   metrics.
//! - [`synthetic`] and [`study`]: the seeded O'Hagan benchmark and the
//!   experiment harness built on it.
//!
//! A typical fit:
//!
//! ```
//! use sparsepce::{basis::{BasisSpec, Truncation}, rvm, synthetic::OhaganInstance};
//!
//! let inst = OhaganInstance::new(3, 7).unwrap();
//! let data = inst.sample_dataset(60, 7).unwrap();
//! let spec = BasisSpec::new(3, 2, Truncation::TotalDegree).unwrap();
//! let fit = rvm::fit(&data, &spec, &rvm::PriorConfig::default(), &rvm::FitConfig::default()).unwrap();
//! assert_eq!(fit.pce.len(), 10);
//! ```

pub mod basis;
pub mod cs;
pub mod dataset;
pub mod error;
pub mod expfam;
pub mod rng;
pub mod rvm;
pub mod study;
pub mod surrogate;
pub mod synthetic;

pub use basis::{BasisSpec, DesignMatrix, MultiIndex, Truncation};
pub use cs::{fit_cs, CsConfig};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use expfam::NaturalParam;
pub use rng::Rng;
pub use rvm::{fit, FitConfig, FitResult, InitStrategy, PriorConfig, RvmState};
pub use surrogate::{FitMetadata, Moments, Source, SparsePce};
pub use synthetic::OhaganInstance;

//! Subspace outlier ensembles for categorical data.
//!
//! Records are scored per subspace, the per-subspace outlier factors are fused
//! with a combining operator, and the most outlying records are reported. The
//! [`soe1`] module is the fast two-scan detector over one-dimensional
//! subspaces; [`framework`] runs arbitrary subspace sets with pluggable
//! per-subspace detectors.
//!
//! ```
//! use soe_core::{Combiner, Dataset, LoadOptions, Polarity, Selection, Soe1Config};
//!
//! let ds = Dataset::from_rows(
//!     &["a1", "a2"],
//!     &[["a", "x"], ["a", "x"], ["a", "y"], ["b", "x"], ["c", "y"]],
//!     &LoadOptions::default(),
//! )
//! .unwrap();
//! let cfg = Soe1Config::new(Selection::K(2), Combiner::Product, Polarity::Frequency);
//! let top = soe_core::soe1::detect(&ds, &cfg).unwrap();
//! assert_eq!(top[0].record, 4);
//! assert_eq!(top[1].record, 3);
//! ```

pub mod combiner;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod framework;
pub mod histogram;
pub mod ranking;
pub mod soe1;
pub mod synth;
pub mod uci;

pub use combiner::Combiner;
pub use dataset::{ColumnKind, Dataset, LoadOptions, MissingPolicy, SchemaHints, ValueId};
pub use error::{Error, Result};
pub use histogram::HistogramSet;
pub use ranking::{Polarity, ScoredRecord, Selection};
pub use soe1::Soe1Config;

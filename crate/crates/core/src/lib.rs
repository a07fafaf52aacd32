//! Eigenvectors, fixed points and convergence rates of order-preserving,
//! degree-one homogeneous maps on the open positive orthant, and of their
//! log-coordinate counterparts, topical maps.
//!
//! ```
//! use nlpf::cone::PositiveVector;
//! use nlpf::iterate::{solve, SolveOptions};
//! use nlpf::maps::MapModel;
//! use nlpf::structure::has_positive_eigenvector;
//!
//! let f = MapModel::matrix(vec![vec![1.0, 1.0], vec![0.0, 2.0]])?;
//! assert!(has_positive_eigenvector(&f)?.exists);
//! let r = solve(&f, &PositiveVector::ones(2), &SolveOptions::default())?;
//! assert!((r.eigenvalue() - 2.0).abs() < 1e-8);
//! # Ok::<(), nlpf::Error>(())
//! ```

pub mod cone;
pub mod error;
pub mod iterate;
pub mod linalg;
pub mod maps;
pub mod mapspec;
pub mod random;
pub mod rate;
pub mod repro;
pub mod structure;
pub mod topical;
pub mod verify;

pub use cone::PositiveVector;
pub use error::{Error, Result};
pub use maps::MapModel;
pub use mapspec::MapSpec;
pub use topical::TopicalMap;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
mod book_metrics {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/maps.md")]
mod book_maps {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/structure.md")]
mod book_structure {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/iteration.md")]
mod book_iteration {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rates.md")]
mod book_rates {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/topical.md")]
mod book_topical {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/verification.md")]
mod book_verification {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/report-schema.md")]
mod book_report_schema {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

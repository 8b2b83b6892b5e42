//! Minimum sum-of-squares clustering with Big-means: K-means run on a stream
//! of uniformly sampled chunks, with K-means++ reseeding of empty clusters
//! and keep-the-best incumbent tracking, followed by one assignment pass over
//! the full dataset.
//!
//! The crate also carries the baselines it is measured against (Forgy
//! K-means, K-means++, K-means||), an exhaustive MSSC oracle for tiny
//! instances, dataset loaders, and a benchmark runner that reports relative
//! errors and cross-algorithm scores.
//!
//! ```
//! use bigmeans::{big_means, BigMeansConfig, Dataset};
//!
//! let data = Dataset::from_rows(&[
//!     [0.0, 0.0], [0.0, 1.0], [1.0, 0.0],
//!     [9.0, 9.0], [9.0, 8.0], [8.0, 9.0],
//! ])
//! .unwrap();
//! let cfg = BigMeansConfig::new(2, 4).with_max_chunks(10).with_seed(1);
//! let (outcome, trace) = big_means(&data, &cfg).unwrap();
//! assert_eq!(trace.chunks.len(), 10);
//! assert_eq!(outcome.centroids.active_count(), 2);
//! ```

pub mod bench;
pub mod bigmeans;
pub mod dataset;
pub mod error;
pub mod init;
pub mod io;
pub mod kernel;
pub mod local_search;
pub mod metrics;
pub mod oracle;

pub use bigmeans::{big_means, sample_chunk, BigMeansConfig, BigMeansTrace};
pub use dataset::{Assignment, Centroids, ClusteringOutcome, Dataset, EvalCounter};
pub use error::{Error, Result};
pub use init::{InitConfig, InitMethod};
pub use local_search::{kmeans, lloyd, SearchConfig};

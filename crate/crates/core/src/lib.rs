//! Cross-network user identity linkage with dual-aggregation graph neural
//! networks.
//!
//! The crate trains one encoder per social network (a stack of layers that
//! each combine a degree-normalized spectral aggregator with a learned
//! neighborhood attention aggregator, joined by long skip connections),
//! regularizes the embeddings with edge-reconstruction and neighborhood
//! proximity losses, and learns an MLP mapping between the two embedding
//! spaces from known anchor identity pairs. Linkage is then scored by a
//! classifier over concatenated mapped embeddings.
//!
//! All numeric code is generic over [`Scalar`]; the [`Real`] alias pins the
//! default `f64` precision used by the CLI and the test suites.

pub mod adam;
pub mod bench;
pub mod dense;
pub mod encoder;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod graph;
pub mod loss;
pub mod params;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar precision for the shipped binaries and tests.
pub type Real = f64;

/// Dense matrix at default precision.
pub type Matrix = dense::DenseMatrix<Real>;

/// Parameter container at default precision.
pub type Params = params::ParamSet<Real>;

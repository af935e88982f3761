//! Balanced affine urn models with multiple drawings, applied to the global
//! containment profile of hyperrecursive trees.
//!
//! The crate provides:
//!
//! - [`urn`]: the generic affine urn state machine — validation, multivariate
//!   hypergeometric sampling, one-step evolution, conditional means.
//! - [`hrt`]: the hyperrecursive-tree specialization — core matrices, exact
//!   and asymptotic containment-level means, and an explicit tree simulator.
//! - [`spectral`]: eigenstructure of integer core matrices via exact
//!   characteristic polynomials, principal left eigenvectors, core indices.
//! - [`covariance`]: the limiting covariance matrix by a Sylvester solve with
//!   an independent quadrature cross-check, plus the closed-form 3x3 block.
//! - [`oracle`]: exact finite-horizon distributions of small urns by
//!   exhaustive enumeration in rational arithmetic.
//! - [`montecarlo`]: a deterministic parallel replication harness with moment
//!   estimation and the Henze-Zirkler multivariate normality test.

pub mod covariance;
pub mod exact;
pub mod expm;
pub mod hrt;
pub mod montecarlo;
pub mod oracle;
pub mod spectral;
pub mod urn;

pub use covariance::{cov3_closed_form, limit_covariance, limit_covariance_quadrature, CovarianceLimit};
pub use hrt::{grow_tree, hrt_core_matrix, hrt_urn, HrtParams, TreeState};
pub use montecarlo::{hz_test, run_replications, MomentReport, SimulationPlan};
pub use oracle::{exact_distribution, exact_moments, ExactDistribution};
pub use spectral::{spectral_analysis, SpectralData, SpectralError};
pub use urn::{sample_pmf, SampleVector, UrnError, UrnSpec, UrnState};

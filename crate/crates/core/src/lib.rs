//! Randomized treatment-assignment designs for GATE estimation on networks.
//!
//! The central object is a distribution over assignment vectors `x ∈ {-1,+1}^n`
//! summarized by its second-moment / covariance matrix `X`. Worst-case
//! mean-squared-error bounds for the Horvitz-Thompson and difference-in-means
//! estimators are linear (plus a Schatten-norm penalty) in `X`, so design
//! optimization becomes a semidefinite program over the elliptope
//! `{X ⪰ 0, diag(X) = 1}`. Two complementary routes produce assignments:
//!
//! * [`sdp`] minimizes the bound over the elliptope (low-rank factorized
//!   first-order method, with a dense projected-gradient reference solver),
//!   and [`rounding`] converts the solution into random signs with exact
//!   marginals via Gaussian or quantile rounding.
//! * [`gsw`] runs an adapted Gram-Schmidt walk on an augmented covariate
//!   matrix built from the graph Laplacian, its pseudo-inverse, and the
//!   all-ones matrix, trading balance against randomization with a single
//!   parameter `λ`.
//!
//! [`baselines`] supplies Bernoulli, complete, and cluster randomization
//! (with spectral, hop-net and greedy-modularity clusterings) for comparison;
//! [`adversary`] generates worst-case potential outcomes saturating each
//! budget; [`estimation`] runs seeded Monte-Carlo MSE experiments.

pub mod adversary;
pub mod baselines;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod gsw;
pub mod objective;
pub mod rng;
pub mod rounding;
pub mod sdp;
pub mod spectra;

pub use error::{Error, Result};
pub use graph::{GraphModel, WeightedGraph};
pub use objective::{DesignCovariance, ObjectiveSpec, TradeoffParams};
pub use spectra::SpectralBundle;

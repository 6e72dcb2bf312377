//! Query-based K-means clustering with same-cluster oracles.
//!
//! The crate provides simulated same-cluster oracles (noiseless and
//! persistently noisy), query-efficient cluster seeding with and without
//! outliers, noisy-oracle cluster recovery, closed-form query-complexity
//! bound evaluators with Monte-Carlo verifiers, and a synthetic Gaussian
//! mixture generator used to exercise all of the above. A CLI binary (`qkm`)
//! drives dataset generation, experiment runs, and verification suites.

pub mod bounds;
pub mod datagen;
pub mod geometry;
pub mod noiseless;
pub mod noisy;
pub mod oracle;
pub mod outlier;
pub mod report;

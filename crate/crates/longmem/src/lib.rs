//! Monte Carlo machinery for clusters of moderate-deviation events in
//! long-memory moving averages.
//!
//! The process under study is `X_n = sum_i a_i Z_{n-i}` with coefficients
//! `a_i ~ i^{-alpha}`, `1/2 < alpha < 1`, driven by centred light-tailed
//! i.i.d. noise. Conditionally on the window event
//! `E_0 = { (X_0 + ... + X_{n-1})/n >= eps }`, the rescaled first
//! non-occurrence time `n^{-beta} I_n(eps)` of the shifted window events
//! converges to the first hitting time of a randomly shifted fractional
//! Brownian motion with polynomial drift. This crate provides:
//!
//! * closed-form model constants and their cross-checks ([`params`]),
//! * noise families with analytic log-MGFs and exact exponential tilting
//!   ([`noise`]),
//! * fast simulation of the moving-average window with sliding partial
//!   sums and first non-occurrence detection ([`ma`]),
//! * the saddle-point change of measure used as an importance sampler for
//!   the conditional laws ([`rare_event`]),
//! * exact sampling of the limiting fractional Brownian motion and its
//!   barrier hitting time ([`fbm`]),
//! * weighted empirical laws with Kolmogorov-Smirnov and Wasserstein
//!   distances, plus the end-to-end experiment runner ([`law`], [`runner`]).

// `!(x > 0.0)` is the NaN-rejecting form of a positivity check; the
// suggested `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod conv;
pub mod error;
pub mod fbm;
pub mod law;
pub mod ma;
pub mod noise;
pub mod params;
pub mod quad;
pub mod rare_event;
pub mod report;
pub mod rng;
pub mod runner;
pub mod special;

pub use error::{Error, Result};

//! Average uplink and downlink rates of a full-duplex cloud radio access network whose
//! multi-antenna radio heads form a Poisson point process.
//!
//! The crate pairs a Monte Carlo simulator ([`montecarlo`]) with semi-analytic rate
//! expressions built on MGF integrals ([`analytic`]). Both read the same
//! [`config::NormalizedParams`], in which every power is expressed relative to the noise.

pub mod analytic;
pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod config;
pub mod geometry;
pub mod montecarlo;
pub mod quadrature;
pub mod specfun;
pub mod stats;
pub mod validation;

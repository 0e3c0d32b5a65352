//! Value of information (VoI) for status updates of a noisy
//! Ornstein-Uhlenbeck process.
//!
//! The VoI at time `t` is the mutual information between the hidden state
//! `X_t` and the latest `m` noisy samples received by `t`. This crate
//! evaluates it exactly (a tridiagonal determinant ratio), through series
//! approximations in the high- and low-SNR regimes, and statistically via
//! simulation. It also covers the worst-case VoI distribution when updates
//! flow through a FCFS M/M/1 queue. All information quantities are in nats.

pub mod approx;
pub mod error;
pub mod gauss_markov;
pub mod linalg;
pub mod montecarlo;
pub mod quad;
pub mod queue_mm1;
pub mod rng;
pub mod tridiag;
pub mod voi_exact;
pub mod window;

pub use error::{Result, VoiError};
pub use gauss_markov::OuParams;
pub use queue_mm1::Mm1Params;
pub use voi_exact::{VoiValue, voi_closed_form, voi_oracle};
pub use window::{NoiseModel, ObservationWindow, Timeline};

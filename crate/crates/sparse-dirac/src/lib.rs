//! Spectral analysis of the half-line Dirac operator with sparse bump potentials.
//!
//! The system under study is the 2x2 first-order system
//!
//! ```text
//!   Psi' = [ 0        -q + 1 + lambda ]  Psi      on [0, inf)
//!          [ q + 1 - lambda        0  ]
//! ```
//!
//! with a boundary condition `Psi_1(0) sin eta + Psi_2(0) cos eta = 0` and a
//! potential `q` made of finitely many compactly supported bumps separated by
//! large gaps.  Outside the central gap `[-1, 1]` of the spectrum the natural
//! variable is the quasi-momentum `kappa = sign(lambda) sqrt(lambda^2 - 1)`.
//!
//! The crate provides:
//!
//! * [`potential`] - bump potentials (heights, unit-mass profiles, gap
//!   distances) and their JSON descriptor;
//! * [`odecore`] - transfer matrices across bump supports (fixed-step RK4
//!   with Richardson acceptance) and the analytic rectangular-bump oracle;
//! * [`pruefer`] - the generalized Pruefer transformation adapted to the
//!   Dirac dispersion and exact/numeric propagation of `(R, theta)`;
//! * [`coefficients`] - the per-bump oscillation coefficients `A, B, C`, the
//!   density factor `f = 1/(A + B cos 2y + C sin 2y)`, its averages, and the
//!   small-height asymptotics;
//! * [`spectral`] - the spectral density along two independent routes
//!   (oscillation-factor product vs direct radius propagation), interval
//!   measures, and eigenvalue counting for the regular problem on `[0, b]`;
//! * [`construction`] - the inductive choice of bump distances that keeps
//!   successive spectral measures close while their super-level sets shrink,
//!   plus the no-point-spectrum growth certificate;
//! * [`angular`] - the angular-momentum channel `k != 0`: position-dependent
//!   mass and drift, half-integer Bessel solutions, decay bounds, the
//!   k-channel density and the Green-kernel Hilbert-Schmidt diagnostic;
//! * [`cli`] - config-driven experiment pipelines emitting CSV/JSON.

pub mod angular;
pub mod cli;
pub mod coefficients;
pub mod construction;
pub mod odecore;
pub mod potential;
pub mod pruefer;
pub mod quad;
pub mod spectral;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

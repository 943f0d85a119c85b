//! Interacting-particle laboratory for multi-valued McKean–Vlasov SDEs with jumps.
//!
//! The crate simulates
//!
//! ```text
//! dX_t ∈ −A(X_t)dt + b(t, X_t, L(X_t))dt + σ(t, X_t, L(X_t))dB_t
//!        + ∫_{U₀} f(t, X_{t−}, L(X_t), u) Ñ(dt, du)
//! ```
//!
//! with `A` a maximal monotone operator, replacing the law `L(X_t)` by the
//! empirical measure of `N` particles. On top of the solver sit the
//! diagnostics: a coupled averaging-principle harness, an Itô-formula
//! residual for the mean-field generator, Bihari envelopes, and the
//! mean-square / ultimate-boundedness / almost-sure stability checks.
//!
//! Module map:
//!
//! - [`monotone`]: operator catalog, resolvents, Yosida approximation, projections
//! - [`noise`]: counter-based Brownian and Poisson streams
//! - [`coefficients`]: coefficient catalog, moduli, averaging-condition estimators
//! - [`measure`]: empirical measures and distance bounds
//! - [`solver`]: resolvent-split particle scheme and coupled runs
//! - [`calculus`]: mean-field generator, Itô residual, Bihari bound
//! - [`stability`]: decay fits and stability verdicts
//! - [`experiments`]: configuration, orchestration, CSV output

pub mod calculus;
pub mod coefficients;
pub mod experiments;
pub mod measure;
pub mod monotone;
pub mod noise;
pub mod quadrature;
pub mod solver;
pub mod stability;
pub mod stats;
pub mod vecops;

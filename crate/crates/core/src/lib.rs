//! Structured-grid laboratory for the compressible viscoelastic system
//!
//! ```text
//! ϱ_t + div(ϱu) = 0
//! (ϱu)_t + div(ϱu⊗u) − μΔu − (μ+λ)∇div u + ∇P(ϱ) = div(ϱFFᵀ)
//! F_t + u·∇F = ∇u F
//! ```
//!
//! with solvers for the full and perturbation forms, diagnostics for the
//! identities the system propagates, a manufactured-solution harness and a
//! command-line driver.

pub mod cli;
pub mod compat;
pub mod dynamics;
pub mod fields;
pub mod mms;
pub mod operators;
pub mod par;

//! Numerical toolkit for two bucket-brigade QRAM architectures built from
//! high-coherence superconducting cavities: one routing with cavity-controlled
//! CSWAP gates, the other with giant unidirectional emitters (GUEs) on a
//! waveguide. The crate covers the stack from pulse-level gate channels
//! (Lindblad dynamics over truncated Fock spaces) through post-selected
//! process fidelities up to full-query resource counts and success rates,
//! for both single-rail and dual-rail bosonic encodings.
//!
//! Layout:
//! - [`fock`]: truncated multimode bosonic bases, sparse operators, states.
//! - [`gates`]: analytic gate unitaries and pulse schedules (beamsplitter,
//!   joint parity, ZZ, CZ, C0SWAP/C1SWAP, data copy).
//! - [`noise`]: coherence-time parameter sets, jump operators, and the
//!   Lindblad master-equation integrator.
//! - [`czfid`]: post-selected CZ process-fidelity pipeline (single and dual
//!   rail) and coherence-time scaling sweeps.
//! - [`gue`]: pitch-and-catch state transfer between GUEs, from pulse design
//!   to the cascaded three-GUE master equation.
//! - [`waveguide_io`]: input-output scattering of single-photon packets by an
//!   inactive GUE (pass-through, reflection, absorption, Wigner delay).
//! - [`query`]: closed-form resource counts, query-infidelity bounds, and
//!   success-rate metrics for all four architecture variants.
//! - [`circuit`]: explicit bucket-brigade query circuits at small n with a
//!   brute-force oracle.
//! - [`cli`]: batch experiment front end (config, CSV/JSON emission).

pub mod error;
pub mod linalg;

pub mod fock;
pub mod gates;
pub mod noise;

pub mod czfid;
pub mod gue;
pub mod waveguide_io;

pub mod circuit;
pub mod query;

pub mod cli;

pub use error::{Error, Result};

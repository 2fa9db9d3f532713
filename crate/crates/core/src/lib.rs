//! Phase-space dynamics of non-Hermitian oscillator Hamiltonians.
//!
//! The crate has two complementary evolution pipelines for the Husimi
//! distribution `Q(z) = |⟨z|ψ⟩|²` of a state under a normal-ordered
//! polynomial Hamiltonian `K = Σ K_mn (a†)^m a^n`:
//!
//! - **semiclassical** ([`classical_flow`]): the first-order transport
//!   `Q(z, t) = Q₀(ζ₀(z, t)) · w(z, t)` obtained by tracing each phase-space
//!   point backwards along the characteristics `ζ̇ = -i ∂K*/∂ζ*` while
//!   accumulating the norm-landscape exponent `log w = 2∫Γ ds`;
//! - **quantum** ([`quantum_flow`]): the non-unitary Schrödinger equation
//!   `i ψ̇ = K ψ` integrated in a truncated number basis, exact up to
//!   truncation.
//!
//! The two agree identically whenever `K` is bilinear in the ladder
//! operators; for higher-degree polynomials the semiclassical field is a
//! short-time approximation whose deviation the tooling reports.
//!
//! Core math is generic over the scalar type via [`scalar::Real`]; the
//! `*64` aliases below fix `f64`, which is what the binary field format and
//! the CLI use.

pub mod classical_flow;
pub mod grid_io;
pub mod hamiltonian;
pub mod quantum_flow;
pub mod scalar;
pub mod states;

pub use hamiltonian::{FlowField, FockMatrix, Hamiltonian, PhasePoint};
pub use scalar::Real;

/// `f64`-precision aliases for the main domain types.
pub type Hamiltonian64 = hamiltonian::Hamiltonian<f64>;
pub type PhasePoint64 = hamiltonian::PhasePoint<f64>;
pub type FockState64 = states::FockState<f64>;
pub type PhaseGrid64 = grid_io::PhaseGrid<f64>;
pub type ScalarField64 = grid_io::ScalarField<f64>;
pub type Trajectory64 = classical_flow::Trajectory<f64>;

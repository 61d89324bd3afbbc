//! Zero-knowledge identification protocol suite.
//!
//! Seven interactive identification protocols built on three algebraic
//! settings: quadratic residues, Fiat–Shamir and Guillou–Quisquater over an
//! RSA-style composite modulus, Schnorr over a prime-order subgroup, and
//! three elliptic-curve variants (a square-root scheme over a composite
//! ring, a discrete-log bit-challenge scheme, and a two-generator Schnorr
//! scheme). Every protocol runs as a commit / challenge / respond / check
//! state machine over a framed wire format with a metered in-process
//! channel, which is what the benchmark harness measures.
//!
//! The square-root scheme over a composite ring is deliberately breakable:
//! [`protocols::attack`] implements the malicious-verifier recovery of the
//! secret point at desk scale.

pub mod bench;
pub mod ecc;
pub mod keyfile;
pub mod numtheory;
pub mod protocols;
pub mod wire;

pub use numtheory::MulCounter;

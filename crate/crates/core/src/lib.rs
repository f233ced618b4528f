//! Randomised rank-1 lattice rules in weighted Korobov spaces.
//!
//! The central object is a fixed generating vector stored as residues modulo
//! every prime in `(n/2, n]`. Drawing a prime at random and applying the
//! rule with the matching residues gives the random-prime fixed-vector
//! algorithm; this crate constructs such vectors, evaluates their exact
//! randomised error and runs the online algorithms.

pub mod cbc;
pub mod conv;
pub mod errors;
pub mod eval;
pub mod num;
pub mod oracle;
pub mod par;
pub mod primes;
pub mod rpfv;
pub mod runtime;
pub mod study;
pub mod verify;
pub mod ties;

pub use errors::{Error, Result};

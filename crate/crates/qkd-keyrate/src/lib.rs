//! Finite-size secure key lengths for prepare-and-measure QKD protocols.
//!
//! The crate computes reliable lower bounds on the extractable key length of
//! qubit and decoy-state protocols under IID collective attacks, with
//! variable-length and postselection (coherent-attack) extensions:
//!
//! * [`quantum`] — Hermitian operator algebra, Kraus channels and the
//!   conditional-entropy objective with its gradient.
//! * [`stats`] — binomial concentration machinery: variational bounds,
//!   Clopper-Pearson radii and Gaussian (Zubkov-Serov) bounds that stay
//!   finite for security parameters as small as 1e-3000.
//! * [`decoy`] — photon-number statistics of WCP sources and the
//!   yield-bounding linear programs / SDP.
//! * [`entropy_opt`] — certified minimization of the entropy objective over
//!   convex feasible sets (Frank-Wolfe descent plus a linearized conic
//!   certificate).
//! * [`keyrate`] — key-length formulas, epsilon-budget optimizer, expected
//!   key-rate bounds and the postselection lift.
//! * [`protocols`] — concrete protocol definitions (qubit BB84, decoy BB84,
//!   decoy 4-6) and honest-channel simulation.
//! * [`driver`] — scenario configs, sweeps, Monte-Carlo validation and
//!   tabular output backing the CLI.
//!
//! Run `cargo run --release -- sweep --config cfg.toml` for the batch tool,
//! or see `examples/` for one runnable program per capability.

extern crate openblas_src;

pub mod decoy;
pub mod driver;
pub mod entropy_opt;
mod error;
pub mod keyrate;
pub mod protocols;
pub mod quantum;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};

use std::fmt;

/// Announcement alphabet entry: a fine-grained test observation, the sifted
/// key-generation event, or the discarded remainder of generation rounds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Label {
    /// Test-round observation `(a, b)`, with the intensity-setting index for
    /// decoy protocols.
    Test {
        alice: u8,
        bob: u8,
        setting: Option<u8>,
    },
    /// Generation round that survived sifting.
    Sift,
    /// Generation round that was discarded (no detection or basis mismatch).
    Discard,
}

impl Label {
    pub fn test(alice: usize, bob: usize) -> Self {
        Label::Test {
            alice: alice as u8,
            bob: bob as u8,
            setting: None,
        }
    }

    pub fn test_mu(alice: usize, bob: usize, setting: usize) -> Self {
        Label::Test {
            alice: alice as u8,
            bob: bob as u8,
            setting: Some(setting as u8),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Test {
                alice,
                bob,
                setting: None,
            } => write!(f, "a{alice}:b{bob}"),
            Label::Test {
                alice,
                bob,
                setting: Some(s),
            } => write!(f, "a{alice}:b{bob}:mu{s}"),
            Label::Sift => write!(f, "sift"),
            Label::Discard => write!(f, "perp"),
        }
    }
}

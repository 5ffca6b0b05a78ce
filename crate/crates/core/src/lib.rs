//! Numerical core of the mini-car autopilot: a small reverse-mode tensor
//! engine ([`nn`]) and the policy architectures trained on top of it
//! ([`zoo`]).

pub mod command;
pub mod nn;
pub mod zoo;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use command::ControlCommand;

//! Session service and command-line driver for the gradleak simulator.
//!
//! The [`api`] module exposes sessions over HTTP/JSON; [`experiment`] runs
//! configurations headlessly for the CLI's `simulate` and `sweep` commands.

pub mod api;
pub mod cli;
pub mod experiment;
pub mod store;

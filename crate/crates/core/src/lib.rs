//! Forensic analysis of Bitcoin-based Ponzi schemes.
//!
//! The pipeline runs roughly in module order: [`coredata`] loads and validates
//! inputs, [`harvest`] builds a member roster from local corpora, [`txclass`]
//! types and cleans transactions, [`metrics`] and [`phases`] quantify the
//! scheme's operation and lifecycle, [`classify`] separates victims from likely
//! scammers, and [`flows`] traces money to services and countries. [`simgen`]
//! generates synthetic schemes with known ground truth.

pub mod classify;
pub mod coredata;
pub mod error;
pub mod flows;
pub mod harvest;
pub mod metrics;
pub mod phases;
pub mod simgen;
pub mod txclass;

pub use error::{Error, Result};

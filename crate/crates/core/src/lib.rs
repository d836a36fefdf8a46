//! Bochner–Martinelli residue currents of monomial mappings: exact cone
//! analysis, the structure formula, evaluation on separable test forms and
//! definition-level numerical oracles.

pub mod cone;
pub mod error;
pub mod evaluator;
pub mod gamma;
pub mod linalg;
pub mod mb;
pub mod oracle;
pub mod profile;
pub mod quad;
pub mod structure;
pub mod testform;

pub use error::{Error, Result};

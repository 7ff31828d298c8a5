//! Chase-based reasoning over tuple- and equality-generating dependencies:
//! parsing, guardedness analysis, oblivious and restricted chase, cloud-based
//! blocked saturation, conjunctive query answering, acyclicity tools and EGD
//! separation checks.

pub mod analysis;
pub mod chase;
pub mod hom;
pub mod model;
pub mod parser;
pub mod clouds;
pub mod query;
pub mod acyclic;
pub mod egd_sep;
pub mod rulesets;

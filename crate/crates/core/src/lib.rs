//! Minimal-change repair of Kripke models against CTL properties.

pub mod checker;
pub mod cli;
pub mod diff;
pub mod formula;
pub mod kripke;
pub mod oracle;
pub mod update;

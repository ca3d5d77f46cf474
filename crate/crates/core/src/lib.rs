pub mod config;
pub mod coulomb;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod initial;
pub mod regularity;
pub mod run;
pub mod scheme;
pub mod snapshot;
pub mod verify;

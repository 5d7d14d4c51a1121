pub mod basis;
pub mod commands;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod experiments;
pub mod frame;
pub mod lattice;
pub mod operators;
pub mod selfcheck;
pub use error::{Error, Result};

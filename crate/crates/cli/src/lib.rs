//! Library side of the `semhash` command: configuration and stage commands.

pub mod commands;
pub mod config;

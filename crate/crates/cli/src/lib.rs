//! Command-line front end: JSON configurations, the `verify`, `solve`, `hierarchy` and
//! `selftest` commands, and a small expression language for user-supplied functions.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;

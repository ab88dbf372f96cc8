//! Independent checks of the fast paths and the acceptance suite.

pub mod brute;
pub mod suite;

//! Oracles and generators shared by the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

pub mod adjudication;
pub mod corpus;

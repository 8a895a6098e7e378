#![allow(dead_code)]

pub mod equivalence;
pub mod gradient_suite;
pub mod invariant_suite;
pub mod oracles;

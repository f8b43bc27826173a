//! Front-ends that compile QBF formulas and perfect channel systems into TSO
//! game programs, with brute-force oracles and honest-play script generation.

pub mod pcs;
pub mod qbf;

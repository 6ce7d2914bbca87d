//! Exact symbolic machinery for Lie pairs: Fedosov dg-manifolds, the PBW
//! isomorphism, and perturbed contractions for polyvector fields and
//! polydifferential operators, all over the rationals.

pub mod coeffs;
pub mod dpoly;
pub mod corpus;
pub mod forms;
pub mod liepair;
pub mod linalg;
pub mod tpoly;
pub mod fedosov;
pub mod uea;

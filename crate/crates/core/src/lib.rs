pub mod equilibria;
pub mod grid;
pub mod rng;
pub mod solver;
pub mod macroscopics;
pub mod functionals;
pub mod harness;

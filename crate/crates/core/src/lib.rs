pub mod field;
pub mod rng;
pub mod graph;
pub mod commitment;
pub mod bounds;
pub mod spacetime;
pub mod protocol;
pub mod zksim;

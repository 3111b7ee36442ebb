pub mod factor;
pub mod optim;
pub mod problems;
pub mod rng;
pub mod runner;
pub mod schedule;
pub mod tensor;

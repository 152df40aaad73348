pub mod cli;
pub mod estimator;
pub mod linalg;
pub mod normal;
pub mod simulation;
pub mod structure;
pub mod tiger;

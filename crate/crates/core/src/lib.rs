pub mod bench;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod scoring;
pub mod search;
pub mod synthgen;

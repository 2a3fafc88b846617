pub mod driver;
pub mod dsl;
pub mod emit;
pub mod engine;
pub mod algebra;
pub mod counters;
pub mod interp;
pub mod machine;
pub mod model;
pub mod strategies;

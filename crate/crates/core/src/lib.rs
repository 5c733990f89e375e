pub mod decoder;
pub mod evaluation;
pub mod model;
pub mod pointing;
pub mod synth;
pub mod training;
pub mod treebank;
pub mod verification;

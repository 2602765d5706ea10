pub mod corpus;
pub mod eval;
pub mod model;
pub mod pipeline;
pub mod tokenize;

pub mod agent;
pub mod coordinator;
pub mod env;
pub mod harness;
pub mod llm;
pub mod solvers;

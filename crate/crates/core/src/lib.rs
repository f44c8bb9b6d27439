//! Data-preparation pipeline search: a tabular Q-learning agent over a fixed
//! operator vocabulary, optionally steered by an external pipeline advisor.

pub mod advisor;
pub mod agent;
pub mod config;
pub mod data;
pub mod distill;
pub mod evaluator;
pub mod operators;
pub mod pool;
pub mod search;
pub mod trigger;

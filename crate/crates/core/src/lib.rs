//! Symbolic reward machines with learnable holes.

pub mod assets;
pub mod constraints;
pub mod dsl;
pub mod gridworld;
pub mod inference;
pub mod optim;
pub mod policy;
pub mod reward_model;
pub mod srm;

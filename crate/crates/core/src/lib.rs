pub mod curiosity;
pub mod envs;
pub mod hierarchy;
pub mod hindsight;
pub mod numeric;
pub mod policy;
pub mod runner;

//! Grasp planning and shared-control primitives for hemisphere-guided
//! grasping.

pub mod geometry;
pub mod control;
pub mod gjk;
pub mod hand;
pub mod hull;
pub mod lp;
pub mod planner;
pub mod quality;
pub mod sim;

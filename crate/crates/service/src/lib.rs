//! Session service, trial log and benchmark harness around the grasp
//! planner.

pub mod bench;
pub mod engine;
pub mod protocol;
pub mod record;
pub mod server;

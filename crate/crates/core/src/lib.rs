//! Multi-year N-1 secure AC transmission expansion planning.

pub mod cases;
pub mod contingency;
pub mod dispatch;
pub mod lp;
pub mod mabc;
pub mod network;
pub mod planner;
pub mod powerflow;

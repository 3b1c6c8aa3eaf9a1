//! Co-optimization of planar parallel-jaw gripper surfaces and the grasp
//! configuration of every object they must hold.

pub mod alm;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod postprocess;
pub mod problem;
pub mod qp;
pub mod render;
pub mod shape;
pub mod stability;

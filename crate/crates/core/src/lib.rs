//! Box-world navigation environment.
//!
//! - [`world`]: static geometry, ray/box queries, occupancy baking
//! - [`sim`]: agent kinematics, reward, episodes, spawn curriculum
//! - [`obs`]: network observations
//! - [`env`]: simulator instance wrapping the above
//! - [`navmesh`]: NavMesh + ability links + A* baseline

pub mod env;
pub mod navmesh;
pub mod obs;
pub mod sim;
pub mod world;

pub use glam::DVec3;

//! Numerical plumbing shared by the physics modules.

pub mod dd;
pub mod quad;
pub mod roots;

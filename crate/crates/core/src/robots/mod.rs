//! Shipped robot models.

pub mod diamond;
pub mod rrr3;

pub use diamond::{Diamond, DiamondGeometry, DiamondPose};
pub use rrr3::{Branch, Rrr3, Rrr3Geometry, Rrr3Pose};

//! Core library for building interactive digital items (IDIs) from scanned
//! triangle meshes.
//!
//! The pipeline mirrors how an item is authored:
//!
//! 1. [`mesh`] imports and measures the scanned geometry.
//! 2. [`slicer`] and [`spectral`] split it into segments, by hand-placed
//!    planes or automatically.
//! 3. [`physics`] binds segments with one of six joint types and simulates
//!    them with gravity, damping and fingertip touches.
//! 4. [`widgets`] and [`content`] reconstruct the interface and attach media.
//! 5. [`scene`] holds everything together, [`format`] persists it and
//!    [`harness`] replays scripted interactions deterministically.
//!
//! All lengths are meters; the world is Y-up and right-handed.

pub mod content;
pub mod demo;
mod error;
pub mod format;
pub mod harness;
pub mod ids;
pub mod mesh;
pub mod physics;
pub mod scene;
pub mod slicer;
pub mod spectral;
mod util;
pub mod widgets;

pub use error::{Error, ErrorClass};
pub use ids::{ContentId, JointId, SegmentId, WidgetId};
pub use mesh::{MeshStats, TriMesh};
pub use scene::IdiScene;

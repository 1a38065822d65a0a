//! Labeling engine for RGB point-cloud sequences.
//!
//! A frame is a [`PointCloud`]; labels live in index-aligned
//! [`LabelMask`]s. Labels brushed onto one frame are carried to the next by
//! registering each labeled subset with ICP ([`registration::icp`]) and
//! transferring labels to the nearest points of the next frame
//! ([`propagation::propagate_labels`]). [`session::Session`] wraps this in
//! an editable, undoable, persisted labeling session.

pub mod cache;
pub mod error;
pub mod format;
pub mod geometry;
pub mod kdtree;
pub mod propagation;
pub mod registration;
pub mod sequence;
pub mod session;
pub mod synthetic;

pub use error::{Error, Result};
pub use format::{LabelId, LabelMask, UNLABELED};
pub use geometry::{centroid, Point, PointCloud, RigidTransform, Rgb, Vec3};
pub use kdtree::{KdTree, Neighbor};
pub use registration::{icp, CorrespondenceMode, IcpParams, IcpResult};
pub use sequence::FrameSequence;
pub use propagation::{propagate_labels, propagate_sequence, PropagationParams, PropagationReport};
pub use session::{select_sphere, LabelPalette, PaletteEntry, Session};

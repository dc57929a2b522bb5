//! Graph neural networks that score how acceptable a mobile robot's motion is
//! to the humans around it.
//!
//! The pipeline runs from recorded scenarios ([`scene`]) through the temporal
//! scene graph ([`graph`]), a small reverse-mode autodiff engine ([`tensor`]),
//! the message-passing blocks ([`gnn`]), training and evaluation
//! ([`training`]), agreement statistics ([`analysis`]) and robot-position
//! heatmaps ([`heatmap`]).

pub mod analysis;
pub mod geometry;
pub mod gnn;
pub mod graph;
pub mod heatmap;
pub mod scene;
pub mod tensor;
pub mod training;

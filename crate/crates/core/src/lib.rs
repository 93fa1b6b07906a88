//! Evolving superformula surfaces and the viewing angles they are rendered from.
//!
//! The pipeline is generate → render → score → evolve:
//!
//! * [`geometry`] evaluates the superformula, lifts two instances into a 3D
//!   spherical-product surface and tessellates it into a [`TriangleMesh`].
//! * [`render`] rasterizes a mesh from a camera placed by elevation, azimuth
//!   and roll into a fixed-size [`ImageBuffer`].
//! * [`scoring`] turns images into [`Fitness`] values (analytic objectives, a
//!   remote neural scorer, or novelty against an archive).
//! * [`evolve`] runs the 15-gene genetic algorithm over shape and view genes.
//! * [`checkpoint`] serializes generation records as JSON lines for resume.

pub mod checkpoint;
pub mod evolve;
pub mod geometry;
pub mod render;
pub mod scoring;

pub use evolve::{GaConfig, GeneBounds, GenerationRecord, Genome};
pub use geometry::{SuperformulaParams, TriangleMesh};
pub use render::{ImageBuffer, RenderConfig, ViewAngles};
pub use scoring::{Fitness, NoveltyArchive, Scorer};

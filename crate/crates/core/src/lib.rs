//! Tooling for screen-based subjective quality experiments on point clouds
//! and meshes.
//!
//! - [`asset_io`]: PLY/OBJ parsing, size normalization and geometry packing.
//! - [`session`]: experiment configuration, seeded playlists with trapping
//!   samples, the advisory trial timer and the crash-safe judgment journal.
//! - [`analysis`]: subject screening, MOS tables, agreement metrics and a
//!   simulated-rater harness.
//! - [`service`]: the HTTP/WebSocket host that drives a participant session.
//! - [`cli`]: the `qoe3d` command surface.

pub mod asset_io;
pub mod session;
pub mod analysis;
pub mod service;
pub mod cli;

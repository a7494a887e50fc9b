//! Protocol-level building blocks for HTTP-Burst.
//!
//! * [`model`] evaluates the closed-form efficiency and delay formulas for
//!   plain GET page loads versus BURST page loads.
//! * [`wire`] is the byte-exact codec for GET and BURST messages.
//! * [`html_extract`] pulls the inlined-object references out of an HTML page.
//!
//! Everything here is synchronous and free of I/O; the server and client
//! crates drive it over tokio sockets.

pub mod html_extract;
pub mod model;
pub mod wire;

pub use html_extract::{extract_manifest, extract_manifest_for_origin, resolve_ref, PageManifest};
pub use wire::{BurstPart, BurstRequest, BurstResponse, ObjectRef, WireError};

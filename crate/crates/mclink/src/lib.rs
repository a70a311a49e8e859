//! Simulator and design toolkit for chemical-reaction-based microfluidic
//! molecular-communication links.
//!
//! The crate provides:
//!
//! * closed-form concentration responses for straight channels under
//!   convection, diffusion and bimolecular reaction ([`transport`]),
//! * a numerical inverse-Laplace (Gil-Pelaez) evaluation of the thresholded
//!   Gaussian response ([`threshold`]),
//! * an independent finite-difference PDE oracle used to validate every
//!   analytical operation ([`oracle`]),
//! * transmitter / receiver composition and the associated design searches
//!   ([`transmitter`], [`receiver`]),
//! * an end-to-end link runner and a scenario-file front end
//!   ([`link`], [`scenario`]).
//!
//! All physical quantities are SI: metres, seconds, mol/m³.

pub mod error;
pub mod fluidics;
pub mod link;
pub mod oracle;
pub mod receiver;
pub mod scenario;
pub mod threshold;
pub mod transmitter;
pub mod transport;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ChannelGeometry, FlowEnv, GaussPulse, ReactionSpec, RectPulse, Source, TimeSeries,
};

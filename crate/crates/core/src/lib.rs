//! Synthetic tactile press videos and a convolutional-recurrent hardness
//! regressor.
//!
//! The simulator side ([`mechanics`], [`render`], [`simcam`]) turns a sample
//! shape and its Shore 00 hardness into a video of the gel being pressed.
//! [`pipeline`] reduces a video to a fixed five-frame clip, [`net`] maps the
//! clip to per-frame hardness estimates and [`traineval`] trains and scores
//! the network. [`dataset`] and [`cli`] handle the on-disk layout.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod mechanics;
pub mod net;
pub mod render;
pub mod pipeline;
pub mod simcam;
pub mod traineval;

pub use config::Config;

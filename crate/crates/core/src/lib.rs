//! Soil moisture from UWB impulse radar and buried backscatter tags.
//!
//! A tag buried at a known depth toggles its antenna at a fixed rate. The
//! radar sees it in the range-Doppler image at that rate, separated from
//! the static clutter of the soil. Soil slows the wave, so the tag shows up
//! farther away than its geometric distance, and the excess travel time
//! gives the soil's apparent dielectric constant and from it the volumetric
//! water content.
//!
//! The crate covers both directions: [`scenario::simulate`] synthesizes
//! captures of buried tags in layered soil, and [`moisture::estimate_vwc`]
//! recovers moisture from a capture.

pub mod capture;
pub mod dsp;
pub mod error;
pub mod moisture;
pub mod radar;
pub mod scenario;
pub mod soil;
pub mod sweep;
pub mod tag;

pub use error::{Error, Result};

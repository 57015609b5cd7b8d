//! Benchmark harness for full-body pose reconstruction from sparse headset
//! tracking plus camera-derived joint positions, under controlled stream
//! artifacts (noise, occlusion, reduced frame rate, delay).

pub mod degrade;
pub mod error;
pub mod metrics;
pub mod mocap_io;
pub mod reconstruct;
pub mod seeding;
pub mod sensor_sim;
pub mod skeleton;
pub mod sync;
pub mod synth;

pub use error::{Error, Result};

//! Illumination-aware spacecraft inspection: relative-motion dynamics, chief
//! surface visibility and lighting, an episodic environment, a PPO
//! actor-critic trainer and an IQM-based evaluation harness.

pub mod baseline;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod illumination;
pub mod policy;

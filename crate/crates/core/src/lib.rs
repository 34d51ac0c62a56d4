//! Partial least squares path modeling with a two-step estimator for cyclic
//! (feedback) effects between constructs.

pub mod assessment;
pub mod cyclic;
pub mod dataset;
pub mod modelspec;
pub mod moments;
pub mod plscore;
pub mod report;
pub mod resample;
pub mod simgen;

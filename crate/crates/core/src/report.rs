//! Verification reports shared by every check in the crate.

use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Outcome of one named check.
///
/// `worst_violation` is the smallest observed margin: negative values mean the
/// checked inequality failed by that amount. A check passes iff it saw at
/// least one sample and `worst_violation >= -tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub location: Vec<f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub wall_time_ms: f64,
}

impl VerificationReport {
    /// Single-value report, for scalar facts such as `Ψ(1) > 29/28`.
    pub fn from_margin(name: impl Into<String>, margin: f64, location: Vec<f64>, tolerance: f64) -> Self {
        let mut tracker = MarginTracker::new(name);
        tracker.observe(margin, &location);
        tracker.finish(tolerance)
    }
}

/// Accumulates the worst margin of a sweep.
#[derive(Debug, Clone)]
pub struct MarginTracker {
    name: String,
    worst: f64,
    location: Vec<f64>,
    samples: usize,
    started: Instant,
}

impl MarginTracker {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            worst: f64::INFINITY,
            location: Vec::new(),
            samples: 0,
            started: Instant::now(),
        }
    }

    #[inline]
    pub fn observe(&mut self, margin: f64, location: &[f64]) {
        self.samples += 1;
        // NaN margins count as failures
        if margin < self.worst || margin.is_nan() && !self.worst.is_nan() {
            self.worst = margin;
            self.location.clear();
            self.location.extend_from_slice(location);
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn worst(&self) -> f64 {
        self.worst
    }

    pub fn finish(self, tolerance: f64) -> VerificationReport {
        let worst = if self.samples == 0 { 0.0 } else { self.worst };
        VerificationReport {
            passed: self.samples > 0 && worst >= -tolerance,
            name: self.name,
            worst_violation: worst,
            location: self.location,
            tolerance,
            samples: self.samples,
            wall_time_ms: self.started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

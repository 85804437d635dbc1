//! Batch runner for the smallcap experiments: JSON configuration, seeded
//! execution, `results.json` / `results.dat` artifacts and reproduction.

pub mod config;
pub mod experiments;
pub mod run;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const THRESHOLD_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
}

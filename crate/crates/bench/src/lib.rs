//! Shared fixtures for the criterion benches.

use mixop_core::{Domain, JumpKernel, PathConfig};

pub fn unit_disk() -> Domain {
    Domain::ball(vec![0.0, 0.0], 1.0).expect("valid disk")
}

pub fn unit_interval() -> Domain {
    Domain::interval(-1.0, 1.0).expect("valid interval")
}

/// Zero-jump and `s = 1/2` fractional kernels in dimension `d`.
pub fn kernels(d: usize) -> [(&'static str, JumpKernel); 2] {
    [
        ("zero", JumpKernel::zero(d).expect("zero kernel")),
        (
            "fractional",
            JumpKernel::fractional(0.5, d).expect("fractional kernel"),
        ),
    ]
}

pub fn path_config() -> PathConfig {
    PathConfig::new(1e-3, 10.0, 7).with_bridge(true)
}

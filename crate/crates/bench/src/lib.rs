//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use lpkin_core::kernel::{AngularKernel, CollisionKernel, SymmetrizedKernel};
use lpkin_core::state::{mixture, Distribution, MaxwellianParams, VelocityGrid};

/// Hard spheres with the uniform angular kernel in 2D.
pub fn hard_spheres() -> SymmetrizedKernel {
    CollisionKernel::new(1.0, AngularKernel::constant(1.0 / (2.0 * PI)), 2)
        .unwrap()
        .symmetrize()
}

pub fn singular(nu: f64) -> SymmetrizedKernel {
    CollisionKernel::new(1.0, AngularKernel::singular(1.0, nu), 2)
        .unwrap()
        .symmetrize()
}

/// Two drifting Maxwellians on an `n × n` grid of half-width 6.
pub fn bimodal(n: usize) -> Distribution {
    let grid = VelocityGrid::new(2, n, 6.0).unwrap();
    mixture(
        grid,
        &[
            MaxwellianParams {
                rho: 0.6,
                drift: vec![1.0, 0.0],
                temperature: 0.6,
            },
            MaxwellianParams {
                rho: 0.4,
                drift: vec![-1.0, 0.5],
                temperature: 0.9,
            },
        ],
    )
    .unwrap()
}

//! Velocity grids, distributions and their scalar diagnostics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::AngularKernel;

/// Cell-centred uniform tensor grid on `[-R, R]^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub dim: usize,
    pub n: usize,
    pub radius: f64,
}

impl VelocityGrid {
    pub fn new(dim: usize, n: usize, radius: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(invalid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(invalid(format!(
                "points per axis must be even and ≥ 8, got {n}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!(
                "truncation radius must be positive, got {radius}"
            )));
        }
        Ok(VelocityGrid { dim, n, radius })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node coordinates along one axis.
    pub fn axis(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n)
            .map(|i| -self.radius + (i as f64 + 0.5) * h)
            .collect()
    }

    /// Coordinates of node `idx` (row-major, last axis fastest).
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let h = self.h();
        let mut v = vec![0.0; self.dim];
        let mut r = idx;
        for a in (0..self.dim).rev() {
            v[a] = -self.radius + ((r % self.n) as f64 + 0.5) * h;
            r /= self.n;
        }
        v
    }

    pub fn points<const D: usize>(&self) -> Vec<[f64; D]> {
        assert_eq!(D, self.dim, "grid dimension mismatch");
        (0..self.len())
            .map(|i| {
                let v = self.node(i);
                std::array::from_fn(|a| v[a])
            })
            .collect()
    }

    /// `|v_i|²` for every node.
    pub fn squared_norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.node(i).iter().map(|x| x * x).sum())
            .collect()
    }
}

/// Nonnegative density sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub grid: VelocityGrid,
    pub values: Vec<f64>,
}

impl Distribution {
    pub fn new(grid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(invalid(format!(
                "distribution values must be finite and nonnegative, found {x}"
            )));
        }
        Ok(Distribution { grid, values })
    }

    pub fn zeros(grid: VelocityGrid) -> Self {
        Distribution {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: VelocityGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Distribution::new(grid, values)
    }

    pub fn same_grid(&self, other: &Distribution) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, lambda: f64) -> Distribution {
        Distribution {
            grid: self.grid,
            values: self.values.iter().map(|x| lambda * x).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn momentum(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.grid.dim];
        for (i, &f) in self.values.iter().enumerate() {
            if f != 0.0 {
                for (a, x) in self.grid.node(i).into_iter().enumerate() {
                    m[a] += f * x;
                }
            }
        }
        let vol = self.grid.cell_volume();
        m.iter().map(|x| x * vol).collect()
    }

    /// `∫ f |v|² dv`.
    pub fn energy(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.squared_norms())
            .map(|(f, v2)| f * v2)
            .sum();
        s * self.grid.cell_volume()
    }
}

/// Exponents of the weighted norm `‖f‖_{L^p_q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub p: f64,
    pub q: f64,
}

impl NormSpec {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let s = NormSpec { p, q };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(invalid(format!(
                "norm exponent p must exceed 1, got {}",
                self.p
            )));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(invalid(format!(
                "weight exponent q must be nonnegative, got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn pq(&self) -> f64 {
        self.p * self.q
    }

    /// Weight condition tying `pq` to the angular singularity:
    /// `pq ≥ 2` when `ν ∈ (-2,-1]`, `pq ≥ 4` when `ν ∈ (-3,-2]`.
    pub fn check_compatible(&self, angular: &AngularKernel) -> Result<()> {
        let Some(nu) = angular.nu() else {
            return Ok(());
        };
        let pq = self.pq();
        let slack = 1e-12;
        if nu > -2.0 && nu <= -1.0 && pq < 2.0 - slack {
            return Err(invalid(format!(
                "weight condition violated: ν = {nu} ∈ (-2,-1] requires pq ≥ 2, got pq = {pq}"
            )));
        }
        if nu <= -2.0 && pq < 4.0 - slack {
            return Err(invalid(format!(
                "weight condition violated: ν = {nu} ∈ (-3,-2] requires pq ≥ 4, got pq = {pq}"
            )));
        }
        Ok(())
    }
}

/// `(Σ_i |f_i|^p ⟨v_i⟩^{pq} h^N)^{1/p}`.
pub fn weighted_lp_norm(f: &Distribution, spec: NormSpec) -> f64 {
    lp_power(f, spec).powf(1.0 / spec.p)
}

/// `‖f‖^p_{L^p_q}`.
pub fn lp_power(f: &Distribution, spec: NormSpec) -> f64 {
    let e = 0.5 * spec.p * spec.q;
    let s: f64 = f
        .values
        .iter()
        .zip(f.grid.squared_norms())
        .filter(|(x, _)| **x != 0.0)
        .map(|(x, v2)| x.abs().powf(spec.p) * (1.0 + v2).powf(e))
        .sum();
    s * f.grid.cell_volume()
}

/// `Σ_i f_i ⟨v_i⟩^s h^N`.
pub fn l1_moment(f: &Distribution, s: f64) -> f64 {
    let e = 0.5 * s;
    let t: f64 = f
        .values
        .iter()
        .zip(f.grid.squared_norms())
        .map(|(x, v2)| x * (1.0 + v2).powf(e))
        .sum();
    t * f.grid.cell_volume()
}

/// `Σ_{f_i > 0} f_i log f_i h^N`.
pub fn entropy(f: &Distribution) -> f64 {
    let s: f64 = f
        .values
        .iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum();
    s * f.grid.cell_volume()
}

/// Parameters of one Maxwellian component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxwellianParams {
    pub rho: f64,
    pub drift: Vec<f64>,
    pub temperature: f64,
}

pub fn maxwellian(
    grid: VelocityGrid,
    rho: f64,
    drift: &[f64],
    temperature: f64,
) -> Result<Distribution> {
    if !(rho > 0.0) || !(temperature > 0.0) {
        return Err(invalid(format!(
            "Maxwellian needs rho > 0 and T > 0, got rho = {rho}, T = {temperature}"
        )));
    }
    if drift.len() != grid.dim {
        return Err(invalid(format!(
            "drift has {} components on a {}-dimensional grid",
            drift.len(),
            grid.dim
        )));
    }
    let norm = rho * (2.0 * PI * temperature).powf(-0.5 * grid.dim as f64);
    Distribution::from_fn(grid, |v| {
        let d2: f64 = v.iter().zip(drift).map(|(a, b)| (a - b) * (a - b)).sum();
        norm * (-d2 / (2.0 * temperature)).exp()
    })
}

pub fn mixture(grid: VelocityGrid, components: &[MaxwellianParams]) -> Result<Distribution> {
    let mut values = vec![0.0; grid.len()];
    for c in components {
        let m = maxwellian(grid, c.rho, &c.drift, c.temperature)?;
        for (a, b) in values.iter_mut().zip(m.values) {
            *a += b;
        }
    }
    Distribution::new(grid, values)
}

/// Convolution with a normalised Gaussian of standard deviation `width`,
/// applied axis by axis on the grid (mass outside the box is lost).
pub fn mollify(f: &Distribution, width: f64) -> Result<Distribution> {
    if width < 0.0 || !width.is_finite() {
        return Err(invalid(format!("mollifier width must be ≥ 0, got {width}")));
    }
    if width == 0.0 {
        return Ok(f.clone());
    }
    let n = f.grid.n;
    let h = f.grid.h();
    let kernel: Vec<f64> = (0..n)
        .map(|d| h * (-(d as f64 * h).powi(2) / (2.0 * width * width)).exp())
        .collect();
    let scale = 1.0 / (2.0 * PI).sqrt() / width;
    let mut values = f.values.clone();
    let dim = f.grid.dim;
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let mut out = vec![0.0; values.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let i = (idx / stride) % n;
            let base = idx - i * stride;
            let mut s = 0.0;
            for j in 0..n {
                s += kernel[i.abs_diff(j)] * values[base + j * stride];
            }
            *o = s * scale;
        }
        values = out;
    }
    Distribution::new(f.grid, values)
}

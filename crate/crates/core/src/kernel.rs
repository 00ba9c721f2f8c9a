//! Collision kernels `B(x, cos θ) = |x|^γ b(cos θ)`.
//!
//! The sphere measure is fixed once for the whole crate:
//! `dσ = (sin θ)^{N-2} dθ du` with `u` ranging over the unit sphere
//! `S^{N-2}` orthogonal to the polar axis. For `N = 2` that sphere is the
//! two-point set `{-1, +1}` with counting measure.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{GradedIntegral, Grading, ThetaRule};

/// Surface measure of the unit sphere `S^{d}` (`d = 0, 1, 2`).
pub fn sphere_measure(d: usize) -> f64 {
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => panic!("sphere S^{d} not supported"),
    }
}

/// Shape of the angular part `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AngularKind {
    /// `b ≡ c`.
    ConstantCutoff { c: f64 },
    /// Piecewise-linear `b` sampled at increasing values of `cos θ`;
    /// constant extrapolation beyond the samples.
    TableCutoff { cos: Vec<f64>, values: Vec<f64> },
    /// `b(y) = strength · (1-y)^{(-(N-2)+ν)/2}`.
    Singular { strength: f64, nu: f64 },
}

/// Angular kernel `b` restricted to a polar-angle interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularKernel {
    pub kind: AngularKind,
    /// Closed interval in `θ`, a subset of `[0, π]`.
    pub support: (f64, f64),
}

impl AngularKernel {
    pub fn new(kind: AngularKind) -> Result<Self> {
        let k = AngularKernel {
            kind,
            support: (0.0, PI),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn constant(c: f64) -> Self {
        AngularKernel {
            kind: AngularKind::ConstantCutoff { c },
            support: (0.0, PI),
        }
    }

    pub fn singular(strength: f64, nu: f64) -> Self {
        AngularKernel {
            kind: AngularKind::Singular { strength, nu },
            support: (0.0, PI),
        }
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (lo, hi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support;
        if !(0.0 <= lo && lo <= hi && hi <= PI) {
            return Err(invalid(format!(
                "angular support [{lo}, {hi}] not inside [0, π]"
            )));
        }
        match &self.kind {
            AngularKind::ConstantCutoff { c } if !(*c >= 0.0) => Err(invalid(format!(
                "constant kernel must be nonnegative, got {c}"
            ))),
            AngularKind::TableCutoff { cos, values } => {
                if cos.len() != values.len() || cos.len() < 2 {
                    return Err(invalid(
                        "kernel table needs at least two (cos, value) pairs",
                    ));
                }
                if cos.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(invalid(
                        "kernel table abscissae must be strictly increasing",
                    ));
                }
                if cos.iter().any(|y| !(-1.0..=1.0).contains(y)) {
                    return Err(invalid("kernel table abscissae must lie in [-1, 1]"));
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(invalid("kernel table values must be nonnegative"));
                }
                Ok(())
            }
            AngularKind::Singular { strength, nu } => {
                if !(*strength > 0.0) {
                    return Err(invalid(format!(
                        "singular strength must be positive, got {strength}"
                    )));
                }
                if !(*nu > -3.0) {
                    return Err(invalid(format!(
                        "singularity order ν = {nu} must exceed -3"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn nu(&self) -> Option<f64> {
        match self.kind {
            AngularKind::Singular { nu, .. } => Some(nu),
            _ => None,
        }
    }

    /// Exponent of `(1 - cos θ)` in the singular profile.
    pub fn singular_exponent(&self, dim: usize) -> Option<f64> {
        match self.kind {
            AngularKind::Singular { nu, .. } => Some((-(dim as f64 - 2.0) + nu) / 2.0),
            _ => None,
        }
    }

    /// `b(cos θ)`, ignoring the support window.
    pub fn eval_b(&self, cos_theta: f64, dim: usize) -> Result<f64> {
        if !(-1.0..=1.0).contains(&cos_theta) {
            return Err(Error::Domain(format!(
                "cos θ = {cos_theta} outside [-1, 1]"
            )));
        }
        Ok(match &self.kind {
            AngularKind::ConstantCutoff { c } => *c,
            AngularKind::TableCutoff { cos, values } => table_lookup(cos, values, cos_theta),
            AngularKind::Singular { strength, .. } => {
                let e = self.singular_exponent(dim).unwrap();
                if cos_theta >= 1.0 {
                    if e < 0.0 {
                        return Err(Error::Domain(
                            "singular kernel evaluated at cos θ = 1".into(),
                        ));
                    }
                    return Ok(if e == 0.0 { *strength } else { 0.0 });
                }
                strength * (1.0 - cos_theta).powf(e)
            }
        })
    }

    /// `b(cos θ)` inside the support, 0 outside. Grazing evaluation of a
    /// singular kernel returns `+∞`.
    pub fn value(&self, theta: f64, dim: usize) -> f64 {
        let (lo, hi) = self.support;
        if theta < lo || theta > hi {
            return 0.0;
        }
        // 1 - cos θ computed as 2 sin²(θ/2) to keep accuracy near 0.
        if let AngularKind::Singular { strength, .. } = self.kind {
            let e = self.singular_exponent(dim).unwrap();
            let s = (0.5 * theta).sin();
            let one_minus = 2.0 * s * s;
            if one_minus == 0.0 {
                return if e < 0.0 {
                    f64::INFINITY
                } else if e == 0.0 {
                    strength
                } else {
                    0.0
                };
            }
            return strength * one_minus.powf(e);
        }
        self.eval_b(theta.cos(), dim).unwrap_or(0.0)
    }

    fn unbounded_at_zero(&self, dim: usize) -> bool {
        self.support.0 == 0.0 && self.singular_exponent(dim).is_some_and(|e| e < 0.0)
    }

    /// Splits a kernel supported in `[0, π/2]` into the part on
    /// `[θ₀, π/2]` and the grazing remainder on `[0, θ₀)`.
    pub fn split(&self, theta0: f64) -> Result<(AngularKernel, AngularKernel)> {
        check_split_angle(theta0)?;
        if self.support.1 > FRAC_PI_2 + 1e-15 {
            return Err(invalid("split requires a kernel supported in [0, π/2]"));
        }
        let (lo, hi) = self.support;
        let cutoff = self.clone().with_support(lo.max(theta0), hi.max(theta0));
        let remainder = self
            .clone()
            .with_support(lo.min(theta0), hi.min(prev_float(theta0)));
        Ok((cutoff, remainder))
    }
}

fn check_split_angle(theta0: f64) -> Result<()> {
    if !(theta0 > 0.0 && theta0 <= FRAC_PI_2) {
        return Err(invalid(format!(
            "split angle θ₀ = {theta0} must lie in (0, π/2]"
        )));
    }
    Ok(())
}

fn prev_float(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

fn table_lookup(cos: &[f64], values: &[f64], y: f64) -> f64 {
    if y <= cos[0] {
        return values[0];
    }
    if y >= cos[cos.len() - 1] {
        return values[values.len() - 1];
    }
    let j = cos.partition_point(|&c| c <= y) - 1;
    let t = (y - cos[j]) / (cos[j + 1] - cos[j]);
    values[j] * (1.0 - t) + values[j + 1] * t
}

/// `B(x, y) = |x|^γ b(y)` in dimension `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionKernel {
    pub gamma: f64,
    pub angular: AngularKernel,
    pub dim: usize,
}

impl CollisionKernel {
    pub fn new(gamma: f64, angular: AngularKernel, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("γ = {gamma} outside [0, 1]")));
        }
        if !(dim == 2 || dim == 3) {
            return Err(invalid(format!(
                "dimension {dim} not supported (use 2 or 3)"
            )));
        }
        angular.validate()?;
        Ok(CollisionKernel {
            gamma,
            angular,
            dim,
        })
    }

    /// Folds the kernel onto `[0, π/2]` via `θ ↦ π - θ`.
    pub fn symmetrize(&self) -> SymmetrizedKernel {
        SymmetrizedKernel {
            base: self.clone(),
            window: (0.0, FRAC_PI_2),
        }
    }
}

/// `B_sym(x, cos θ) = [B(x, cos θ) + B(x, cos(π-θ))] 1_{θ ∈ window}`, with
/// `window ⊆ [0, π/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizedKernel {
    pub base: CollisionKernel,
    pub window: (f64, f64),
}

impl SymmetrizedKernel {
    /// Cutoff part on `[θ₀, π/2]` and remainder on `[0, θ₀)`.
    pub fn split(&self, theta0: f64) -> Result<(SymmetrizedKernel, SymmetrizedKernel)> {
        check_split_angle(theta0)?;
        let (lo, hi) = self.window;
        let cutoff = SymmetrizedKernel {
            base: self.base.clone(),
            window: (lo.max(theta0), hi.max(theta0)),
        };
        let remainder = SymmetrizedKernel {
            base: self.base.clone(),
            window: (lo.min(theta0), hi.min(prev_float(theta0))),
        };
        Ok((cutoff, remainder))
    }
}

/// Anything that can serve as `|x|^γ × (angular profile in θ)` for the
/// collision quadratures.
pub trait Kernel: Sync {
    fn dim(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Angular factor at polar angle `θ`, including support restrictions.
    fn angular_value(&self, theta: f64) -> f64;
    fn theta_range(&self) -> (f64, f64);
    /// The profile is of singular type (graded treatment near its lower end).
    fn is_singular(&self) -> bool;
    /// The profile is unbounded at `θ = 0` and `0` is in its range.
    fn singular_at_zero(&self) -> bool;
}

impl Kernel for CollisionKernel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn angular_value(&self, theta: f64) -> f64 {
        self.angular.value(theta, self.dim)
    }
    fn theta_range(&self) -> (f64, f64) {
        self.angular.support
    }
    fn is_singular(&self) -> bool {
        matches!(self.angular.kind, AngularKind::Singular { .. })
    }
    fn singular_at_zero(&self) -> bool {
        self.angular.unbounded_at_zero(self.dim)
    }
}

impl Kernel for SymmetrizedKernel {
    fn dim(&self) -> usize {
        self.base.dim
    }
    fn gamma(&self) -> f64 {
        self.base.gamma
    }
    fn angular_value(&self, theta: f64) -> f64 {
        let (lo, hi) = self.window;
        if theta < lo || theta > hi {
            return 0.0;
        }
        self.base.angular.value(theta, self.base.dim)
            + self.base.angular.value(PI - theta, self.base.dim)
    }
    fn theta_range(&self) -> (f64, f64) {
        self.window
    }
    fn is_singular(&self) -> bool {
        self.base.is_singular()
    }
    fn singular_at_zero(&self) -> bool {
        self.window.0 == 0.0 && self.base.singular_at_zero()
    }
}

/// Angle-quadrature settings shared by the angular integrals and the
/// collision sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AngularQuadrature {
    pub grading: Grading,
    /// Gauss-Legendre panels and points for bounded kernels.
    pub gauss_panels: usize,
    pub gauss_points: usize,
    /// Use graded shells even for bounded kernels.
    pub always_graded: bool,
}

impl Default for AngularQuadrature {
    fn default() -> Self {
        AngularQuadrature {
            grading: Grading::default(),
            gauss_panels: 4,
            gauss_points: 8,
            always_graded: false,
        }
    }
}

impl AngularQuadrature {
    pub fn rule_for(&self, kernel: &impl Kernel) -> ThetaRule {
        let (lo, hi) = kernel.theta_range();
        if hi <= lo {
            return ThetaRule {
                nodes: vec![],
                shells: 0,
                boundaries: vec![hi],
                truncated: false,
            };
        }
        if kernel.is_singular() || self.always_graded {
            ThetaRule::graded(lo, hi, &self.grading, kernel.dim())
        } else {
            ThetaRule::gauss(lo, hi, self.gauss_panels, self.gauss_points, kernel.dim())
        }
    }

    /// `∫_{S^{N-1}} b(cos θ) φ(θ) dσ`.
    pub fn angular_integral(
        &self,
        kernel: &impl Kernel,
        phi: impl Fn(f64) -> f64,
    ) -> GradedIntegral {
        let rule = self.rule_for(kernel);
        let s = sphere_measure(kernel.dim() - 2);
        let mut r = rule.integrate(|t| s * kernel.angular_value(t) * phi(t));
        if !kernel.singular_at_zero() && r.converged {
            // bounded integrand near 0: the truncated tail is negligible
            r.error = r.error.min(r.tail.abs());
        }
        r
    }
}

fn require(what: &str, r: GradedIntegral) -> Result<f64> {
    if r.converged {
        Ok(r.value)
    } else {
        Err(Error::NonConvergence {
            what: what.into(),
            rate: r.rate,
        })
    }
}

/// `∫_{S^{N-1}} b dσ`; fails for kernels that are not integrable at `θ = 0`.
pub fn angular_mass(kernel: &impl Kernel, quad: &AngularQuadrature) -> Result<f64> {
    require("angular mass", quad.angular_integral(kernel, |_| 1.0))
}

/// `∫_{S^{N-1}} b (1 - cos θ) dσ`.
pub fn angular_moment(kernel: &impl Kernel, quad: &AngularQuadrature) -> Result<f64> {
    require(
        "angular moment",
        quad.angular_integral(kernel, |t| 2.0 * (0.5 * t).sin().powi(2)),
    )
}

/// `∫_{S^{N-1}} b sin(θ/2) dσ`.
pub fn angular_half_moment(kernel: &impl Kernel, quad: &AngularQuadrature) -> Result<f64> {
    require(
        "angular half moment",
        quad.angular_integral(kernel, |t| (0.5 * t).sin()),
    )
}

/// `∫_{S^{N-1}} b sin²θ dσ`, the relaxation moment of Maxwell molecules.
pub fn angular_sin2_moment(kernel: &impl Kernel, quad: &AngularQuadrature) -> Result<f64> {
    require(
        "angular sin² moment",
        quad.angular_integral(kernel, |t| t.sin().powi(2)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quad() -> AngularQuadrature {
        AngularQuadrature::default()
    }

    #[test]
    fn eval_b_examples() {
        assert_eq!(AngularKernel::constant(1.0).eval_b(0.0, 3).unwrap(), 1.0);
        let table = AngularKernel::new(AngularKind::TableCutoff {
            cos: vec![-1.0, 1.0],
            values: vec![0.0, 2.0],
        })
        .unwrap();
        assert_relative_eq!(table.eval_b(0.5, 2).unwrap(), 1.5);
        let s = AngularKernel::singular(1.0, -1.0);
        for y in [0.9, 0.99, 0.999] {
            assert_relative_eq!(
                s.eval_b(y, 3).unwrap() * (1.0 - y),
                1.0,
                max_relative = 1e-12
            );
        }
        assert!(matches!(s.eval_b(1.0, 3), Err(Error::Domain(_))));
        assert!(s.eval_b(1.2, 3).is_err());
    }

    #[test]
    fn constructor_rejects_bad_kernels() {
        assert!(AngularKernel::new(AngularKind::Singular {
            strength: 1.0,
            nu: -3.0
        })
        .is_err());
        assert!(AngularKernel::new(AngularKind::ConstantCutoff { c: -1.0 }).is_err());
        assert!(CollisionKernel::new(1.5, AngularKernel::constant(1.0), 3).is_err());
        assert!(CollisionKernel::new(1.0, AngularKernel::constant(1.0), 4).is_err());
    }

    #[test]
    fn symmetrize_constant_kernel() {
        let k = CollisionKernel::new(0.0, AngularKernel::constant(1.0), 3)
            .unwrap()
            .symmetrize();
        assert_eq!(k.angular_value(0.3), 2.0);
        assert_eq!(k.angular_value(FRAC_PI_2), 2.0);
        assert_eq!(k.angular_value(2.0), 0.0);
    }

    #[test]
    fn symmetrized_singular_keeps_exponent_and_is_bounded_at_right_angle() {
        let k = CollisionKernel::new(1.0, AngularKernel::singular(1.0, -1.5), 3).unwrap();
        let s = k.symmetrize();
        let e = k.angular.singular_exponent(3).unwrap();
        for t in [1e-3, 1e-4, 1e-5] {
            let ratio = s.angular_value(t) / (1.0 - t.cos()).powf(e);
            assert_relative_eq!(ratio, 1.0, max_relative = 1e-3);
        }
        assert!(s.angular_value(FRAC_PI_2).is_finite());
    }

    #[test]
    fn angular_mass_of_unit_kernel_is_sphere_area() {
        let k3 = CollisionKernel::new(0.0, AngularKernel::constant(1.0), 3).unwrap();
        assert_relative_eq!(
            angular_mass(&k3, &quad()).unwrap(),
            4.0 * PI,
            max_relative = 1e-12
        );
        let k2 = CollisionKernel::new(0.0, AngularKernel::constant(1.0), 2).unwrap();
        assert_relative_eq!(
            angular_mass(&k2, &quad()).unwrap(),
            2.0 * PI,
            max_relative = 1e-12
        );
        let z = CollisionKernel::new(0.0, AngularKernel::constant(0.0), 3).unwrap();
        assert_eq!(angular_mass(&z, &quad()).unwrap(), 0.0);
    }

    #[test]
    fn angular_moment_closed_forms() {
        let k3 = CollisionKernel::new(0.0, AngularKernel::constant(1.0), 3).unwrap();
        assert_relative_eq!(
            angular_moment(&k3, &quad()).unwrap(),
            4.0 * PI,
            max_relative = 1e-12
        );
        // remainder of the split at π/4
        let half = AngularKernel::constant(1.0).with_support(0.0, FRAC_PI_2);
        let (_, rem) = half.split(PI / 4.0).unwrap();
        let r = CollisionKernel::new(0.0, rem, 3).unwrap();
        let expected = PI * (1.0 - 0.5 * 2f64.sqrt()).powi(2);
        assert_relative_eq!(
            angular_moment(&r, &quad()).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(expected, 0.2695, max_relative = 1e-3);
    }

    #[test]
    fn singular_moment_converges_iff_nu_above_minus_three() {
        // near 0: θ^{ν-(N-2)} · θ² · θ^{N-2} = θ^{ν+2}
        for (nu, ok) in [
            (-2.0, true),
            (-2.5, true),
            (-2.9, true),
            (-3.0, false),
            (-3.2, false),
        ] {
            let k = CollisionKernel {
                gamma: 0.0,
                angular: AngularKernel::singular(1.0, nu),
                dim: 3,
            };
            assert_eq!(angular_moment(&k, &quad()).is_ok(), ok, "ν = {nu}");
        }
        // mass needs θ^ν integrable: ν > -1
        let k = CollisionKernel::new(0.0, AngularKernel::singular(1.0, -1.5), 2).unwrap();
        assert!(matches!(
            angular_mass(&k, &quad()),
            Err(Error::NonConvergence { .. })
        ));
        let k = CollisionKernel::new(0.0, AngularKernel::singular(1.0, -0.5), 2).unwrap();
        assert!(angular_mass(&k, &quad()).is_ok());
    }

    #[test]
    fn singular_moment_matches_closed_form() {
        // N = 2, ν = -2: b(θ) = (1 - cos θ)^{-1}, so ∫ b (1 - cos θ) dσ = 2π on [0, π]
        let k = CollisionKernel::new(0.0, AngularKernel::singular(1.0, -2.0), 2).unwrap();
        assert_relative_eq!(
            angular_moment(&k, &quad()).unwrap(),
            2.0 * PI,
            max_relative = 1e-9
        );
        // N = 3, ν = -2.5: b (1 - cos θ) = (1 - cos θ)^{-3/4}, and
        // ∫_0^π (1-cos θ)^{-3/4} sin θ dθ = 4 · 2^{1/4}
        let k = CollisionKernel::new(0.0, AngularKernel::singular(1.0, -2.5), 3).unwrap();
        let expected = 2.0 * PI * 4.0 * 2f64.powf(0.25);
        assert_relative_eq!(
            angular_moment(&k, &quad()).unwrap(),
            expected,
            max_relative = 1e-6
        );
    }

    #[test]
    fn split_reconstructs_and_remainder_moment_vanishes() {
        let s = CollisionKernel::new(1.0, AngularKernel::singular(1.0, -2.5), 2)
            .unwrap()
            .symmetrize();
        let (c, r) = s.split(0.3).unwrap();
        for t in [1e-5, 0.1, 0.2999, 0.3, 0.5, 1.2, FRAC_PI_2] {
            assert_eq!(c.angular_value(t) + r.angular_value(t), s.angular_value(t));
        }
        assert_eq!(c.angular_value(0.1), 0.0);
        let mut last = f64::INFINITY;
        let mut first = 0.0;
        for k in 1..16 {
            let t0 = FRAC_PI_2 / 2f64.powi(k);
            let (_, r) = s.split(t0).unwrap();
            let m = angular_moment(&r, &quad()).unwrap();
            assert!(m <= last);
            if k == 1 {
                first = m;
            }
            last = m;
        }
        // remainder moment scales like θ₀^{ν+3} = θ₀^{1/2}
        assert_relative_eq!(last / first, 2f64.powf(-7.0), max_relative = 0.05);
        assert!(s.split(0.0).is_err());
        assert!(s.split(2.0).is_err());
    }

    #[test]
    fn split_at_right_angle_leaves_everything_in_remainder() {
        let s = CollisionKernel::new(1.0, AngularKernel::constant(1.0), 3)
            .unwrap()
            .symmetrize();
        let (c, r) = s.split(FRAC_PI_2).unwrap();
        assert_eq!(c.window, (FRAC_PI_2, FRAC_PI_2));
        let full = angular_moment(&s, &quad()).unwrap();
        assert_relative_eq!(
            angular_moment(&r, &quad()).unwrap(),
            full,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mass_dominates_moment_on_half_sphere() {
        for nu in [-0.5, 0.0, 1.0] {
            let s = CollisionKernel::new(0.5, AngularKernel::singular(1.0, nu), 3)
                .unwrap()
                .symmetrize();
            assert!(angular_mass(&s, &quad()).unwrap() >= angular_moment(&s, &quad()).unwrap());
        }
    }
}

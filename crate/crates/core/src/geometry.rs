//! Binary-collision geometry.
//!
//! `σ` is always the integration variable of the collision integral and the
//! post-collisional velocities are built from it:
//! `v' = (v+v_*)/2 + |v-v_*| σ/2`, `v'_* = (v+v_*)/2 - |v-v_*| σ/2`.
//! The polar frame `σ = cos θ k + sin θ u` with `k = (v-v_*)/|v-v_*|` only
//! enumerates quadrature nodes on the sphere.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::kernel::{sphere_measure, Kernel};
use crate::quadrature::ThetaRule;

pub type Vector<const D: usize> = [f64; D];

#[inline]
pub fn dot<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn norm<const D: usize>(a: &Vector<D>) -> f64 {
    dot(a, a).sqrt()
}

/// Post-collisional pair `(v', v'_*)`.
#[inline]
pub fn collide<const D: usize>(
    v: &Vector<D>,
    v_star: &Vector<D>,
    sigma: &Vector<D>,
) -> (Vector<D>, Vector<D>) {
    let mut g = [0.0; D];
    for i in 0..D {
        g[i] = v[i] - v_star[i];
    }
    let half = 0.5 * norm(&g);
    let mut vp = [0.0; D];
    let mut vsp = [0.0; D];
    for i in 0..D {
        let c = 0.5 * (v[i] + v_star[i]);
        vp[i] = c + half * sigma[i];
        vsp[i] = c - half * sigma[i];
    }
    (vp, vsp)
}

/// Orthonormal basis of the hyperplane orthogonal to the unit vector `k`.
pub fn orthonormal_complement<const D: usize>(k: &Vector<D>) -> [Vector<D>; 2] {
    match D {
        2 => {
            let mut e = [0.0; D];
            e[0] = -k[1];
            e[1] = k[0];
            [e, [0.0; D]]
        }
        3 => {
            // cross with the axis least aligned with k
            let mut axis = [0.0; D];
            let j = (0..3)
                .min_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs()))
                .unwrap();
            axis[j] = 1.0;
            let mut e1 = cross(k, &axis);
            let n1 = norm(&e1);
            for x in e1.iter_mut() {
                *x /= n1;
            }
            let e2 = cross(k, &e1);
            [e1, e2]
        }
        _ => panic!("dimension {D} not supported"),
    }
}

fn cross<const D: usize>(a: &Vector<D>, b: &Vector<D>) -> Vector<D> {
    let mut c = [0.0; D];
    c[0] = a[1] * b[2] - a[2] * b[1];
    c[1] = a[2] * b[0] - a[0] * b[2];
    c[2] = a[0] * b[1] - a[1] * b[0];
    c
}

/// Polar description of `σ` around the axis `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleFrame<const D: usize> {
    pub k: Vector<D>,
    pub theta: f64,
    pub u: Vector<D>,
}

impl<const D: usize> AngleFrame<D> {
    pub fn sigma(&self) -> Result<Vector<D>> {
        if (norm(&self.k) - 1.0).abs() > 1e-12 || (norm(&self.u) - 1.0).abs() > 1e-12 {
            return Err(invalid("angle frame vectors must be unit"));
        }
        if dot(&self.k, &self.u).abs() > 1e-12 {
            return Err(invalid("angle frame requires u ⟂ k"));
        }
        let (s, c) = self.theta.sin_cos();
        let mut sigma = [0.0; D];
        for i in 0..D {
            sigma[i] = c * self.k[i] + s * self.u[i];
        }
        Ok(sigma)
    }
}

pub fn sigma_from_angles<const D: usize>(frame: &AngleFrame<D>) -> Result<Vector<D>> {
    frame.sigma()
}

/// Nodes on `S^{N-2}` as coefficients in an orthonormal basis of `k^⟂`.
/// `N = 2` uses the two points `±e`; `N = 3` uses `m` equispaced points on
/// the circle (`m` even, so the set is symmetric under `u ↦ -u`).
#[derive(Debug, Clone, PartialEq)]
pub struct EquatorRule {
    pub coeffs: Vec<(f64, f64)>,
    pub weight: f64,
}

impl EquatorRule {
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        match dim {
            2 => Ok(EquatorRule {
                coeffs: vec![(1.0, 0.0), (-1.0, 0.0)],
                weight: 1.0,
            }),
            3 => {
                if m < 2 || !m.is_multiple_of(2) {
                    return Err(invalid(format!(
                        "equator node count must be even and ≥ 2, got {m}"
                    )));
                }
                let coeffs = (0..m)
                    .map(|j| {
                        let phi = 2.0 * PI * j as f64 / m as f64;
                        (phi.cos(), phi.sin())
                    })
                    .collect();
                Ok(EquatorRule {
                    coeffs,
                    weight: sphere_measure(1) / m as f64,
                })
            }
            _ => Err(invalid(format!("dimension {dim} not supported"))),
        }
    }

    #[inline]
    pub fn direction<const D: usize>(&self, j: usize, basis: &[Vector<D>; 2]) -> Vector<D> {
        let (a, b) = self.coeffs[j];
        let mut u = [0.0; D];
        for i in 0..D {
            u[i] = a * basis[0][i] + b * basis[1][i];
        }
        u
    }
}

/// One quadrature node on the sphere, relative to the polar axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaNode {
    pub cos: f64,
    pub sin: f64,
    pub theta: f64,
    /// Equator coefficients of `u`.
    pub a: f64,
    pub b: f64,
    /// `dσ` weight (polar weight times equator weight).
    pub weight: f64,
    pub shell: usize,
    /// Index of the polar node this came from.
    pub polar: usize,
}

/// Tensor rule (polar × equator) for `∫_{S^{N-1}} ... dσ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereRule {
    pub theta: ThetaRule,
    pub nodes: Vec<SigmaNode>,
}

impl SphereRule {
    pub fn new(theta: ThetaRule, equator: &EquatorRule) -> Self {
        let mut nodes = Vec::with_capacity(theta.nodes.len() * equator.coeffs.len());
        for (p, t) in theta.nodes.iter().enumerate() {
            let (s, c) = t.theta.sin_cos();
            for &(a, b) in &equator.coeffs {
                nodes.push(SigmaNode {
                    cos: c,
                    sin: s,
                    theta: t.theta,
                    a,
                    b,
                    weight: t.weight * equator.weight,
                    shell: t.shell,
                    polar: p,
                });
            }
        }
        SphereRule { theta, nodes }
    }

    #[inline]
    pub fn sigma<const D: usize>(
        node: &SigmaNode,
        k: &Vector<D>,
        basis: &[Vector<D>; 2],
    ) -> Vector<D> {
        let mut s = [0.0; D];
        for i in 0..D {
            s[i] = node.cos * k[i] + node.sin * (node.a * basis[0][i] + node.b * basis[1][i]);
        }
        s
    }
}

/// `(jacobian, stretch) = (cos^{-N}(θ/2), 1/cos(θ/2))` of the map
/// `v ↦ v'` at fixed `v_*` and `σ`.
pub fn cv_weight(theta: f64, dim: usize) -> Result<(f64, f64)> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(crate::Error::Domain(format!(
            "θ = {theta} outside [0, π/2]"
        )));
    }
    let c = (0.5 * theta).cos();
    Ok((c.powi(-(dim as i32)), 1.0 / c))
}

/// `cos^{-N-γ}(θ/2)`: the jacobian combined with the stretched `|x|^γ`.
pub fn cv_combined_weight(theta: f64, dim: usize, gamma: f64) -> Result<f64> {
    let (jac, stretch) = cv_weight(theta, dim)?;
    Ok(jac * stretch.powf(gamma))
}

/// Midpoint box used by [`verify_cv_identity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRule {
    pub n: usize,
    pub radius: f64,
}

/// Relative residual `|LHS - RHS| / |RHS|` of
/// `∫∫ B(|v-v_*|, cos θ) F(v') dv dσ = ∫∫ cos^{-N}(θ/2) B(|v-v_*|/cos(θ/2), cos θ) F(v) dv dσ`
/// at fixed `v_*`. Both sides are midpoint sums over the box with `F`
/// evaluated exactly; they share nothing but the node sets. Returns 0 when
/// both sides vanish.
pub fn verify_cv_identity<const D: usize, K: Kernel>(
    field: impl Fn(&Vector<D>) -> f64,
    kernel: &K,
    v_star: &Vector<D>,
    boxr: BoxRule,
    sphere: &SphereRule,
) -> Result<f64> {
    if kernel.dim() != D {
        return Err(invalid("kernel dimension does not match the field"));
    }
    if kernel.theta_range().1 > std::f64::consts::FRAC_PI_2 + 1e-15 {
        return Err(invalid(
            "change of variables needs a kernel supported in [0, π/2]",
        ));
    }
    let gamma = kernel.gamma();
    let h = 2.0 * boxr.radius / boxr.n as f64;
    let vol = h.powi(D as i32);
    let bvals: Vec<f64> = sphere
        .nodes
        .iter()
        .map(|s| kernel.angular_value(s.theta))
        .collect();
    let total = boxr.n.pow(D as u32);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for idx in 0..total {
        let mut v = [0.0; D];
        let mut r = idx;
        for a in (0..D).rev() {
            v[a] = -boxr.radius + (r % boxr.n) as f64 * h + 0.5 * h;
            r /= boxr.n;
        }
        let mut g = [0.0; D];
        for a in 0..D {
            g[a] = v[a] - v_star[a];
        }
        let gn = norm(&g);
        if gn == 0.0 {
            continue;
        }
        let k = g.map(|x| x / gn);
        let basis = orthonormal_complement(&k);
        let fv = field(&v);
        for (node, &b) in sphere.nodes.iter().zip(&bvals) {
            if b == 0.0 {
                continue;
            }
            let sigma = SphereRule::sigma(node, &k, &basis);
            let (vp, _) = collide(&v, v_star, &sigma);
            lhs += node.weight * b * gn.powf(gamma) * field(&vp);
            let (jac, stretch) = cv_weight(node.theta, D)?;
            rhs += node.weight * b * jac * (gn * stretch).powf(gamma) * fv;
        }
    }
    lhs *= vol;
    rhs *= vol;
    if lhs == 0.0 && rhs == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / rhs.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{AngularKernel, AngularQuadrature, CollisionKernel};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collide_examples() {
        let (vp, vsp) = collide(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0]);
        assert_eq!(vp, [0.0, 1.0]);
        assert_eq!(vsp, [0.0, -1.0]);
        let v = [0.3, -1.2, 2.0];
        let vs = [1.0, 0.5, -0.7];
        let g: Vec<f64> = (0..3).map(|i| v[i] - vs[i]).collect();
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        let (vp, vsp) = collide(&v, &vs, &[g[0] / n, g[1] / n, g[2] / n]);
        for i in 0..3 {
            assert_relative_eq!(vp[i], v[i], epsilon = 1e-14);
            assert_relative_eq!(vsp[i], vs[i], epsilon = 1e-14);
        }
        let same = [0.4, 0.1, -0.2];
        let (a, b) = collide(&same, &same, &[0.0, 0.6, 0.8]);
        assert_eq!(a, same);
        assert_eq!(b, same);
    }

    #[test]
    fn sigma_from_angles_examples() {
        let k = [0.0, 0.0, 1.0];
        let u = [1.0, 0.0, 0.0];
        let s = AngleFrame { k, theta: 0.0, u }.sigma().unwrap();
        assert_eq!(s, k);
        let s = AngleFrame {
            k,
            theta: std::f64::consts::FRAC_PI_2,
            u,
        }
        .sigma()
        .unwrap();
        assert_relative_eq!(s[0], 1.0);
        assert!(s[2].abs() < 1e-16);
        let s = AngleFrame {
            k,
            theta: PI / 3.0,
            u,
        }
        .sigma()
        .unwrap();
        assert_relative_eq!(s[0], 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(s[2], 0.5, epsilon = 1e-15);
        assert!(AngleFrame {
            k,
            theta: 0.3,
            u: [0.6, 0.0, 0.8]
        }
        .sigma()
        .is_err());
    }

    #[test]
    fn theta_flip_with_reversed_u_exchanges_outgoing_velocities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let vs: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let g: [f64; 3] = std::array::from_fn(|i| v[i] - vs[i]);
            let k = g.map(|x| x / norm(&g));
            let basis = orthonormal_complement(&k);
            let theta = rng.gen_range(0.0..PI);
            let u = basis[0];
            let neg_u = u.map(|x| -x);
            let s1 = AngleFrame { k, theta, u }.sigma().unwrap();
            let s2 = AngleFrame {
                k,
                theta: PI - theta,
                u: neg_u,
            }
            .sigma()
            .unwrap();
            let (a1, b1) = collide(&v, &vs, &s1);
            let (a2, b2) = collide(&v, &vs, &s2);
            for i in 0..3 {
                assert_relative_eq!(a1[i], b2[i], epsilon = 1e-12);
                assert_relative_eq!(b1[i], a2[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn complement_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let g: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let k = g.map(|x| x / norm(&g));
            let [e1, e2] = orthonormal_complement(&k);
            assert!(dot(&k, &e1).abs() < 1e-12 && dot(&k, &e2).abs() < 1e-12);
            assert!(dot(&e1, &e2).abs() < 1e-12);
            assert!((norm(&e1) - 1.0).abs() < 1e-12 && (norm(&e2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cv_weight_examples_and_monotonicity() {
        assert_eq!(cv_weight(0.0, 3).unwrap(), (1.0, 1.0));
        let (j, _) = cv_weight(std::f64::consts::FRAC_PI_2, 3).unwrap();
        assert_relative_eq!(j, 2f64.powf(1.5), max_relative = 1e-14);
        let w = cv_combined_weight(std::f64::consts::FRAC_PI_2, 2, 1.0).unwrap();
        assert_relative_eq!(w, 2f64.powf(1.5), max_relative = 1e-14);
        assert!(cv_weight(2.0, 3).is_err());
        let mut last = 0.0;
        for i in 0..=100 {
            let (j, _) = cv_weight(std::f64::consts::FRAC_PI_2 * i as f64 / 100.0, 3).unwrap();
            assert!(j >= last);
            last = j;
        }
    }

    fn sphere_for(kernel: &impl Kernel, polar: usize) -> SphereRule {
        let q = AngularQuadrature {
            gauss_panels: 1,
            gauss_points: polar,
            ..Default::default()
        };
        SphereRule::new(
            q.rule_for(kernel),
            &EquatorRule::new(kernel.dim(), 8).unwrap(),
        )
    }

    #[test]
    fn cv_identity_zero_field() {
        let k = CollisionKernel::new(0.0, AngularKernel::constant(1.0), 2)
            .unwrap()
            .symmetrize();
        let r = verify_cv_identity(
            |_: &[f64; 2]| 0.0,
            &k,
            &[0.0, 0.0],
            BoxRule { n: 16, radius: 6.0 },
            &sphere_for(&k, 8),
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn cv_identity_gaussian_times_polynomial_converges() {
        let k = CollisionKernel::new(1.0, AngularKernel::constant(1.0), 2)
            .unwrap()
            .symmetrize();
        let f = |v: &[f64; 2]| {
            (1.0 + v[0] * v[0] + 0.5 * v[1]) * (-(v[0] - 0.5).powi(2) - v[1] * v[1]).exp()
        };
        let vs = [0.3, -0.2];
        let coarse = verify_cv_identity(
            f,
            &k,
            &vs,
            BoxRule { n: 32, radius: 8.0 },
            &sphere_for(&k, 16),
        )
        .unwrap();
        let fine = verify_cv_identity(
            f,
            &k,
            &vs,
            BoxRule { n: 64, radius: 8.0 },
            &sphere_for(&k, 16),
        )
        .unwrap();
        assert!(fine < 1e-2, "{fine}");
        assert!(fine < coarse, "{fine} vs {coarse}");
    }
}

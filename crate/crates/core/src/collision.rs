//! Quadrature of the collision operator and of the weighted functional
//! `D = ∫ Q(g,f) f^{p-1} ⟨v⟩^{pq} dv`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{orthonormal_complement, EquatorRule, SphereRule, Vector};
use crate::interp::{Interpolant, Interpolation};
use crate::kernel::{sphere_measure, AngularQuadrature, Kernel};
use crate::quadrature::{GradedIntegral, Grading, ThetaRule};
use crate::state::{Distribution, NormSpec};

/// Sphere and interpolation settings for the collision sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub angular: AngularQuadrature,
    /// Equator nodes for `N = 3` (ignored in 2D, where `S^0 = {±1}`).
    pub equator_nodes: usize,
    /// Off-grid rule for `f(v')`, `g(v'_*)` in the pointwise operator.
    pub interpolation: Interpolation,
    /// Off-grid rule for the weight `⟨v⟩^{pq} f^{p-1}` in the functional.
    pub functional_interpolation: Interpolation,
    /// Pairs with `f_i g_j` below this fraction of `max f · max g` are skipped
    /// in the functional.
    pub prune: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            angular: AngularQuadrature {
                grading: Grading {
                    theta_min: 1e-4,
                    ..Grading::default()
                },
                gauss_panels: 1,
                ..AngularQuadrature::default()
            },
            equator_nodes: 16,
            interpolation: Interpolation::Linear,
            functional_interpolation: Interpolation::CatmullRom,
            prune: 1e-14,
        }
    }
}

impl QuadratureSpec {
    pub fn equator(&self, dim: usize) -> Result<EquatorRule> {
        EquatorRule::new(dim, self.equator_nodes)
    }

    pub fn sphere_rule(&self, kernel: &impl Kernel) -> Result<SphereRule> {
        Ok(SphereRule::new(
            self.angular.rule_for(kernel),
            &self.equator(kernel.dim())?,
        ))
    }

    /// Graded rule on `[0, π/2]` used for every functional sweep, so that
    /// one sweep serves any angular profile and any split angle on the
    /// shell boundaries `π/2 · ρ^{-k}`.
    pub fn functional_rule(&self, dim: usize) -> ThetaRule {
        ThetaRule::graded(0.0, std::f64::consts::FRAC_PI_2, &self.angular.grading, dim)
    }
}

/// Pointwise collision operator and its two parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionResult {
    pub q_values: Vec<f64>,
    pub gain: Vec<f64>,
    pub loss: Vec<f64>,
}

impl CollisionResult {
    pub fn l1(values: &[f64], cell_volume: f64) -> f64 {
        values.iter().map(|x| x.abs()).sum::<f64>() * cell_volume
    }
}

#[inline]
fn kinetic(gn: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else if gamma == 1.0 {
        gn
    } else {
        gn.powf(gamma)
    }
}

/// `⟨v⟩^{2α}` from `|v|²`, with integer exponents done by multiplication.
#[inline]
fn bracket_pow(v2: f64, alpha: f64) -> f64 {
    let x = 1.0 + v2;
    if alpha.fract() == 0.0 && alpha.abs() < 32.0 {
        x.powi(alpha as i32)
    } else {
        x.powf(alpha)
    }
}

fn check_inputs(g: &Distribution, f: &Distribution, kernel: &impl Kernel) -> Result<()> {
    f.same_grid(g)?;
    if kernel.dim() != f.grid.dim {
        return Err(invalid(format!(
            "kernel is {}-dimensional, grid is {}-dimensional",
            kernel.dim(),
            f.grid.dim
        )));
    }
    Ok(())
}

/// `Q(g,f)` on the grid:
/// `Σ_{j,σ} w_σ h^N |v_i-v_j|^γ b [f(v')g(v'_*) - f(v_i)g(v_j)]`.
pub fn eval_q(
    g: &Distribution,
    f: &Distribution,
    kernel: &impl Kernel,
    spec: &QuadratureSpec,
) -> Result<CollisionResult> {
    check_inputs(g, f, kernel)?;
    if kernel.singular_at_zero() {
        return Err(Error::Domain(
            "pointwise Q needs an integrable angular kernel; split off the grazing part first"
                .into(),
        ));
    }
    let sphere = spec.sphere_rule(kernel)?;
    match f.grid.dim {
        2 => Ok(eval_q_impl::<2>(g, f, kernel, &sphere, spec.interpolation)),
        3 => Ok(eval_q_impl::<3>(g, f, kernel, &sphere, spec.interpolation)),
        _ => unreachable!(),
    }
}

/// Rows are dealt round-robin to this many accumulators so the symmetric
/// evaluation stays deterministic whatever the thread count.
const PAIR_CHUNKS: usize = 16;

fn eval_q_impl<const D: usize>(
    g: &Distribution,
    f: &Distribution,
    kernel: &impl Kernel,
    sphere: &SphereRule,
    kind: Interpolation,
) -> CollisionResult {
    let grid = f.grid;
    let pts = grid.points::<D>();
    let gamma = kernel.gamma();
    let nodes: Vec<_> = sphere
        .nodes
        .iter()
        .map(|s| (s, s.weight * kernel.angular_value(s.theta)))
        .filter(|(_, w)| *w != 0.0)
        .collect();
    let mass: f64 = nodes.iter().map(|(_, w)| w).sum();
    let fi = Interpolant::new(&grid, &f.values, kind);
    let gi = Interpolant::new(&grid, &g.values, kind);
    let vol = grid.cell_volume();
    let len = pts.len();

    // Σ_σ w b f(v') g(v'_*) for the pair (i, j), without |v_i - v_j|^γ.
    let pair_gain = |i: usize, j: usize| -> (f64, f64) {
        let (v, vs) = (&pts[i], &pts[j]);
        let mut gv = [0.0; D];
        let mut c = [0.0; D];
        for a in 0..D {
            gv[a] = v[a] - vs[a];
            c[a] = 0.5 * (v[a] + vs[a]);
        }
        let gn = crate::geometry::norm(&gv);
        let kin = kinetic(gn, gamma);
        if kin == 0.0 {
            return (0.0, 0.0);
        }
        if gn == 0.0 {
            // v' = v'_* = v
            return (kin, mass * f.values[i] * g.values[j]);
        }
        let k = gv.map(|x| x / gn);
        let basis = orthonormal_complement(&k);
        let half = 0.5 * gn;
        let mut s = 0.0;
        for (node, w) in &nodes {
            let sigma = SphereRule::sigma(node, &k, &basis);
            let mut vp = [0.0; D];
            let mut vsp = [0.0; D];
            for a in 0..D {
                vp[a] = c[a] + half * sigma[a];
                vsp[a] = c[a] - half * sigma[a];
            }
            let a = fi.eval(&vp);
            if a != 0.0 {
                s += w * a * gi.eval(&vsp);
            }
        }
        (kin, s)
    };

    let loss: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let v = &pts[i];
            let mut l = 0.0;
            for (j, vs) in pts.iter().enumerate() {
                let gn = (0..D).map(|a| (v[a] - vs[a]).powi(2)).sum::<f64>().sqrt();
                l += kinetic(gn, gamma) * g.values[j];
            }
            l * mass * f.values[i] * vol
        })
        .collect();

    let symmetric = std::ptr::eq(f, g) || f.values == g.values;
    let gain: Vec<f64> = if symmetric {
        // (v', v'_*) for the pair (j, i) is (v'_*, v') for (i, j) up to a
        // relabelling of the σ-nodes, so each unordered pair is done once.
        let parts: Vec<Vec<f64>> = (0..PAIR_CHUNKS)
            .into_par_iter()
            .map(|chunk| {
                let mut acc = vec![0.0; len];
                for i in (chunk..len).step_by(PAIR_CHUNKS) {
                    for j in i..len {
                        let (kin, s) = pair_gain(i, j);
                        if s != 0.0 {
                            acc[i] += kin * s;
                            if j != i {
                                acc[j] += kin * s;
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut gain = vec![0.0; len];
        for part in parts {
            for (a, b) in gain.iter_mut().zip(part) {
                *a += b * vol;
            }
        }
        gain
    } else {
        (0..len)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.0;
                for j in 0..len {
                    let (kin, t) = pair_gain(i, j);
                    s += kin * t;
                }
                s * vol
            })
            .collect()
    };
    let q_values = gain.iter().zip(&loss).map(|(a, b)| a - b).collect();
    CollisionResult {
        q_values,
        gain,
        loss,
    }
}

/// Polar-resolved sums of one sweep over `(v_i, v_j, u)`, before the angular
/// profile is applied. Entry `k` belongs to polar node `k` of `rule` and
/// already contains the equator weights and `h^{2N}`; multiplying by the
/// polar weight and `b(θ_k)` and summing gives the corresponding integral.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSweep {
    pub rule: ThetaRule,
    pub dim: usize,
    pub spec: NormSpec,
    pub gamma: f64,
    /// `Σ f_i g_j |v_i-v_j|^γ [H(v') - H(v_i)]`, `H = ⟨v⟩^{pq} f^{p-1}`.
    pub functional: Vec<f64>,
    /// `Σ f_i^p g_j |v_i-v_j|^γ [⟨v'⟩^{pq} - ⟨v_i⟩^{pq}]`.
    pub weight_change: Vec<f64>,
    /// `Σ_{i,j} f_i^p g_j |v_i-v_j|^γ ⟨v_i⟩^{pq} h^{2N}` (no angular factor).
    pub loss_weight: f64,
    pub pairs_kept: usize,
    pub pairs_total: usize,
}

impl PolarSweep {
    /// `Σ_k w_k b(θ_k) φ(θ_k) data_k` with shell-wise tail extrapolation.
    pub fn integrate(
        &self,
        data: &[f64],
        kernel: &impl Kernel,
        phi: impl Fn(f64) -> f64,
    ) -> GradedIntegral {
        let mut sums = vec![0.0; self.rule.shells];
        for (node, d) in self.rule.nodes.iter().zip(data) {
            let b = kernel.angular_value(node.theta);
            if b != 0.0 {
                sums[node.shell] += node.weight * b * phi(node.theta) * d;
            }
        }
        GradedIntegral::from_shells(&sums, self.rule.truncated && kernel.singular_at_zero())
    }

    /// The functional `D` for the given angular profile.
    pub fn functional_for(&self, kernel: &impl Kernel) -> GradedIntegral {
        self.integrate(&self.functional, kernel, |_| 1.0)
    }

    /// Angular integral `∫ b φ dσ` on the sweep's own nodes.
    pub fn angular(&self, kernel: &impl Kernel, phi: impl Fn(f64) -> f64) -> GradedIntegral {
        let s = sphere_measure(self.dim - 2);
        let ones = vec![s; self.rule.nodes.len()];
        self.integrate(&ones, kernel, phi)
    }
}

/// One pass over all grid pairs accumulating [`PolarSweep`] data for `D(g, f)`.
pub fn sweep(
    f: &Distribution,
    g: &Distribution,
    spec: NormSpec,
    gamma: f64,
    quad: &QuadratureSpec,
) -> Result<PolarSweep> {
    spec.validate()?;
    f.same_grid(g)?;
    let rule = quad.functional_rule(f.grid.dim);
    let equator = quad.equator(f.grid.dim)?;
    Ok(match f.grid.dim {
        2 => sweep_impl::<2>(f, g, spec, gamma, rule, &equator, quad),
        3 => sweep_impl::<3>(f, g, spec, gamma, rule, &equator, quad),
        _ => unreachable!(),
    })
}

fn sweep_impl<const D: usize>(
    f: &Distribution,
    g: &Distribution,
    spec: NormSpec,
    gamma: f64,
    rule: ThetaRule,
    equator: &EquatorRule,
    quad: &QuadratureSpec,
) -> PolarSweep {
    let grid = f.grid;
    let pts = grid.points::<D>();
    let v2: Vec<f64> = pts.iter().map(|v| v.iter().map(|x| x * x).sum()).collect();
    let alpha = 0.5 * spec.pq();
    let p = spec.p;
    let weight: Vec<f64> = v2.iter().map(|&x| bracket_pow(x, alpha)).collect();
    let h: Vec<f64> = f
        .values
        .iter()
        .zip(&weight)
        .map(|(&x, w)| if x > 0.0 { w * x.powf(p - 1.0) } else { 0.0 })
        .collect();
    let hi = Interpolant::new(&grid, &h, quad.functional_interpolation);
    let thr = quad.prune * f.max() * g.max();
    let polar: Vec<(f64, f64)> = rule.nodes.iter().map(|n| n.theta.sin_cos()).collect();
    let np = polar.len();
    let wu = equator.weight;
    let coeffs = &equator.coeffs;

    let rows: Vec<(Vec<f64>, Vec<f64>, f64, usize)> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut acc_d = vec![0.0; np];
            let mut acc_w = vec![0.0; np];
            let mut loss = 0.0;
            let mut kept = 0;
            let fi = f.values[i];
            if fi == 0.0 {
                return (acc_d, acc_w, loss, kept);
            }
            let fip = fi.powf(p);
            let v = pts[i];
            let (h_i, w_i) = (h[i], weight[i]);
            for (j, vs) in pts.iter().enumerate() {
                let gj = g.values[j];
                if gj == 0.0 || fi * gj < thr {
                    continue;
                }
                kept += 1;
                let mut gv = [0.0; D];
                let mut c = [0.0; D];
                for a in 0..D {
                    gv[a] = v[a] - vs[a];
                    c[a] = 0.5 * (v[a] + vs[a]);
                }
                let gn = crate::geometry::norm(&gv);
                let kin = kinetic(gn, gamma);
                loss += fip * gj * kin * w_i;
                if gn == 0.0 {
                    continue;
                }
                let half = 0.5 * gn;
                let hk = gv.map(|x| 0.5 * x);
                let basis = orthonormal_complement(&gv.map(|x| x / gn));
                let e1 = basis[0].map(|x| half * x);
                let e2 = basis[1].map(|x| half * x);
                let cd = fi * gj * kin * wu;
                let cw = fip * gj * kin * wu;
                for (k, &(s, co)) in polar.iter().enumerate() {
                    let mut dd = 0.0;
                    let mut dw = 0.0;
                    for &(a, b) in coeffs {
                        let mut vp: Vector<D> = [0.0; D];
                        let mut n2 = 0.0;
                        for x in 0..D {
                            vp[x] = c[x] + co * hk[x] + s * (a * e1[x] + b * e2[x]);
                            n2 += vp[x] * vp[x];
                        }
                        dd += hi.eval(&vp) - h_i;
                        dw += bracket_pow(n2, alpha) - w_i;
                    }
                    acc_d[k] += cd * dd;
                    acc_w[k] += cw * dw;
                }
            }
            (acc_d, acc_w, loss, kept)
        })
        .collect();

    let vol2 = grid.cell_volume().powi(2);
    let mut functional = vec![0.0; np];
    let mut weight_change = vec![0.0; np];
    let mut loss_weight = 0.0;
    let mut pairs_kept = 0;
    for (d, w, l, kept) in rows {
        for k in 0..np {
            functional[k] += d[k];
            weight_change[k] += w[k];
        }
        loss_weight += l;
        pairs_kept += kept;
    }
    for x in functional.iter_mut().chain(weight_change.iter_mut()) {
        *x *= vol2;
    }
    PolarSweep {
        rule,
        dim: D,
        spec,
        gamma,
        functional,
        weight_change,
        loss_weight: loss_weight * vol2,
        pairs_kept,
        pairs_total: pts.len() * pts.len(),
    }
}

/// `D(g, f) = ∫ Q(g,f) f^{p-1} ⟨v⟩^{pq} dv` in the transformed form
/// `∫∫∫ [⟨v'⟩^{pq} f^{p-1}(v') - ⟨v⟩^{pq} f^{p-1}(v)] f(v) g(v_*) B dσ dv_* dv`.
pub fn lyapunov_functional(
    f: &Distribution,
    g: &Distribution,
    spec: NormSpec,
    kernel: &impl Kernel,
    quad: &QuadratureSpec,
) -> Result<GradedIntegral> {
    check_inputs(g, f, kernel)?;
    let s = sweep(f, g, spec, kernel.gamma(), quad)?;
    let r = s.functional_for(kernel);
    if !r.converged {
        return Err(Error::NonConvergence {
            what: "Lyapunov functional".into(),
            rate: r.rate,
        });
    }
    Ok(r)
}

/// `Σ_i Q(g,f)(v_i) f_i^{p-1} ⟨v_i⟩^{pq} h^N` from the pointwise operator.
pub fn lyapunov_functional_direct(
    f: &Distribution,
    g: &Distribution,
    spec: NormSpec,
    kernel: &impl Kernel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let q = eval_q(g, f, kernel, quad)?;
    let alpha = 0.5 * spec.pq();
    let s: f64 = f
        .grid
        .squared_norms()
        .iter()
        .zip(&f.values)
        .zip(&q.q_values)
        .filter(|((_, x), _)| **x > 0.0)
        .map(|((v2, x), qv)| qv * x.powf(spec.p - 1.0) * bracket_pow(*v2, alpha))
        .sum();
    Ok(s * f.grid.cell_volume())
}

/// Terms of `R_α` for one equator direction.
#[derive(Debug, Clone, Copy)]
struct RTerms {
    a: f64,
    a1: f64,
    a2: f64,
}

fn r_terms(x: f64, v2: f64, vs2: f64, w: f64) -> RTerms {
    let s = (1.0 - x * x).sqrt();
    RTerms {
        a: 1.0 + v2 * (1.0 - x * x) + vs2 * x * x + 2.0 * x * s * w,
        a1: -2.0 * x * v2 + 2.0 * x * vs2 + 2.0 * w * (s - x * x / s),
        a2: -2.0 * v2 + 2.0 * vs2 + 2.0 * w * (-x / s - 2.0 * x / s - x.powi(3) / (s * s * s)),
    }
}

/// `|v - v_*| u·v_*` for every equator node, `u ⟂ (v - v_*)`.
fn equator_projections<const D: usize>(
    v: &Vector<D>,
    vs: &Vector<D>,
    equator: &EquatorRule,
) -> Vec<f64> {
    let g: Vector<D> = std::array::from_fn(|a| v[a] - vs[a]);
    let gn = crate::geometry::norm(&g);
    if gn == 0.0 {
        return vec![0.0; equator.coeffs.len()];
    }
    let basis = orthonormal_complement(&g.map(|x| x / gn));
    (0..equator.coeffs.len())
        .map(|j| gn * crate::geometry::dot(&equator.direction(j, &basis), vs))
        .collect()
}

fn check_x(x: f64) -> Result<()> {
    if x.abs() > std::f64::consts::FRAC_1_SQRT_2 + 1e-15 {
        return Err(Error::Domain(format!("R_α needs |x| ≤ √2/2, got {x}")));
    }
    Ok(())
}

fn r_family<const D: usize>(
    x: f64,
    v: &Vector<D>,
    vs: &Vector<D>,
    alpha: f64,
    equator: &EquatorRule,
    f: impl Fn(RTerms) -> f64,
) -> Result<f64> {
    check_x(x)?;
    if alpha < 1.0 {
        return Err(invalid(format!("R_α needs α ≥ 1, got {alpha}")));
    }
    let v2 = crate::geometry::dot(v, v);
    let vs2 = crate::geometry::dot(vs, vs);
    let s: f64 = equator_projections(v, vs, equator)
        .into_iter()
        .map(|w| f(r_terms(x, v2, vs2, w)))
        .sum();
    Ok(equator.weight * s)
}

/// `R_α(x) = ∫_{S^{N-2}} [A(x,u)^α - (1+|v|²)^α] du` with
/// `A = 1 + |v|²(1-x²) + |v_*|²x² + 2x√(1-x²)|v-v_*| u·v_*`.
pub fn r_alpha<const D: usize>(
    x: f64,
    v: &Vector<D>,
    vs: &Vector<D>,
    alpha: f64,
    equator: &EquatorRule,
) -> Result<f64> {
    let base = (1.0 + crate::geometry::dot(v, v)).powf(alpha);
    r_family(x, v, vs, alpha, equator, |t| t.a.powf(alpha) - base)
}

/// `R'_α(x) = α ∫ A' A^{α-1} du`.
pub fn r_alpha_prime<const D: usize>(
    x: f64,
    v: &Vector<D>,
    vs: &Vector<D>,
    alpha: f64,
    equator: &EquatorRule,
) -> Result<f64> {
    r_family(x, v, vs, alpha, equator, |t| {
        alpha * t.a1 * t.a.powf(alpha - 1.0)
    })
}

/// `R''_α(x) = α(α-1) ∫ A'² A^{α-2} du + α ∫ A'' A^{α-1} du`.
pub fn r_alpha_second<const D: usize>(
    x: f64,
    v: &Vector<D>,
    vs: &Vector<D>,
    alpha: f64,
    equator: &EquatorRule,
) -> Result<f64> {
    r_family(x, v, vs, alpha, equator, |t| {
        alpha * (alpha - 1.0) * t.a1 * t.a1 * t.a.powf(alpha - 2.0)
            + alpha * t.a2 * t.a.powf(alpha - 1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{AngularKernel, CollisionKernel};
    use crate::state::{maxwellian, mixture, MaxwellianParams, VelocityGrid};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn bimodal(n: usize) -> Distribution {
        let grid = VelocityGrid::new(2, n, 6.0).unwrap();
        mixture(
            grid,
            &[
                MaxwellianParams {
                    rho: 0.6,
                    drift: vec![1.0, 0.0],
                    temperature: 0.5,
                },
                MaxwellianParams {
                    rho: 0.4,
                    drift: vec![-1.0, 0.5],
                    temperature: 0.8,
                },
            ],
        )
        .unwrap()
    }

    fn kernel(gamma: f64) -> CollisionKernel {
        CollisionKernel::new(gamma, AngularKernel::constant(1.0 / (2.0 * PI)), 2).unwrap()
    }

    fn integrate_against(f: &Distribution, q: &[f64], phi: impl Fn(&[f64]) -> f64) -> f64 {
        (0..f.grid.len())
            .map(|i| q[i] * phi(&f.grid.node(i)))
            .sum::<f64>()
            * f.grid.cell_volume()
    }

    /// `¼ ∫∫∫ (φ' + φ'_* - φ - φ_*) f f_* B dσ dv_* dv` on the circle
    /// `σ = (cos s, sin s)`, with a midpoint rule in `s`.
    fn weak_form(f: &Distribution, kernel: &CollisionKernel, phi: &dyn Fn(&[f64]) -> f64) -> f64 {
        let pts = f.grid.points::<2>();
        let m = 256;
        let vol = f.grid.cell_volume();
        let mut total = 0.0;
        for (i, v) in pts.iter().enumerate() {
            for (j, vs) in pts.iter().enumerate() {
                let w = f.values[i] * f.values[j];
                if w < 1e-300 {
                    continue;
                }
                let g = [v[0] - vs[0], v[1] - vs[1]];
                let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if gn == 0.0 {
                    continue;
                }
                let mut s = 0.0;
                for l in 0..m {
                    let ang = 2.0 * PI * (l as f64 + 0.5) / m as f64;
                    let sigma = [ang.cos(), ang.sin()];
                    let cos_t = (sigma[0] * g[0] + sigma[1] * g[1]) / gn;
                    let b = kernel.angular.eval_b(cos_t.clamp(-1.0, 1.0), 2).unwrap();
                    let (vp, vsp) = crate::geometry::collide(v, vs, &sigma);
                    s += b * (phi(&vp) + phi(&vsp) - phi(v) - phi(vs));
                }
                total += w * gn.powf(kernel.gamma) * s * 2.0 * PI / m as f64;
            }
        }
        0.25 * total * vol * vol
    }

    #[test]
    fn maxwellian_is_nearly_annihilated_and_residual_shrinks() {
        let k = kernel(1.0).symmetrize();
        let ratio = |n| {
            let m =
                maxwellian(VelocityGrid::new(2, n, 6.0).unwrap(), 1.0, &[0.0, 0.0], 1.0).unwrap();
            let r = eval_q(&m, &m, &k, &QuadratureSpec::default()).unwrap();
            let vol = m.grid.cell_volume();
            CollisionResult::l1(&r.q_values, vol) / CollisionResult::l1(&r.loss, vol)
        };
        let (coarse, fine) = (ratio(16), ratio(32));
        assert!(fine < 5e-2, "fine ratio {fine}");
        assert!(fine < 0.6 * coarse, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn zero_inputs_give_zero_arrays() {
        let f = bimodal(16);
        let z = Distribution::zeros(f.grid);
        let k = kernel(1.0).symmetrize();
        for (a, b) in [(&z, &f), (&f, &z)] {
            let r = eval_q(a, b, &k, &QuadratureSpec::default()).unwrap();
            assert!(r
                .q_values
                .iter()
                .chain(&r.gain)
                .chain(&r.loss)
                .all(|x| *x == 0.0));
        }
    }

    #[test]
    fn gain_minus_loss_is_q() {
        let f = bimodal(16);
        let r = eval_q(
            &f,
            &f,
            &kernel(0.5).symmetrize(),
            &QuadratureSpec::default(),
        )
        .unwrap();
        for i in 0..f.grid.len() {
            assert_eq!(r.q_values[i], r.gain[i] - r.loss[i]);
        }
    }

    type TestFn = Box<dyn Fn(&[f64]) -> f64>;

    #[test]
    fn weak_form_matches_independent_oracle() {
        let f = bimodal(24);
        let tests: Vec<(&str, TestFn)> = vec![
            ("1", Box::new(|_| 1.0)),
            ("vx", Box::new(|v| v[0])),
            ("vy", Box::new(|v| v[1])),
            ("|v|²", Box::new(|v| v[0] * v[0] + v[1] * v[1])),
            (
                "<v>⁴",
                Box::new(|v| (1.0 + v[0] * v[0] + v[1] * v[1]).powi(2)),
            ),
        ];
        for gamma in [0.0, 1.0] {
            let k = kernel(gamma);
            let spec = QuadratureSpec {
                interpolation: Interpolation::CatmullRom,
                ..Default::default()
            };
            let r = eval_q(&f, &f, &k.symmetrize(), &spec).unwrap();
            for (name, phi) in &tests {
                let scale = integrate_against(&f, &r.loss, |v| phi(v).abs());
                let got = integrate_against(&f, &r.q_values, phi);
                let want = weak_form(&f, &k, phi.as_ref());
                assert!(
                    (got - want).abs() < 1e-2 * scale,
                    "γ={gamma} φ={name}: {got} vs {want} (scale {scale})"
                );
            }
        }
    }

    #[test]
    fn symmetrized_kernel_gives_the_same_operator() {
        let f = bimodal(16);
        let base = CollisionKernel::new(1.0, AngularKernel::singular(0.3, 0.5), 2).unwrap();
        let spec = QuadratureSpec::default();
        let full = eval_q(&f, &f, &base, &spec).unwrap();
        let sym = eval_q(&f, &f, &base.symmetrize(), &spec).unwrap();
        for phi in [
            &(|_: &[f64]| 1.0) as &dyn Fn(&[f64]) -> f64,
            &|v| v[0],
            &|v| v[1],
            &|v| v[0] * v[0] + v[1] * v[1],
            &|v| (1.0 + v[0] * v[0] + v[1] * v[1]).powi(2),
        ] {
            let scale = integrate_against(&f, &sym.loss, |v| phi(v).abs());
            let a = integrate_against(&f, &full.q_values, phi);
            let b = integrate_against(&f, &sym.q_values, phi);
            assert!((a - b).abs() < 1e-3 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn pointwise_q_rejects_grazing_singularity() {
        let f = bimodal(16);
        let k = CollisionKernel::new(0.0, AngularKernel::singular(1.0, -1.5), 2)
            .unwrap()
            .symmetrize();
        assert!(matches!(
            eval_q(&f, &f, &k, &QuadratureSpec::default()),
            Err(Error::Domain(_))
        ));
        let (cut, _) = k.split(0.2).unwrap();
        assert!(eval_q(&f, &f, &cut, &QuadratureSpec::default()).is_ok());
    }

    #[test]
    fn functional_is_linear_in_g_and_vanishes_for_zero_f() {
        let f = bimodal(16);
        let g = maxwellian(f.grid, 1.0, &[0.3, 0.0], 1.2).unwrap();
        let k = kernel(1.0).symmetrize();
        let spec = NormSpec::new(2.0, 1.0).unwrap();
        let quad = QuadratureSpec::default();
        let d = lyapunov_functional(&f, &g, spec, &k, &quad).unwrap().value;
        let d3 = lyapunov_functional(&f, &g.scaled(3.0), spec, &k, &quad)
            .unwrap()
            .value;
        assert!((d3 - 3.0 * d).abs() <= 1e-12 * d.abs());
        let z = Distribution::zeros(f.grid);
        assert_eq!(
            lyapunov_functional(&z, &g, spec, &k, &quad).unwrap().value,
            0.0
        );
    }

    #[test]
    fn transformed_functional_matches_direct_form_for_cutoff() {
        let k = kernel(1.0).symmetrize();
        let spec = NormSpec::new(1.5, 2.0).unwrap();
        let quad = QuadratureSpec {
            interpolation: Interpolation::CatmullRom,
            ..Default::default()
        };
        let err = |n| {
            let f = bimodal(n);
            let a = lyapunov_functional(&f, &f, spec, &k, &quad).unwrap().value;
            let b = lyapunov_functional_direct(&f, &f, spec, &k, &quad).unwrap();
            ((a - b) / b).abs()
        };
        let (coarse, fine) = (err(16), err(24));
        assert!(fine < 2e-2, "fine {fine}");
        assert!(fine < coarse, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn singular_functional_converges_under_graded_refinement() {
        let f = bimodal(16);
        for (nu, p, q) in [(-1.5, 2.0, 1.0), (-2.5, 2.0, 2.0)] {
            let k = CollisionKernel::new(1.0, AngularKernel::singular(1.0, nu), 2)
                .unwrap()
                .symmetrize();
            let spec = NormSpec::new(p, q).unwrap();
            let value = |theta_min| {
                let mut quad = QuadratureSpec::default();
                quad.angular.grading.theta_min = theta_min;
                lyapunov_functional(&f, &f, spec, &k, &quad).unwrap()
            };
            let (a, b) = (value(1e-3), value(1e-5));
            assert!(a.converged && b.converged);
            assert!(
                ((a.value - b.value) / b.value).abs() < 1e-3,
                "ν={nu}: {} vs {}",
                a.value,
                b.value
            );
        }
    }

    fn eq3() -> EquatorRule {
        EquatorRule::new(3, 16).unwrap()
    }

    #[test]
    fn r_alpha_vanishes_at_zero_and_for_equal_velocities() {
        let v = [0.3, -1.2, 0.7];
        let vs = [1.5, 0.2, -0.4];
        for alpha in [1.0, 1.5, 2.0, 3.0] {
            assert!(r_alpha(0.0, &v, &vs, alpha, &eq3()).unwrap().abs() < 1e-12);
            for x in [0.1, 0.4, FRAC_1_SQRT_2] {
                assert!(r_alpha(x, &v, &v, alpha, &eq3()).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn r_alpha_at_zero_velocity_has_closed_form() {
        let vs = [1.5, 0.2, -0.4];
        let n2: f64 = vs.iter().map(|x| x * x).sum();
        for alpha in [1.0, 2.5] {
            for x in [0.2, 0.6] {
                let want = 2.0 * PI * ((1.0 + n2 * x * x).powf(alpha) - 1.0);
                let got = r_alpha(x, &[0.0; 3], &vs, alpha, &eq3()).unwrap();
                assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
                assert!(got >= 0.0);
            }
        }
    }

    #[test]
    fn r_alpha_is_even_and_rejects_large_x() {
        let v = [0.3, -1.2];
        let vs = [1.5, 0.2];
        let eq = EquatorRule::new(2, 16).unwrap();
        for x in [0.1, 0.5, 0.7] {
            let a = r_alpha(x, &v, &vs, 2.0, &eq).unwrap();
            let b = r_alpha(-x, &v, &vs, 2.0, &eq).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        assert!(r_alpha(0.8, &v, &vs, 2.0, &eq).is_err());
        assert!(r_alpha(0.3, &v, &vs, 0.5, &eq).is_err());
    }

    #[test]
    fn r_alpha_derivatives_match_finite_differences() {
        let v = [0.3, -1.2, 0.7];
        let vs = [1.5, 0.2, -0.4];
        let h = 1e-5;
        for alpha in [1.0, 1.5, 3.0] {
            for x in [-0.5, 0.05, 0.3, 0.6] {
                let r = |y| r_alpha(y, &v, &vs, alpha, &eq3()).unwrap();
                let d1 = r_alpha_prime(x, &v, &vs, alpha, &eq3()).unwrap();
                let d2 = r_alpha_second(x, &v, &vs, alpha, &eq3()).unwrap();
                let fd1 = (r(x + h) - r(x - h)) / (2.0 * h);
                let fd2 = (r(x + h) - 2.0 * r(x) + r(x - h)) / (h * h);
                assert!(
                    (d1 - fd1).abs() < 1e-6 * d1.abs().max(1.0),
                    "α={alpha} x={x}: {d1} vs {fd1}"
                );
                assert!(
                    (d2 - fd2).abs() < 1e-3 * d2.abs().max(1.0),
                    "α={alpha} x={x}: {d2} vs {fd2}"
                );
            }
        }
    }
}

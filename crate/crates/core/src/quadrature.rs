//! One-dimensional rules used for the polar angle of the collision sphere.
//!
//! Two families are provided: plain Gauss-Legendre panels for bounded
//! angular kernels, and geometrically graded shells `[hi/ρ^{k+1}, hi/ρ^k]`
//! for kernels that blow up at grazing angles. Graded sums keep one partial
//! sum per shell so the truncated part below `θ_min` can be extrapolated from
//! the observed geometric decay of the innermost shells.

use serde::{Deserialize, Serialize};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Geometric grading of the polar angle near `θ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grading {
    /// Ratio between consecutive shell boundaries (> 1).
    pub ratio: f64,
    /// Truncation angle; the part below it is extrapolated, not sampled.
    pub theta_min: f64,
    /// Gauss-Legendre points per shell.
    pub points_per_shell: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Grading {
            ratio: 2.0,
            theta_min: 1e-6,
            points_per_shell: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaNode {
    pub theta: f64,
    /// `dθ` weight times `(sin θ)^{N-2}`.
    pub weight: f64,
    pub shell: usize,
}

/// Polar-angle quadrature for `∫ φ(θ) (sin θ)^{N-2} dθ` over `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRule {
    pub nodes: Vec<ThetaNode>,
    pub shells: usize,
    /// Boundaries `hi = b_0 > b_1 > ... > b_shells`.
    pub boundaries: Vec<f64>,
    /// True when `[0, b_shells)` was cut off and must be extrapolated.
    pub truncated: bool,
}

impl ThetaRule {
    /// `panels` equal Gauss-Legendre panels with `points` nodes each.
    pub fn gauss(lo: f64, hi: f64, panels: usize, points: usize, dim: usize) -> ThetaRule {
        let (x, w) = gauss_legendre(points);
        let mut nodes = Vec::with_capacity(panels * points);
        let width = (hi - lo) / panels as f64;
        for p in 0..panels {
            let a = lo + p as f64 * width;
            for (xi, wi) in x.iter().zip(&w) {
                let theta = a + 0.5 * width * (xi + 1.0);
                let weight = 0.5 * width * wi * theta.sin().powi(dim as i32 - 2);
                nodes.push(ThetaNode {
                    theta,
                    weight,
                    shell: 0,
                });
            }
        }
        ThetaRule {
            nodes,
            shells: 1,
            boundaries: vec![hi, lo],
            truncated: false,
        }
    }

    /// Geometric shells from `hi` down to `lo`, or down to (at most) `θ_min`
    /// when `lo < θ_min`. In the latter case the last boundary is
    /// `hi/ρ^K ≤ θ_min`, so every shell has the same aspect ratio.
    pub fn graded(lo: f64, hi: f64, grading: &Grading, dim: usize) -> ThetaRule {
        let rho = grading.ratio;
        let mut boundaries = vec![hi];
        let truncated = lo < grading.theta_min;
        if truncated {
            let k = ((hi / grading.theta_min).ln() / rho.ln()).ceil().max(1.0) as i32;
            for j in 1..=k {
                boundaries.push(hi / rho.powi(j));
            }
        } else {
            let mut b = hi / rho;
            // Merge a sliver shell into its neighbour.
            while b > lo * (1.0 + 1e-9) && b / lo > rho.sqrt() {
                boundaries.push(b);
                b /= rho;
            }
            boundaries.push(lo);
        }
        let (x, w) = gauss_legendre(grading.points_per_shell);
        let mut nodes = Vec::new();
        for s in 0..boundaries.len() - 1 {
            let (b, a) = (boundaries[s], boundaries[s + 1]);
            for (xi, wi) in x.iter().zip(&w) {
                let theta = a + 0.5 * (b - a) * (xi + 1.0);
                let weight = 0.5 * (b - a) * wi * theta.sin().powi(dim as i32 - 2);
                nodes.push(ThetaNode {
                    theta,
                    weight,
                    shell: s,
                });
            }
        }
        ThetaRule {
            shells: boundaries.len() - 1,
            nodes,
            boundaries,
            truncated,
        }
    }

    /// Sum of `φ(θ)·weight` split per shell.
    pub fn shell_sums(&self, mut phi: impl FnMut(f64) -> f64) -> Vec<f64> {
        let mut sums = vec![0.0; self.shells];
        for node in &self.nodes {
            sums[node.shell] += phi(node.theta) * node.weight;
        }
        sums
    }

    pub fn integrate(&self, phi: impl FnMut(f64) -> f64) -> GradedIntegral {
        GradedIntegral::from_shells(&self.shell_sums(phi), self.truncated)
    }

    /// Index of the first shell lying entirely below `theta`, i.e. shells
    /// `0..index` cover `[theta, hi]` when `theta` is a boundary.
    pub fn shells_above(&self, theta: f64) -> usize {
        self.boundaries
            .iter()
            .position(|&b| b < theta * (1.0 - 1e-12))
            .map(|p| p - 1)
            .unwrap_or(self.shells)
    }
}

/// Result of a graded sum with tail extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradedIntegral {
    /// Sampled part plus extrapolated tail.
    pub value: f64,
    pub tail: f64,
    /// Disagreement between two tail extrapolations.
    pub error: f64,
    /// Ratio of the two innermost shell sums (0 when not truncated).
    pub rate: f64,
    pub converged: bool,
}

impl GradedIntegral {
    pub fn exact(value: f64) -> Self {
        GradedIntegral {
            value,
            tail: 0.0,
            error: 0.0,
            rate: 0.0,
            converged: true,
        }
    }

    /// Cauchy criterion on the innermost shells: the sums must decay
    /// geometrically (ratio in `(0, 1)`), in which case the remaining tail is
    /// `S_K r/(1-r)`. Shell sums that vanish to round-off count as converged.
    pub fn from_shells(sums: &[f64], truncated: bool) -> Self {
        let sampled: f64 = sums.iter().sum();
        if !truncated || sums.len() < 3 {
            return GradedIntegral::exact(sampled);
        }
        let k = sums.len() - 1;
        let scale = sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let last = sums[k];
        if scale == 0.0 || last.abs() <= 1e-14 * scale {
            return GradedIntegral {
                rate: 0.0,
                ..GradedIntegral::exact(sampled)
            };
        }
        let r1 = last / sums[k - 1];
        let r2 = sums[k - 1] / sums[k - 2];
        if !(r1 > 0.0 && r1 < 1.0) {
            return GradedIntegral {
                value: sampled,
                tail: f64::NAN,
                error: f64::INFINITY,
                rate: r1,
                converged: false,
            };
        }
        let tail = last * r1 / (1.0 - r1);
        let alt = if r2 > 0.0 && r2 < 1.0 {
            last * r2 / (1.0 - r2)
        } else {
            2.0 * tail
        };
        GradedIntegral {
            value: sampled + tail,
            tail,
            error: (tail - alt).abs(),
            rate: r1,
            converged: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} {q} vs {exact}");
            }
        }
    }

    #[test]
    fn graded_rule_extrapolates_power_law_tail() {
        // ∫_0^{π/2} θ^{-1/2} dθ = 2 (π/2)^{1/2}
        let rule = ThetaRule::graded(0.0, std::f64::consts::FRAC_PI_2, &Grading::default(), 2);
        let r = rule.integrate(|t| t.powf(-0.5));
        assert!(r.converged);
        assert_relative_eq!(
            r.value,
            2.0 * std::f64::consts::FRAC_PI_2.sqrt(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn graded_rule_flags_log_divergence() {
        let rule = ThetaRule::graded(0.0, 1.0, &Grading::default(), 2);
        let r = rule.integrate(|t| 1.0 / t);
        assert!(!r.converged);
        assert_relative_eq!(r.rate, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn graded_rule_with_positive_lower_limit_is_not_truncated() {
        let rule = ThetaRule::graded(0.1, 1.5, &Grading::default(), 3);
        assert!(!rule.truncated);
        let r = rule.integrate(|_| 1.0);
        assert_relative_eq!(r.value, -1.5f64.cos() + 0.1f64.cos(), max_relative = 1e-9);
    }

    #[test]
    fn shells_above_aligns_with_boundaries() {
        let hi = std::f64::consts::FRAC_PI_2;
        let rule = ThetaRule::graded(0.0, hi, &Grading::default(), 2);
        assert_eq!(rule.shells_above(hi), 0);
        assert_eq!(rule.shells_above(hi / 2.0), 1);
        assert_eq!(rule.shells_above(hi / 8.0), 3);
        let s = rule.shells_above(hi / 8.0);
        assert!((rule.boundaries[s] - hi / 8.0).abs() < 1e-15);
    }
}

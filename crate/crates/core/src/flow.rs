//! Explicit time integration of `∂_t f = Q(f,f) + ε Δ_v f` for cutoff
//! kernels, norm trajectories, and the envelope checks built on them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::collision::{eval_q, QuadratureSpec};
use crate::error::{invalid, Error, Result};
use crate::inequalities::{Convergence, InequalityReport};
use crate::interp::Interpolation;
use crate::kernel::{angular_mass, angular_sin2_moment, AngularQuadrature, Kernel};
use crate::state::{
    entropy, l1_moment, mollify, weighted_lp_norm, Distribution, NormSpec, VelocityGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    ExplicitEuler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    /// Time step; `None` picks the loss-rate bound of the initial datum.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Diffusion coefficient of the regularized equation.
    pub eps_reg: f64,
    /// Gaussian mollifier width applied to the initial datum.
    pub mollify: f64,
    /// Clip negative values after each step and record the removed mass.
    pub clip_negative: bool,
    /// Rescale every step to the initial mass.
    pub rescale_mass: bool,
    /// Record diagnostics every this many steps (the final time is always recorded).
    pub sample_every: usize,
    pub quadrature: QuadratureSpec,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: None,
            t_final: 1.0,
            scheme: Scheme::ExplicitEuler,
            eps_reg: 0.0,
            mollify: 0.0,
            clip_negative: true,
            rescale_mass: false,
            sample_every: 1,
            quadrature: QuadratureSpec {
                interpolation: Interpolation::CatmullRom,
                ..QuadratureSpec::default()
            },
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid(format!(
                "t_final must be ≥ 0, got {}",
                self.t_final
            )));
        }
        if !(self.eps_reg >= 0.0 && self.eps_reg.is_finite()) {
            return Err(invalid(format!(
                "eps_reg must be ≥ 0, got {}",
                self.eps_reg
            )));
        }
        if !(self.mollify >= 0.0 && self.mollify.is_finite()) {
            return Err(invalid(format!(
                "mollifier width must be ≥ 0, got {}",
                self.mollify
            )));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every must be at least 1"));
        }
        Ok(())
    }
}

/// `0.5 / ν_max` with `ν_max = ‖f‖_{L¹_γ} sup⟨v⟩^γ ∫ b dσ`, which bounds the
/// loss frequency at every node; further limited by `h²/(4Nε)` when
/// diffusion is on.
pub fn stable_dt(
    f: &Distribution,
    kernel: &impl Kernel,
    eps_reg: f64,
    aq: &AngularQuadrature,
) -> Result<f64> {
    let gamma = kernel.gamma();
    let sup = f
        .grid
        .squared_norms()
        .into_iter()
        .fold(0.0f64, |m, v2| m.max((1.0 + v2).powf(0.5 * gamma)));
    let nu = l1_moment(f, gamma) * sup * angular_mass(kernel, aq)?;
    let mut dt = if nu > 0.0 { 0.5 / nu } else { f64::INFINITY };
    if eps_reg > 0.0 {
        let h = f.grid.h();
        dt = dt.min(h * h / (4.0 * f.grid.dim as f64 * eps_reg));
    }
    Ok(dt)
}

/// Centered second-order Laplacian with zero values outside the box.
pub fn laplacian(f: &Distribution) -> Vec<f64> {
    let grid = f.grid;
    let n = grid.n;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; f.values.len()];
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        for (idx, o) in out.iter_mut().enumerate() {
            let i = (idx / stride) % n;
            let c = f.values[idx];
            let lo = if i > 0 { f.values[idx - stride] } else { 0.0 };
            let hi = if i + 1 < n {
                f.values[idx + stride]
            } else {
                0.0
            };
            *o += (lo - 2.0 * c + hi) * inv_h2;
        }
    }
    out
}

fn rhs(f: &Distribution, kernel: &impl Kernel, config: &FlowConfig) -> Result<Vec<f64>> {
    let mut q = eval_q(f, f, kernel, &config.quadrature)?.q_values;
    if config.eps_reg > 0.0 {
        for (a, l) in q.iter_mut().zip(laplacian(f)) {
            *a += config.eps_reg * l;
        }
    }
    Ok(q)
}

fn axpy(f: &Distribution, a: f64, k: &[f64]) -> Distribution {
    Distribution {
        grid: f.grid,
        values: f.values.iter().zip(k).map(|(x, y)| x + a * y).collect(),
    }
}

/// Result of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub f: Distribution,
    /// Mass removed by clipping negative values.
    pub clipped_mass: f64,
}

/// One step of the configured scheme. Aborts when the sup norm grows more
/// than tenfold.
pub fn step(
    f: &Distribution,
    dt: f64,
    kernel: &impl Kernel,
    config: &FlowConfig,
) -> Result<StepOutcome> {
    if kernel.singular_at_zero() {
        return Err(invalid(
            "time integration needs a cutoff kernel (angular profile integrable at θ = 0)",
        ));
    }
    if dt == 0.0 {
        return Ok(StepOutcome {
            f: f.clone(),
            clipped_mass: 0.0,
        });
    }
    let mut next = match config.scheme {
        Scheme::ExplicitEuler => axpy(f, dt, &rhs(f, kernel, config)?),
        Scheme::Rk4 => {
            let k1 = rhs(f, kernel, config)?;
            let k2 = rhs(&axpy(f, 0.5 * dt, &k1), kernel, config)?;
            let k3 = rhs(&axpy(f, 0.5 * dt, &k2), kernel, config)?;
            let k4 = rhs(&axpy(f, dt, &k3), kernel, config)?;
            let k: Vec<f64> = (0..k1.len())
                .map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0)
                .collect();
            axpy(f, dt, &k)
        }
    };
    let old_sup = f.max();
    let new_sup = next.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !new_sup.is_finite() || new_sup > 10.0 * old_sup {
        return Err(Error::Unstable {
            time: f64::NAN,
            detail: format!("sup norm grew from {old_sup:e} to {new_sup:e}"),
        });
    }
    let mut clipped = 0.0;
    if config.clip_negative {
        for x in next.values.iter_mut().filter(|x| **x < 0.0) {
            clipped -= *x;
            *x = 0.0;
        }
        clipped *= f.grid.cell_volume();
    }
    if config.rescale_mass {
        let m = next.mass();
        if m > 0.0 {
            let s = f.mass() / m;
            next.values.iter_mut().for_each(|x| *x *= s);
        }
    }
    Ok(StepOutcome {
        f: next,
        clipped_mass: clipped,
    })
}

/// Diagnostics at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
    pub entropy: f64,
    /// `‖f‖_{L^p_q}` for each configured `(p, q)`.
    pub lp_norms: Vec<f64>,
    /// `‖f‖_{L¹_s}` for each configured `s`.
    pub l1_moments: Vec<f64>,
    /// Total mass removed by clipping so far.
    pub clipped_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub norms: Vec<NormSpec>,
    pub moments: Vec<f64>,
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub steps: usize,
    pub final_state: Distribution,
}

fn diagnose(f: &Distribution, t: f64, norms: &[NormSpec], moments: &[f64], clipped: f64) -> Sample {
    Sample {
        t,
        mass: f.mass(),
        momentum: f.momentum(),
        energy: f.energy(),
        entropy: entropy(f),
        lp_norms: norms.iter().map(|s| weighted_lp_norm(f, *s)).collect(),
        l1_moments: moments.iter().map(|s| l1_moment(f, *s)).collect(),
        clipped_mass: clipped,
    }
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn norm_series(&self, spec: NormSpec) -> Option<Vec<f64>> {
        let i = self
            .norms
            .iter()
            .position(|s| (s.p - spec.p).abs() < 1e-12 && (s.q - spec.q).abs() < 1e-12)?;
        Some(self.samples.iter().map(|s| s.lp_norms[i]).collect())
    }

    pub fn moment_series(&self, order: f64) -> Option<Vec<f64>> {
        let i = self
            .moments
            .iter()
            .position(|s| (s - order).abs() < 1e-12)?;
        Some(self.samples.iter().map(|s| s.l1_moments[i]).collect())
    }

    /// Copy restricted to samples with `t ≤ t_max`.
    pub fn truncated(&self, t_max: f64) -> Trajectory {
        Trajectory {
            samples: self
                .samples
                .iter()
                .filter(|s| s.t <= t_max + 1e-12)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Samples with `lo ≤ t ≤ hi`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.t >= lo - 1e-12 && s.t <= hi + 1e-12)
            .collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "mass".to_string()];
        let dim = self.final_state.grid.dim;
        h.extend((0..dim).map(|i| format!("momentum_{i}")));
        h.push("energy".into());
        h.push("entropy".into());
        h.extend(
            self.norms
                .iter()
                .map(|s| format!("lp_norm_p{}_q{}", s.p, s.q)),
        );
        h.extend(self.moments.iter().map(|s| format!("l1_moment_s{s}")));
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header().join(",");
        out.push('\n');
        for s in &self.samples {
            let mut row = vec![s.t, s.mass];
            row.extend(&s.momentum);
            row.push(s.energy);
            row.push(s.entropy);
            row.extend(&s.lp_norms);
            row.extend(&s.l1_moments);
            let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Integrates from `f0` to `config.t_final`, recording diagnostics at
/// `t = 0`, every `sample_every` steps and at the final time.
pub fn simulate(
    f0: &Distribution,
    kernel: &impl Kernel,
    config: &FlowConfig,
    norms: &[NormSpec],
    moments: &[f64],
) -> Result<Trajectory> {
    Ok(simulate_with_snapshots(f0, kernel, config, norms, moments, &[])?.0)
}

/// As [`simulate`], also returning the state at each requested time (steps
/// are shortened to land on them; each is also recorded as a sample).
pub fn simulate_with_snapshots(
    f0: &Distribution,
    kernel: &impl Kernel,
    config: &FlowConfig,
    norms: &[NormSpec],
    moments: &[f64],
    snapshot_times: &[f64],
) -> Result<(Trajectory, Vec<Distribution>)> {
    config.validate()?;
    for s in norms {
        s.validate()?;
    }
    if snapshot_times.windows(2).any(|w| w[1] <= w[0])
        || snapshot_times
            .iter()
            .any(|t| !(*t >= 0.0 && *t <= config.t_final))
    {
        return Err(invalid(
            "snapshot times must be increasing and inside [0, t_final]",
        ));
    }
    if kernel.singular_at_zero() {
        return Err(invalid(
            "time integration needs a cutoff kernel (angular profile integrable at θ = 0)",
        ));
    }
    let mut f = mollify(f0, config.mollify)?;
    let bound = stable_dt(&f, kernel, config.eps_reg, &config.quadrature.angular)?;
    let dt = match config.dt {
        Some(dt) if dt > bound * (1.0 + 1e-9) => {
            return Err(invalid(format!(
                "dt = {dt} exceeds the stability bound {bound}"
            )));
        }
        Some(dt) => dt,
        None if bound.is_finite() => bound,
        None => config.t_final.max(1.0),
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut t = 0.0;
    let mut clipped = 0.0;
    let mut samples = vec![diagnose(&f, t, norms, moments, clipped)];
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut pending = snapshot_times.iter().copied().peekable();
    while pending.peek().is_some_and(|s| close(*s, 0.0)) {
        snapshots.push(f.clone());
        pending.next();
    }
    let mut steps = 0;
    while t < config.t_final && !close(t, config.t_final) {
        let stop = pending.peek().copied().unwrap_or(config.t_final);
        let (h, landing) = if stop - t <= dt * (1.0 + 1e-12) {
            (stop - t, Some(stop))
        } else {
            (dt, None)
        };
        let out = step(&f, h, kernel, config).map_err(|e| match e {
            Error::Unstable { detail, .. } => Error::Unstable { time: t, detail },
            other => other,
        })?;
        f = out.f;
        clipped += out.clipped_mass;
        t = landing.unwrap_or(t + dt);
        steps += 1;
        let snap = pending.peek().is_some_and(|s| close(*s, t));
        if steps % config.sample_every == 0 || close(t, config.t_final) || snap {
            samples.push(diagnose(&f, t, norms, moments, clipped));
        }
        if snap {
            snapshots.push(f.clone());
            pending.next();
        }
    }
    let traj = Trajectory {
        norms: norms.to_vec(),
        moments: moments.to_vec(),
        samples,
        dt,
        steps,
        final_state: f,
    };
    Ok((traj, snapshots))
}

/// `y₀ e^{Ct}`.
pub fn gronwall_envelope(y0: f64, c: f64, t: f64) -> f64 {
    if y0 == 0.0 {
        return 0.0;
    }
    y0 * (c * t).exp()
}

/// `[C / (K_T (1 - e^{-Cγt/(pr)}))]^{r/γ}`.
pub fn bernoulli_envelope(t: f64, c: f64, k_t: f64, p: f64, r: f64, gamma: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!(
            "the envelope is defined for t > 0, got t = {t}"
        )));
    }
    if !(gamma > 0.0 && c > 0.0 && k_t > 0.0 && p >= 1.0 && r > 0.0) {
        return Err(invalid(
            "the envelope needs γ > 0, C > 0, K_T > 0, p ≥ 1 and r > 0",
        ));
    }
    let denom = -(-c * gamma * t / (p * r)).exp_m1();
    Ok((c / (k_t * denom)).powf(r / gamma))
}

/// `max{y(τ), (C/K)^{1/ε}}`.
pub fn longtime_bound(y_tau: f64, c_plus: f64, k_minus: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    if !(c_plus > 0.0 && k_minus > 0.0) {
        return Err(invalid("C⁺ and K⁻ must be positive"));
    }
    Ok(y_tau.max((c_plus / k_minus).powf(1.0 / epsilon)))
}

/// Constants of `dy/dt ≤ C y - K ‖f‖^p_{L^p_{r+γ/p}}` for `y = ‖f‖^p_{L^p_r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    pub r: f64,
    pub c: f64,
    pub k: f64,
}

/// Inputs of [`check_apriori`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriSpec {
    pub spec: NormSpec,
    pub gamma: f64,
    /// Constants for the weight `q` itself (`r = spec.q`).
    pub main: DecayConstants,
    /// Weights `r > q` for the appearance envelope.
    pub appearance: Vec<DecayConstants>,
    /// Time window of the appearance check.
    pub window: (f64, f64),
    /// Exponent `e` in `K_T = K (sup_t ‖f‖_{L^p})^{-e}`; `None` means `γ/(rq)`.
    pub kt_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriOutcome {
    pub differential: InequalityReport,
    pub gronwall: InequalityReport,
    /// One report per appearance weight; empty when `γ = 0`.
    pub appearance: Vec<InequalityReport>,
}

/// Pointwise series check `lhs_i ≤ rhs_i + tol_i`; the report carries the
/// sample with the smallest slack and the first violating time.
fn series_report(
    name: &str,
    times: &[f64],
    lhs: &[f64],
    rhs: &[f64],
    extra_tol: &[f64],
) -> InequalityReport {
    let mut worst = 0;
    let mut worst_slack = f64::INFINITY;
    let mut first_violation = None;
    for i in 0..lhs.len() {
        let tol = 1e-6 * lhs[i].abs().max(rhs[i].abs()).max(1.0) + extra_tol[i];
        let ok = lhs[i] <= rhs[i] + tol || (rhs[i] == f64::INFINITY && lhs[i].is_finite());
        let slack = (rhs[i] - lhs[i] + tol) / rhs[i].abs().max(lhs[i].abs()).max(1e-300);
        if slack < worst_slack {
            worst_slack = slack;
            worst = i;
        }
        if !ok && first_violation.is_none() {
            first_violation = Some(times[i]);
        }
    }
    if lhs.is_empty() {
        return InequalityReport::new(name, 0.0, 0.0, Convergence::exact());
    }
    let conv = Convergence {
        error: extra_tol[worst],
        rate: 0.0,
        converged: true,
    };
    let mut r = InequalityReport::new(name, lhs[worst], rhs[worst], conv)
        .constant("t_worst", times[worst])
        .constant("samples", lhs.len() as f64);
    if let Some(t) = first_violation {
        r = r.constant("first_violation_time", t);
        r.pass = false;
    } else {
        r.pass = true;
    }
    r
}

/// Differential inequality (forward differences against the interval
/// average of the right side), Gronwall dominance, and for `γ > 0` the
/// appearance envelope for each `r > q` on the configured window.
pub fn check_apriori(traj: &Trajectory, a: &AprioriSpec) -> Result<AprioriOutcome> {
    let p = a.spec.p;
    let missing = |s: NormSpec| invalid(format!("trajectory lacks ‖f‖ in L^{}_{}", s.p, s.q));
    let y: Vec<f64> = traj
        .norm_series(a.spec)
        .ok_or_else(|| missing(a.spec))?
        .iter()
        .map(|x| x.powf(p))
        .collect();
    let shifted = NormSpec {
        p,
        q: a.spec.q + a.gamma / p,
    };
    let z: Vec<f64> = traj
        .norm_series(shifted)
        .ok_or_else(|| missing(shifted))?
        .iter()
        .map(|x| x.powf(p))
        .collect();
    let t = traj.times();
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("trajectory times must be strictly increasing"));
    }

    let n = t.len().saturating_sub(1);
    let slopes: Vec<f64> = (0..n)
        .map(|i| (y[i + 1] - y[i]) / (t[i + 1] - t[i]))
        .collect();
    let bound: Vec<f64> = (0..n)
        .map(|i| a.main.c * 0.5 * (y[i] + y[i + 1]) - a.main.k * 0.5 * (z[i] + z[i + 1]))
        .collect();
    let tol: Vec<f64> = (0..n)
        .map(|i| {
            let prev = if i > 0 {
                (slopes[i] - slopes[i - 1]).abs()
            } else {
                0.0
            };
            let next = if i + 1 < n {
                (slopes[i + 1] - slopes[i]).abs()
            } else {
                0.0
            };
            prev.max(next)
        })
        .collect();
    let differential = series_report("apriori", &t[..n], &slopes, &bound, &tol)
        .constant("C", a.main.c)
        .constant("K", a.main.k);

    let env: Vec<f64> = t
        .iter()
        .map(|s| gronwall_envelope(y[0], a.main.c, *s))
        .collect();
    let zeros = vec![1e-12 * y[0]; t.len()];
    let gronwall = series_report("gronwall", &t, &y, &env, &zeros)
        .constant("C", a.main.c)
        .constant("y0", y[0]);

    let mut appearance = Vec::new();
    if a.gamma > 0.0 {
        let plain = NormSpec { p, q: 0.0 };
        let sup = traj
            .norm_series(plain)
            .ok_or_else(|| missing(plain))?
            .into_iter()
            .fold(0.0f64, f64::max);
        for d in &a.appearance {
            let spec_r = NormSpec { p, q: d.r };
            let norm_r = traj.norm_series(spec_r).ok_or_else(|| missing(spec_r))?;
            let e = a.kt_exponent.unwrap_or(a.gamma / (d.r * a.spec.q));
            let k_t = d.k * sup.powf(-e);
            let mut ts = Vec::new();
            let mut lhs = Vec::new();
            let mut rhs = Vec::new();
            for (i, s) in t.iter().enumerate() {
                if *s >= a.window.0 - 1e-12 && *s <= a.window.1 + 1e-12 && *s > 0.0 {
                    ts.push(*s);
                    lhs.push(norm_r[i]);
                    rhs.push(bernoulli_envelope(*s, d.c, k_t, p, d.r, a.gamma)?);
                }
            }
            let tol = vec![0.0; ts.len()];
            appearance.push(
                series_report("bernoulli", &ts, &lhs, &rhs, &tol)
                    .case(format!("r={}", d.r))
                    .constant("r", d.r)
                    .constant("C", d.c)
                    .constant("K_T", k_t)
                    .constant("kt_exponent", e)
                    .constant("sup_lp_norm", sup),
            );
        }
    }
    Ok(AprioriOutcome {
        differential,
        gronwall,
        appearance,
    })
}

/// Relaxation rate `λ = (1/4) ∫ b sin²θ dσ` of the BKW coefficient
/// `K(t) = 1 - (1 - K₀) e^{-λt}` for Maxwell molecules.
pub fn bkw_rate(kernel: &impl Kernel, aq: &AngularQuadrature) -> Result<f64> {
    if kernel.gamma() != 0.0 {
        return Err(invalid(
            "the BKW solution exists for Maxwell molecules (γ = 0) only",
        ));
    }
    Ok(0.25 * angular_sin2_moment(kernel, aq)?)
}

pub fn bkw_coefficient(t: f64, k0: f64, rate: f64) -> f64 {
    1.0 - (1.0 - k0) * (-rate * t).exp()
}

/// Unit-mass, unit-temperature BKW profile
/// `(2πK)^{-N/2} e^{-|v|²/(2K)} [((N+2)K - N)/(2K) + (1-K)|v|²/(2K²)]`,
/// nonnegative for `K ≥ N/(N+2)`.
pub fn bkw_profile(grid: VelocityGrid, k: f64) -> Result<Distribution> {
    let n = grid.dim as f64;
    if !(k >= n / (n + 2.0) && k <= 1.0) {
        return Err(invalid(format!(
            "BKW coefficient K = {k} outside [N/(N+2), 1]"
        )));
    }
    let norm = (2.0 * std::f64::consts::PI * k).powf(-0.5 * n);
    let a = ((n + 2.0) * k - n) / (2.0 * k);
    let b = (1.0 - k) / (2.0 * k * k);
    Distribution::from_fn(grid, |v| {
        let v2: f64 = v.iter().map(|x| x * x).sum();
        norm * (-v2 / (2.0 * k)).exp() * (a + b * v2).max(0.0)
    })
}

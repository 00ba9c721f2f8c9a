//! Report suites run by `lpkin check`.

use lpkin_core::collision::QuadratureSpec;
use lpkin_core::flow::{
    bernoulli_envelope, bkw_profile, check_apriori, longtime_bound, simulate_with_snapshots,
    AprioriSpec, DecayConstants, Trajectory,
};
use lpkin_core::geometry::{verify_cv_identity, BoxRule, EquatorRule, SphereRule};
use lpkin_core::inequalities::{
    check_r_alpha_scaling, construct_estim5_constants, dilation_family, probe_estim4_epsilon,
    run_ensemble, split_candidates, standard_matrix, Check, Convergence, Estim5Constants,
    FoncCoefficients, InequalityReport, L1Bounds, MatrixCase, R_ALPHA_SEED,
};
use lpkin_core::kernel::{AngularQuadrature, Kernel, SymmetrizedKernel};
use lpkin_core::state::{l1_moment, mixture, Distribution, NormSpec, VelocityGrid};

use crate::config::{InitialConfig, MatrixChoice, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Estim1,
    Fonc,
    Estim3,
    Estim5,
    LemmaSym,
    CvIdentity,
    Apriori,
    ProbeEps,
}

/// Runs one suite. `seed` overrides the configured seeds.
pub fn run_suite(
    cfg: &RunConfig,
    suite: Suite,
    seed: Option<u64>,
) -> Result<Vec<InequalityReport>, CliError> {
    match suite {
        Suite::Estim1 => ensemble_reports(cfg, &[Check::Estim1], seed),
        Suite::Fonc => ensemble_reports(cfg, &[Check::Fonc], seed),
        Suite::Estim3 => ensemble_reports(cfg, &[Check::Estim3], seed),
        Suite::Estim5 => ensemble_reports(cfg, &[Check::Estim5], seed),
        Suite::LemmaSym => r_alpha_reports(cfg, seed),
        Suite::CvIdentity => cv_identity_reports(cfg).map(|r| vec![r]),
        Suite::Apriori => {
            let run = flow_run(cfg, &[])?;
            apriori_reports(cfg, &run)
        }
        Suite::ProbeEps => {
            let run = flow_run(cfg, &[cfg.suite.probe.tau])?;
            probe_reports(cfg, &run)
        }
    }
}

pub fn matrix_cases(cfg: &RunConfig) -> Result<Vec<MatrixCase>, CliError> {
    match cfg.suite.matrix {
        MatrixChoice::Standard => Ok(standard_matrix(cfg.dimension)?),
        MatrixChoice::Configured => {
            if cfg.norms.is_empty() {
                return Err(CliError::Usage(
                    "suite.matrix = \"configured\" needs at least one [[norms]] entry".into(),
                ));
            }
            let kernel = cfg.kernel()?;
            Ok(cfg
                .norms
                .iter()
                .map(|n| MatrixCase {
                    spec: *n,
                    kernel: kernel.clone(),
                })
                .collect())
        }
    }
}

pub fn ensemble_reports(
    cfg: &RunConfig,
    checks: &[Check],
    seed: Option<u64>,
) -> Result<Vec<InequalityReport>, CliError> {
    let Some(mut spec) = cfg.ensemble.clone() else {
        return Err(CliError::Usage(
            "inequality suites run on an ensemble; add an [ensemble] block with size and seed"
                .into(),
        ));
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let members = spec.generate(cfg.grid()?)?;
    let cases = matrix_cases(cfg)?;
    Ok(run_ensemble(
        &members,
        &cases,
        checks,
        &cfg.quadrature,
        &cfg.angular_quadrature,
        spec.seed,
    )?)
}

pub fn r_alpha_reports(
    cfg: &RunConfig,
    seed: Option<u64>,
) -> Result<Vec<InequalityReport>, CliError> {
    let s = &cfg.suite.r_alpha;
    let seed = cfg.resolve_seed(seed).unwrap_or(R_ALPHA_SEED);
    s.alphas
        .iter()
        .map(|&a| {
            Ok(check_r_alpha_scaling(
                a,
                cfg.dimension,
                s.pairs,
                s.theta_min,
                seed,
            )?)
        })
        .collect()
}

fn test_field(v: &[f64]) -> f64 {
    let tail: f64 = v[1..].iter().map(|x| x * x).sum();
    (1.0 + v[0] * v[0] + 0.5 * v[1]) * (-(v[0] - 0.5).powi(2) - tail).exp()
}

fn cv_residual(
    kernel: &SymmetrizedKernel,
    v_star: &[f64],
    n: usize,
    polar: usize,
    radius: f64,
) -> Result<(f64, usize), CliError> {
    let q = AngularQuadrature {
        gauss_panels: 1,
        gauss_points: polar,
        ..AngularQuadrature::default()
    };
    let sphere = SphereRule::new(q.rule_for(kernel), &EquatorRule::new(kernel.dim(), 8)?);
    let boxr = BoxRule { n, radius };
    let r = match kernel.dim() {
        2 => verify_cv_identity(
            |v: &[f64; 2]| test_field(v),
            kernel,
            &[v_star[0], v_star[1]],
            boxr,
            &sphere,
        )?,
        _ => verify_cv_identity(
            |v: &[f64; 3]| test_field(v),
            kernel,
            &[v_star[0], v_star[1], v_star[2]],
            boxr,
            &sphere,
        )?,
    };
    Ok((r, sphere.nodes.len()))
}

/// Residual of the change of variables for a Gaussian-times-polynomial
/// field at the fine resolution, which must also improve on the coarse one.
pub fn cv_identity_reports(cfg: &RunConfig) -> Result<InequalityReport, CliError> {
    let s = &cfg.suite.cv;
    if s.v_star.len() < cfg.dimension {
        return Err(CliError::Usage(format!(
            "suite.cv.v_star needs {} components",
            cfg.dimension
        )));
    }
    let kernel = cfg.kernel()?;
    let (fine, fine_nodes) = cv_residual(&kernel, &s.v_star, s.fine.0, s.fine.1, s.radius)?;
    let (coarse, coarse_nodes) = cv_residual(&kernel, &s.v_star, s.coarse.0, s.coarse.1, s.radius)?;
    let mut r = InequalityReport::new("cv-identity", fine, s.tolerance, Convergence::exact())
        .constant("coarse_residual", coarse)
        .constant("fine_grid", s.fine.0 as f64)
        .constant("fine_sigma_nodes", fine_nodes as f64)
        .constant("coarse_grid", s.coarse.0 as f64)
        .constant("coarse_sigma_nodes", coarse_nodes as f64);
    r.tol_margin = 0.0;
    r.pass = fine < s.tolerance && fine < coarse;
    Ok(r)
}

/// A finished flow and the states at the requested times.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub trajectory: Trajectory,
    pub snapshots: Vec<(f64, Distribution)>,
    pub kernel: SymmetrizedKernel,
}

pub fn initial_state(cfg: &RunConfig) -> Result<Distribution, CliError> {
    let grid = cfg.grid()?;
    match &cfg.initial {
        Some(InitialConfig::Mixture { components }) => Ok(mixture(grid, components)?),
        Some(InitialConfig::Bkw { k0 }) => Ok(bkw_profile(grid, *k0)?),
        None => Err(CliError::Usage("flows need an [initial] block".into())),
    }
}

/// The norm the a-priori checks follow: the first configured one, else `L²_1`.
pub fn main_norm(cfg: &RunConfig) -> NormSpec {
    cfg.norms
        .first()
        .copied()
        .unwrap_or(NormSpec { p: 2.0, q: 1.0 })
}

fn push_unique(xs: &mut Vec<f64>, x: f64) {
    if !xs.contains(&x) {
        xs.push(x);
    }
}

/// Configured norms and moments plus everything the flow checks read.
pub fn flow_diagnostics(cfg: &RunConfig) -> (Vec<NormSpec>, Vec<f64>) {
    let gamma = cfg.kernel.gamma;
    let main = main_norm(cfg);
    let p = main.p;
    let mut norms = cfg.norms.clone();
    let mut extra = vec![main.q, main.q + gamma / p, 0.0];
    extra.extend(cfg.suite.apriori.appearance.iter().copied());
    for q in extra {
        let s = NormSpec { p, q };
        if !norms.contains(&s) {
            norms.push(s);
        }
    }
    let mut moments = cfg.moments.clone();
    for w in std::iter::once(main.q).chain(cfg.suite.apriori.appearance.iter().copied()) {
        push_unique(&mut moments, p * w + 2.0);
        push_unique(&mut moments, p * w + gamma);
    }
    (norms, moments)
}

pub fn flow_run(cfg: &RunConfig, snapshot_times: &[f64]) -> Result<FlowRun, CliError> {
    let f0 = initial_state(cfg)?;
    let kernel = cfg.flow_kernel()?;
    let (norms, moments) = flow_diagnostics(cfg);
    let (trajectory, snaps) =
        simulate_with_snapshots(&f0, &kernel, &cfg.flow, &norms, &moments, snapshot_times)?;
    Ok(FlowRun {
        trajectory,
        snapshots: snapshot_times.iter().copied().zip(snaps).collect(),
        kernel,
    })
}

fn series(traj: &Trajectory, order: f64) -> Result<Vec<f64>, CliError> {
    traj.moment_series(order)
        .ok_or_else(|| CliError::Usage(format!("trajectory lacks the L¹ moment of order {order}")))
}

/// Split-estimate constants valid along the whole trajectory: smallest
/// mass, largest `L¹_{pq+2}` and `L¹_{pq+γ}` moments over its samples and
/// over `extra` states.
pub fn trajectory_constants(
    traj: &Trajectory,
    extra: &[Distribution],
    spec: NormSpec,
    kernel: &SymmetrizedKernel,
    aq: &AngularQuadrature,
) -> Result<Estim5Constants, CliError> {
    let gamma = kernel.gamma();
    let upper_order = spec.pq() + 2.0;
    let absorb_order = spec.pq() + gamma;
    let mut mass_lower = traj
        .samples
        .iter()
        .map(|s| s.mass)
        .fold(f64::INFINITY, f64::min);
    let mut upper = series(traj, upper_order)?.into_iter().fold(0.0, f64::max);
    let mut absorb = series(traj, absorb_order)?.into_iter().fold(0.0, f64::max);
    for f in extra {
        mass_lower = mass_lower.min(f.mass());
        upper = upper.max(l1_moment(f, upper_order));
        absorb = absorb.max(l1_moment(f, absorb_order));
    }
    let coef = FoncCoefficients::new(spec, kernel.dim(), gamma, R_ALPHA_SEED)?;
    Ok(construct_estim5_constants(
        L1Bounds {
            mass_lower,
            moment_upper: upper,
        },
        absorb,
        spec,
        kernel,
        &coef,
        aq,
        &split_candidates(&aq.grading),
    )?)
}

fn decay_constants(c: &Estim5Constants, spec: NormSpec) -> DecayConstants {
    DecayConstants {
        r: spec.q,
        c: spec.p * c.c_plus,
        k: spec.p * c.k_minus,
    }
}

fn strict(mut r: InequalityReport) -> InequalityReport {
    r.tol_margin = 0.0;
    r.pass = r.lhs <= r.rhs;
    r
}

/// Least-squares slope of `log y` against `log t`.
fn log_log_slope(ts: &[f64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Entropy monotonicity, the differential inequality, Gronwall dominance
/// and, for `γ > 0`, the appearance envelopes with their small-time
/// exponent, on the trajectory up to the configured horizon. The exponent
/// is fitted on `t ∈ [10⁻⁴, 10⁻³] · pr/(Cγ)`, below the envelope's own
/// time scale.
pub fn apriori_reports(cfg: &RunConfig, run: &FlowRun) -> Result<Vec<InequalityReport>, CliError> {
    let a = &cfg.suite.apriori;
    let traj = run.trajectory.truncated(a.horizon);
    let kernel = &run.kernel;
    let gamma = kernel.gamma();
    let spec = main_norm(cfg);
    let aq = &cfg.flow.quadrature.angular;

    let rise = traj
        .samples
        .windows(2)
        .map(|w| w[1].entropy - w[0].entropy)
        .fold(f64::NEG_INFINITY, f64::max);
    let h = strict(
        InequalityReport::new("h-theorem", rise, a.entropy_tolerance, Convergence::exact())
            .constant("samples", traj.samples.len() as f64)
            .constant("t_end", traj.samples.last().map_or(0.0, |s| s.t)),
    );

    let main = trajectory_constants(&traj, &[], spec, kernel, aq)?;
    let mut appearance = Vec::new();
    if gamma > 0.0 {
        for &r in &a.appearance {
            let s = NormSpec { p: spec.p, q: r };
            appearance.push(decay_constants(
                &trajectory_constants(&traj, &[], s, kernel, aq)?,
                s,
            ));
        }
    }
    let apriori = AprioriSpec {
        spec,
        gamma,
        main: decay_constants(&main, spec),
        appearance: appearance.clone(),
        window: a.window,
        kt_exponent: a.kt_exponent,
    };
    let out = check_apriori(&traj, &apriori)?;
    let tag = |r: InequalityReport| {
        r.constant("theta0", main.theta0)
            .constant("t_end", a.horizon)
    };
    let mut reports = vec![h, tag(out.differential), tag(out.gronwall)];

    for (d, r) in appearance.iter().zip(out.appearance) {
        let k_t = r.constants["K_T"];
        let t_c = spec.p * d.r / (d.c * gamma);
        let ts: Vec<f64> = (0..=10)
            .map(|i| 1e-4 * t_c * 10f64.powf(i as f64 / 10.0))
            .collect();
        let env = ts
            .iter()
            .map(|t| bernoulli_envelope(*t, d.c, k_t, spec.p, d.r, gamma))
            .collect::<Result<Vec<_>, _>>()?;
        let slope = log_log_slope(&ts, &env);
        let expected = -d.r / gamma;
        let rel = ((slope - expected) / expected).abs();
        reports.push(r);
        reports.push(strict(
            InequalityReport::new(
                "bernoulli-exponent",
                rel,
                a.exponent_tolerance,
                Convergence::exact(),
            )
            .case(format!("r={}", d.r))
            .constant("slope", slope)
            .constant("expected", expected)
            .constant("time_scale", t_c),
        ));
    }
    Ok(reports)
}

/// Fits `ε` on dilations of the state at `τ`, checks that a denser family
/// gives the same `ε`, then checks the long-time bound for `t ≥ τ`.
/// Both reports rest on fitted constants.
pub fn probe_reports(cfg: &RunConfig, run: &FlowRun) -> Result<Vec<InequalityReport>, CliError> {
    let pr = &cfg.suite.probe;
    let Some((_, f_tau)) = run
        .snapshots
        .iter()
        .find(|(t, _)| (*t - pr.tau).abs() <= 1e-12 * pr.tau.max(1.0))
    else {
        return Err(CliError::Usage(format!(
            "the flow has no state at τ = {}",
            pr.tau
        )));
    };
    let kernel = &run.kernel;
    let spec = main_norm(cfg);
    let grid = VelocityGrid::new(cfg.dimension, pr.grid.n, pr.grid.radius)?;
    let family = dilation_family(f_tau, grid, &pr.lambdas)?;
    let refined = dilation_family(f_tau, grid, &pr.refined_lambdas)?;
    let late: Vec<_> = run
        .trajectory
        .samples
        .iter()
        .filter(|s| s.t >= pr.tau - 1e-12)
        .cloned()
        .collect();
    let tail = Trajectory {
        samples: late,
        ..run.trajectory.clone()
    };
    let all: Vec<Distribution> = family.iter().chain(&refined).cloned().collect();
    let c = trajectory_constants(&tail, &all, spec, kernel, &cfg.flow.quadrature.angular)?;
    let quad: &QuadratureSpec = &cfg.quadrature;
    let probe = probe_estim4_epsilon(&family, spec, kernel, c.c_plus, c.k_minus, quad)?;
    let dense = probe_estim4_epsilon(&refined, spec, kernel, c.c_plus, c.k_minus, quad)?;
    let change = (probe.epsilon - dense.epsilon).abs();
    let stability = strict(
        InequalityReport::new("probe-eps", change, pr.stability, Convergence::exact())
            .constant("epsilon", probe.epsilon)
            .constant("epsilon_refined", dense.epsilon)
            .constant("C_plus", probe.c_plus)
            .constant("C_plus_cap", probe.c_plus_cap)
            .constant("K_minus", probe.k_minus)
            .constant("max_norm_power", probe.max_norm_power)
            .constant(
                "min_residual",
                probe
                    .residuals
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min),
            )
            .label("fitted"),
    );

    let ys: Vec<f64> = tail
        .norm_series(spec)
        .ok_or_else(|| CliError::Usage("trajectory lacks the main norm".into()))?
        .iter()
        .map(|x| x.powf(spec.p))
        .collect();
    let y_tau = ys[0];
    let bound = longtime_bound(y_tau, probe.c_plus, probe.k_minus, probe.epsilon)?;
    let (i_max, y_max) =
        ys.iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |a, (i, y)| if y > a.1 { (i, y) } else { a },
            );
    let longtime = InequalityReport::new("longtime", y_max, bound, Convergence::exact())
        .constant("y_tau", y_tau)
        .constant("t_max", tail.samples[i_max].t)
        .constant("t_end", tail.samples.last().map_or(pr.tau, |s| s.t))
        .constant("epsilon", probe.epsilon)
        .constant("C_plus", probe.c_plus)
        .constant("K_minus", probe.k_minus)
        .label("fitted");
    Ok(vec![stability, longtime])
}

/// Norm of `f - g` relative to `g` in `L²`.
pub fn relative_l2(f: &Distribution, g: &Distribution) -> Result<f64, CliError> {
    f.same_grid(g)?;
    let num: f64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let den: f64 = g.values.iter().map(|b| b * b).sum();
    Ok((num / den).sqrt())
}

//! TOML run configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use lpkin_core::collision::QuadratureSpec;
use lpkin_core::flow::FlowConfig;
use lpkin_core::inequalities::EnsembleSpec;
use lpkin_core::kernel::{
    AngularKernel, AngularKind, AngularQuadrature, CollisionKernel, Kernel, SymmetrizedKernel,
};
use lpkin_core::state::{MaxwellianParams, NormSpec, VelocityGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    /// Seed for sampled suites; ensembles carry their own.
    #[serde(default)]
    pub seed: Option<u64>,
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub norms: Vec<NormSpec>,
    /// Orders `s` of the recorded `L¹_s` moments.
    #[serde(default)]
    pub moments: Vec<f64>,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub angular_quadrature: AngularQuadrature,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularType {
    Constant,
    Table,
    Singular,
}

/// `type = "constant"` takes `c`; `"table"` takes `cos` and `values`;
/// `"singular"` takes `strength` and `nu`. `theta0` removes the part below
/// that angle in flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularSpec {
    #[serde(rename = "type")]
    pub kind: AngularType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
}

impl AngularSpec {
    pub fn kind(&self) -> Result<AngularKind, CliError> {
        let present = [
            ("c", self.c.is_some()),
            ("cos", self.cos.is_some()),
            ("values", self.values.is_some()),
            ("strength", self.strength.is_some()),
            ("nu", self.nu.is_some()),
        ];
        let (allowed, name): (&[&str], _) = match self.kind {
            AngularType::Constant => (&["c"], "constant"),
            AngularType::Table => (&["cos", "values"], "table"),
            AngularType::Singular => (&["strength", "nu"], "singular"),
        };
        for (key, set) in present {
            if set != allowed.contains(&key) {
                let what = if set { "does not take" } else { "needs" };
                return Err(CliError::Usage(format!(
                    "kernel.angular of type {name} {what} `{key}`"
                )));
            }
        }
        Ok(match self.kind {
            AngularType::Constant => AngularKind::ConstantCutoff { c: self.c.unwrap() },
            AngularType::Table => AngularKind::TableCutoff {
                cos: self.cos.clone().unwrap(),
                values: self.values.clone().unwrap(),
            },
            AngularType::Singular => AngularKind::Singular {
                strength: self.strength.unwrap(),
                nu: self.nu.unwrap(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub gamma: f64,
    pub angular: AngularSpec,
    /// Polar-angle support of `b`; defaults to `[0, π]`.
    #[serde(default)]
    pub support: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Mixture {
        components: Vec<MaxwellianParams>,
    },
    /// Unit-mass, unit-temperature BKW profile with coefficient `k0`.
    Bkw {
        k0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixChoice {
    /// `p ∈ {1.5, 2}`, `γ ∈ {0, 1}`, cutoff and `ν ∈ {-1.5, -2.5}` kernels.
    #[default]
    Standard,
    /// The configured kernel with every configured norm.
    Configured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub matrix: MatrixChoice,
    pub r_alpha: RAlphaSuite,
    pub cv: CvSuite,
    pub apriori: AprioriSuite,
    pub probe: ProbeSuite,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            matrix: MatrixChoice::Standard,
            r_alpha: RAlphaSuite::default(),
            cv: CvSuite::default(),
            apriori: AprioriSuite::default(),
            probe: ProbeSuite::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RAlphaSuite {
    pub alphas: Vec<f64>,
    pub pairs: usize,
    pub theta_min: f64,
}

impl Default for RAlphaSuite {
    fn default() -> Self {
        RAlphaSuite {
            alphas: vec![1.0, 2.0],
            pairs: 1000,
            theta_min: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSuite {
    /// Box resolution and polar nodes of the fine and coarse runs.
    pub fine: (usize, usize),
    pub coarse: (usize, usize),
    pub radius: f64,
    pub v_star: Vec<f64>,
    pub tolerance: f64,
}

impl Default for CvSuite {
    fn default() -> Self {
        CvSuite {
            fine: (64, 16),
            coarse: (32, 8),
            radius: 8.0,
            v_star: vec![0.3, -0.2, 0.1],
            tolerance: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AprioriSuite {
    /// Checks use the trajectory up to this time.
    pub horizon: f64,
    /// Weights `r > q` of the appearance envelope.
    pub appearance: Vec<f64>,
    pub window: (f64, f64),
    /// Overrides the exponent `γ/(rq)` in `K_T`.
    pub kt_exponent: Option<f64>,
    /// Allowed entropy increase per step.
    pub entropy_tolerance: f64,
    /// Relative tolerance on the small-time exponent `-r/γ` of the envelope.
    pub exponent_tolerance: f64,
}

impl Default for AprioriSuite {
    fn default() -> Self {
        AprioriSuite {
            horizon: 2.0,
            appearance: vec![2.0, 3.0],
            window: (0.1, 2.0),
            kt_exponent: None,
            entropy_tolerance: 1e-8,
            exponent_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSuite {
    /// Start of the long-time check and source of the family.
    pub tau: f64,
    /// Grid on which the dilated family is sampled.
    pub grid: GridConfig,
    pub lambdas: Vec<f64>,
    /// Denser family over the same range, for the stability of `ε`.
    pub refined_lambdas: Vec<f64>,
    /// Largest accepted change of `ε` between the two families.
    pub stability: f64,
}

impl Default for ProbeSuite {
    fn default() -> Self {
        ProbeSuite {
            tau: 0.5,
            grid: GridConfig { n: 32, radius: 2.0 },
            lambdas: vec![4.0, 5.0, 6.0],
            refined_lambdas: vec![4.0, 4.4, 4.8, 5.2, 5.6, 6.0],
            stability: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub trajectory: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut tree: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        inherit_quadrature_defaults(&mut tree);
        let cfg = RunConfig::deserialize(tree).map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: lpkin_core::Error| CliError::Usage(e.to_string());
        let as_usage = |e: CliError| CliError::Usage(e.to_string());
        self.grid().map_err(usage)?;
        let kernel = self.kernel().map_err(as_usage)?;
        for n in &self.norms {
            n.validate().map_err(usage)?;
            n.check_compatible(&kernel.base.angular).map_err(usage)?;
        }
        if let Some(e) = &self.ensemble {
            e.validate().map_err(usage)?;
        }
        self.flow.validate().map_err(usage)?;
        if self.initial.is_some() {
            let fk = self.flow_kernel().map_err(as_usage)?;
            if fk.singular_at_zero() {
                return Err(CliError::Usage(
                    "flows need a cutoff kernel: the angular part is not integrable at θ = 0; \
                     set kernel.angular.theta0 to drop the grazing part"
                        .into(),
                ));
            }
        }
        if let Some(InitialConfig::Mixture { components }) = &self.initial {
            if components.iter().any(|c| c.drift.len() != self.dimension) {
                return Err(CliError::Usage(format!(
                    "every drift needs {} components",
                    self.dimension
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> lpkin_core::Result<VelocityGrid> {
        VelocityGrid::new(self.dimension, self.grid.n, self.grid.radius)
    }

    pub fn kernel(&self) -> Result<SymmetrizedKernel, CliError> {
        let kind = self.kernel.angular.kind()?;
        let [lo, hi] = self.kernel.support.unwrap_or([0.0, PI]);
        let angular = AngularKernel::new(kind)?.with_support(lo, hi);
        Ok(CollisionKernel::new(self.kernel.gamma, angular, self.dimension)?.symmetrize())
    }

    /// The kernel used by time integration.
    pub fn flow_kernel(&self) -> Result<SymmetrizedKernel, CliError> {
        let k = self.kernel()?;
        match self.kernel.angular.theta0 {
            Some(t) => Ok(k.split(t)?.0),
            None => Ok(k),
        }
    }

    /// Command-line seed, then the top-level seed, then the ensemble's.
    pub fn resolve_seed(&self, cli: Option<u64>) -> Option<u64> {
        cli.or(self.seed).or(self.ensemble.as_ref().map(|e| e.seed))
    }
}

/// Fills keys missing from `table` with those of `defaults`, recursively.
fn fill_missing(table: &mut toml::Table, defaults: &toml::Table) {
    for (k, v) in defaults {
        match (table.get_mut(k), v) {
            (None, _) => {
                table.insert(k.clone(), v.clone());
            }
            (Some(toml::Value::Table(t)), toml::Value::Table(d)) => fill_missing(t, d),
            _ => {}
        }
    }
}

fn fill_section<T: Serialize>(table: Option<&mut toml::Value>, defaults: &T) {
    if let Some(toml::Value::Table(t)) = table {
        if let Ok(toml::Value::Table(d)) = toml::Value::try_from(defaults) {
            fill_missing(t, &d);
        }
    }
}

/// Partial quadrature tables inherit from their section's defaults, not
/// from the defaults of the nested types: a `[flow.quadrature.angular]`
/// table keeps the flow's interpolation and panel layout.
fn inherit_quadrature_defaults(tree: &mut toml::Table) {
    let flow = FlowConfig::default();
    if let Some(toml::Value::Table(f)) = tree.get_mut("flow") {
        fill_section(f.get_mut("quadrature"), &flow.quadrature);
    }
    fill_section(tree.get_mut("quadrature"), &QuadratureSpec::default());
    fill_section(
        tree.get_mut("angular_quadrature"),
        &AngularQuadrature::default(),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use lpkin_core::interp::Interpolation;

    const MINIMAL: &str = r#"
dimension = 2
[grid]
n = 16
radius = 6.0
[kernel]
gamma = 1.0
angular = { type = "singular", strength = 1.0, nu = -1.5 }
"#;

    #[test]
    fn minimal_config_loads_with_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.suite.apriori.appearance, vec![2.0, 3.0]);
        assert!(cfg.kernel().unwrap().is_singular());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{MINIMAL}\n[flow]\ndtt = 0.1\n");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("dtt"), "{err}");
        let text = MINIMAL.replace("nu = -1.5", "nu = -1.5, extra = 1");
        assert!(RunConfig::parse(&text).is_err());
        let text = MINIMAL.replace("nu = -1.5", "nu = -1.5, c = 1");
        assert!(RunConfig::parse(&text)
            .unwrap_err()
            .to_string()
            .contains("does not take `c`"));
    }

    #[test]
    fn incompatible_weight_is_rejected_with_the_condition() {
        let text = MINIMAL.replace("nu = -1.5", "nu = -2.5") + "\n[[norms]]\np = 2.0\nq = 1.0\n";
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("pq ≥ 4"), "{err}");
    }

    #[test]
    fn partial_quadrature_tables_keep_their_section_defaults() {
        let text = format!("{MINIMAL}\n[flow.quadrature.angular]\ngauss_points = 4\n");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.flow.quadrature.interpolation, Interpolation::CatmullRom);
        assert_eq!(cfg.flow.quadrature.angular.gauss_points, 4);
        assert_eq!(
            cfg.flow.quadrature.angular,
            AngularQuadrature {
                gauss_points: 4,
                ..FlowConfig::default().quadrature.angular
            }
        );
        assert_eq!(cfg.quadrature.interpolation, Interpolation::Linear);
        let text = format!("{MINIMAL}\n[quadrature.angular.grading]\nratio = 3.0\n");
        let g = RunConfig::parse(&text).unwrap().quadrature.angular.grading;
        assert_eq!(
            (g.ratio, g.theta_min),
            (3.0, QuadratureSpec::default().angular.grading.theta_min)
        );
        let text = format!("{MINIMAL}\n[flow.quadrature]\ninterpolation = \"linear\"\n");
        assert_eq!(
            RunConfig::parse(&text)
                .unwrap()
                .flow
                .quadrature
                .interpolation,
            Interpolation::Linear
        );
    }

    #[test]
    fn singular_flow_needs_a_cutoff() {
        let text = format!("{MINIMAL}\n[initial]\ntype = \"bkw\"\nk0 = 0.8\n");
        assert!(RunConfig::parse(&text)
            .unwrap_err()
            .to_string()
            .contains("theta0"));
        let text = MINIMAL.replace("nu = -1.5", "nu = -1.5, theta0 = 0.2")
            + "\n[initial]\ntype = \"bkw\"\nk0 = 0.8\n";
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.flow_kernel().unwrap().window.0, 0.2);
    }
}

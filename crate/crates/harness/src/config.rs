//! Experiment configuration (JSON).

use serde::{Deserialize, Serialize};
use wplap_core::coefficients::{make_kernel, KernelShape, KernelSpec, LambdaSpec, WeightSpec};
use wplap_core::funcspace::EnergySpec;
use wplap_core::geometry::{Domain, Label, LabeledSet, Region};
use wplap_core::transport::TauRule;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Localization,
    Regimes,
    Discrete,
    Verify,
    Solve,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Localization => "localization",
            ExperimentKind::Regimes => "regimes",
            ExperimentKind::Discrete => "discrete",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Solve => "solve",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Disc { center: Vec<f64>, radius: f64 },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }
    }
}

impl DomainConfig {
    pub fn dim(&self) -> usize {
        match self {
            DomainConfig::Box { lo, .. } => lo.len(),
            DomainConfig::Disc { center, .. } => center.len(),
        }
    }

    pub fn build(&self) -> Result<Domain> {
        Ok(match self {
            DomainConfig::Box { lo, hi } => Domain::new_box(lo, hi)?,
            DomainConfig::Disc { center, radius } => Domain::new_disc(center, *radius)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LabelConfig {
    Point {
        at: Vec<f64>,
        value: f64,
    },
    /// Axis-aligned box; axes with lo = hi are collapsed.
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        value: f64,
    },
}

impl LabelConfig {
    pub fn build(&self) -> Label {
        match self {
            LabelConfig::Point { at, value } => Label::point(at, *value),
            LabelConfig::Box { lo, hi, value } => Label::segment_box(lo, hi, *value),
        }
    }

    pub fn coords(&self) -> Vec<&Vec<f64>> {
        match self {
            LabelConfig::Point { at, .. } => vec![at],
            LabelConfig::Box { lo, hi, .. } => vec![lo, hi],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LambdaConfig {
    #[default]
    Exact,
    Smoothed {
        q: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub p: f64,
    pub beta: f64,
    pub delta: f64,
    pub tau: f64,
    /// "indicator" or "bump".
    pub kernel: String,
    pub c_rho: f64,
    pub weight_radius: f64,
    pub lambda: LambdaConfig,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            p: 2.0,
            beta: 1.0,
            delta: 0.1,
            tau: 0.0,
            kernel: "indicator".into(),
            c_rho: 0.5,
            weight_radius: 0.1,
            lambda: LambdaConfig::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ladders {
    pub delta: Vec<f64>,
    pub n: Vec<usize>,
    pub beta: Vec<f64>,
    pub resolution: usize,
    /// Seeds per ladder rung (seed, seed+1, …).
    pub seeds: usize,
}

impl Default for Ladders {
    fn default() -> Self {
        Ladders { delta: vec![0.4, 0.2, 0.1, 0.05], n: vec![250, 500, 1000, 2000], beta: vec![1.0, -1.5], resolution: 64, seeds: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Graph horizon δ for the degenerate-regime ladder.
    pub delta: f64,
    /// τ_n = (ln n / n)^a.
    pub tau_exponent: f64,
    /// Deviation is measured at distance ≥ this from Γ.
    pub far_distance: f64,
    pub n: Vec<usize>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { delta: 0.2, tau_exponent: 0.25, far_distance: 0.2, n: vec![500, 2000, 8000] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TauRuleConfig {
    #[default]
    Sqrt,
    Power {
        a: f64,
    },
    Fixed {
        tau: f64,
    },
}

impl TauRuleConfig {
    pub fn rule(&self) -> TauRule {
        match *self {
            TauRuleConfig::Sqrt => TauRule::Sqrt,
            TauRuleConfig::Power { a } => TauRule::Power(a),
            TauRuleConfig::Fixed { tau } => TauRule::Fixed(tau),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteConfig {
    pub tau_rule: TauRuleConfig,
    /// Resolution of the reference continuum energy.
    pub reference_resolution: usize,
    pub final_tolerance: f64,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        DiscreteConfig { tau_rule: TauRuleConfig::Sqrt, reference_resolution: 128, final_tolerance: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { rel_tol: 1e-8, max_iter: 20000 }
    }
}

/// Sizes for the verification suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub linear_resolution: usize,
    pub gradient_resolution: usize,
    pub structure_resolution: usize,
    pub random_fields: usize,
    pub fd_coordinates: usize,
    pub hardy_cases: usize,
    pub bump_fields: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            linear_resolution: 128,
            gradient_resolution: 256,
            structure_resolution: 32,
            random_fields: 20,
            fd_coordinates: 100,
            hardy_cases: 50,
            bump_fields: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub domain: DomainConfig,
    pub labels: Vec<LabelConfig>,
    /// Label separation radius R.
    pub separation: f64,
    pub energy: EnergyConfig,
    pub ladders: Ladders,
    pub graph: GraphConfig,
    pub discrete: DiscreteConfig,
    pub solver: SolverConfig,
    pub verify: VerifyConfig,
    pub seed: u64,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Verify,
            domain: DomainConfig::default(),
            labels: vec![LabelConfig::Point { at: vec![0.25, 0.5], value: 0.0 }, LabelConfig::Point { at: vec![0.75, 0.5], value: 1.0 }],
            separation: 0.05,
            energy: EnergyConfig::default(),
            ladders: Ladders::default(),
            graph: GraphConfig::default(),
            discrete: DiscreteConfig::default(),
            solver: SolverConfig::default(),
            verify: VerifyConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn d(&self) -> usize {
        self.domain.dim()
    }

    pub fn region(&self) -> Result<Region> {
        let d = self.d();
        let gamma = if self.labels.is_empty() {
            LabeledSet::empty(d)
        } else {
            LabeledSet::new(d, self.labels.iter().map(LabelConfig::build).collect(), self.separation)?
        };
        Ok(Region::new(self.domain.build()?, gamma)?)
    }

    pub fn lambda(&self, region: &Region) -> LambdaSpec {
        match self.energy.lambda {
            LambdaConfig::Exact => LambdaSpec::default(),
            LambdaConfig::Smoothed { q } => LambdaSpec::smoothed(region, q),
        }
    }

    /// Energy spec at the configured β and δ.
    pub fn energy_spec(&self, region: &Region) -> Result<EnergySpec> {
        self.energy_spec_at(region, self.energy.beta, self.energy.delta)
    }

    pub fn energy_spec_at(&self, region: &Region, beta: f64, delta: f64) -> Result<EnergySpec> {
        let e = &self.energy;
        let shape = KernelShape::parse(&e.kernel)?;
        let kernel = make_kernel(KernelSpec { shape, d: self.d(), p: e.p, c_rho: e.c_rho })?;
        let weight = WeightSpec::new(e.weight_radius, beta)?;
        Ok(EnergySpec::new(e.p, delta, e.tau, kernel, weight, self.lambda(region))?)
    }
}

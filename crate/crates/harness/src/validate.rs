//! Config diagnostics. Nothing here fails; problems are returned as a list.

use serde::{Deserialize, Serialize};
use wplap_core::coefficients::admissible_beta_range;
use wplap_core::geometry::max_admissible_delta;

use crate::config::{ExperimentConfig, ExperimentKind, LabelConfig, LambdaConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Dotted field path, e.g. `energy.beta` or `ladders.delta[0]`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{s}: {}: {}", self.path, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

struct Collector {
    out: Vec<Diagnostic>,
}

impl Collector {
    fn push(&mut self, severity: Severity, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic { severity, path: path.into(), message: message.into() });
    }
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, path, message);
    }
}

/// β outside the well-posed range is an error except in regimes mode (warning).
/// δ ≥ δ̲₀ is an error in solve and verify modes and a warning in experiment modes.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut c = Collector { out: Vec::new() };
    let strict = matches!(cfg.experiment, ExperimentKind::Solve | ExperimentKind::Verify);
    let beta_sev = if cfg.experiment == ExperimentKind::Regimes { Severity::Warning } else { Severity::Error };

    let d = cfg.d();
    if let Err(e) = cfg.domain.build() {
        c.error("domain", e.to_string());
    }
    for (i, l) in cfg.labels.iter().enumerate() {
        if l.coords().iter().any(|v| v.len() != d) {
            c.error(format!("labels[{i}]"), format!("coordinates must have {d} entries"));
        }
        if let LabelConfig::Box { lo, hi, .. } = l {
            if lo.iter().zip(hi).any(|(a, b)| a > b) {
                c.error(format!("labels[{i}]"), "box label needs lo ≤ hi");
            }
        }
    }
    if !(cfg.separation > 0.0) {
        c.error("separation", "label separation radius must be positive");
    }
    let region = if c.out.is_empty() {
        match cfg.region() {
            Ok(r) => Some(r),
            Err(e) => {
                c.error("labels", e.to_string());
                None
            }
        }
    } else {
        None
    };

    let e = &cfg.energy;
    if !(e.p > 1.0) {
        c.error("energy.p", format!("p={} must exceed 1", e.p));
    }
    if !(e.tau >= 0.0) {
        c.error("energy.tau", format!("τ={} must be nonnegative", e.tau));
    }
    if !(e.c_rho > 0.0 && e.c_rho < 1.0) {
        c.error("energy.c_rho", "c_ρ must lie in (0,1)");
    }
    if !(e.weight_radius > 0.0 && e.weight_radius <= 0.5) {
        c.error("energy.weight_radius", "transition radius must lie in (0, 0.5]");
    }
    if wplap_core::coefficients::KernelShape::parse(&e.kernel).is_err() {
        c.error("energy.kernel", format!("unknown kernel '{}'", e.kernel));
    }
    if let LambdaConfig::Smoothed { q } = e.lambda {
        if !(q >= 1.0) {
            c.error("energy.lambda.q", "smoothing exponent must be ≥ 1");
        }
    }

    // Admissible β range for the largest component dimension.
    let ell = cfg.labels.iter().map(|l| l.build().ell(d)).max().unwrap_or(0);
    if e.p > 1.0 && ell < d {
        if let Ok((lo, hi)) = admissible_beta_range(d, e.p, ell) {
            let mut check = |path: String, beta: f64| {
                if !(beta > lo && beta < hi) {
                    c.push(beta_sev, path, format!("β={beta} outside the well-posed range ({lo}, {hi})"));
                }
            };
            check("energy.beta".into(), e.beta);
            if cfg.experiment == ExperimentKind::Regimes {
                for (i, b) in cfg.ladders.beta.iter().enumerate() {
                    check(format!("ladders.beta[{i}]"), *b);
                }
            }
        }
    }

    // Horizon bound δ < δ̲₀.
    let (k0, k1) = region
        .as_ref()
        .map(|r| {
            let l = cfg.lambda(r);
            (l.kappa0, l.kappa1)
        })
        .unwrap_or((1.0, 1.0));
    if let Ok(dmax) = max_admissible_delta(k0, k1) {
        let sev = if strict { Severity::Error } else { Severity::Warning };
        let mut check = |path: String, delta: f64| {
            if !(delta > 0.0 && delta < 1.0) {
                c.error(path, format!("δ={delta} outside (0,1)"));
            } else if delta >= dmax {
                c.push(sev, path, format!("δ={delta} ≥ δ̲₀={dmax:.6} (open interval)"));
            }
        };
        check("energy.delta".into(), e.delta);
        if cfg.experiment == ExperimentKind::Localization {
            for (i, dl) in cfg.ladders.delta.iter().enumerate() {
                check(format!("ladders.delta[{i}]"), *dl);
            }
        }
        if cfg.experiment == ExperimentKind::Regimes {
            check("graph.delta".into(), cfg.graph.delta);
        }
    }

    // Ladders.
    match cfg.experiment {
        ExperimentKind::Localization if cfg.ladders.delta.is_empty() => c.error("ladders.delta", "ladder is empty"),
        ExperimentKind::Discrete if cfg.ladders.n.is_empty() => c.error("ladders.n", "ladder is empty"),
        ExperimentKind::Regimes if cfg.ladders.beta.is_empty() => c.error("ladders.beta", "ladder is empty"),
        _ => {}
    }
    if cfg.experiment == ExperimentKind::Regimes && cfg.graph.n.is_empty() {
        c.error("graph.n", "ladder is empty");
    }
    if cfg.ladders.resolution < 4 {
        c.error("ladders.resolution", "resolution must be at least 4");
    }
    if cfg.ladders.seeds == 0 {
        c.error("ladders.seeds", "need at least one seed");
    }
    if cfg.ladders.n.contains(&0) {
        c.error("ladders.n", "sample counts must be positive");
    }
    if matches!(cfg.experiment, ExperimentKind::Localization | ExperimentKind::Regimes | ExperimentKind::Solve) && cfg.labels.is_empty() {
        c.push(Severity::Warning, "labels", "no labels: the minimizer is any constant");
    }
    if cfg.experiment == ExperimentKind::Discrete {
        if let crate::config::TauRuleConfig::Power { a } = cfg.discrete.tau_rule {
            if !(a > 0.0 && a < 1.0) {
                c.error("discrete.tau_rule.a", "power rule needs 0 < a < 1");
            }
        }
        if let crate::config::TauRuleConfig::Fixed { tau } = cfg.discrete.tau_rule {
            if !(tau > 0.0) {
                c.error("discrete.tau_rule.tau", "τ must be positive");
            }
        }
    }
    if !(cfg.graph.tau_exponent > 0.0) {
        c.error("graph.tau_exponent", "exponent must be positive");
    }
    c.out
}

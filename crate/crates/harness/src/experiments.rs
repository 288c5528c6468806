//! Experiment drivers. Each returns sweeps, plot series and scalar summaries.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use wplap_core::energies::{build_graph, local_energy, nonlocal_energy};
use wplap_core::funcspace::{lp_distance, trace_estimate, EnergySpec, FnField, GridField, Setup};
use wplap_core::geometry::{sample_uniform, Component};
use wplap_core::numerics::{self, median, Point};
use wplap_core::solver::{dirichlet_nodes, solve_dirichlet, ContinuumObjective, ContinuumTier, EdgeObjective, SolveOptions, SolveReport};
use wplap_core::transport::{pushforward_energy, sandwich_check, tau_schedule, transport_map, transport_resolution};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{Series, Sweep, SweepRow};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: String,
    pub pass: bool,
    pub sweeps: Vec<Sweep>,
    pub series: Vec<Series>,
    pub summary: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(kind: &str) -> Self {
        ExperimentReport { kind: kind.into(), pass: true, ..Default::default() }
    }

    pub fn add_sweep(&mut self, s: Sweep) {
        self.pass &= s.all_pass();
        self.sweeps.push(s);
    }

    pub fn sweep(&self, name: &str) -> Option<&Sweep> {
        self.sweeps.iter().find(|s| s.name == name)
    }

    pub fn merge(&mut self, other: ExperimentReport) {
        self.pass &= other.pass;
        self.sweeps.extend(other.sweeps);
        self.series.extend(other.series);
        self.summary.extend(other.summary);
        self.notes.extend(other.notes);
    }
}

/// Probe field sin(πx₁)cos(πx₂) (other coordinates ignored).
pub fn probe(x: &Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).cos()
}

pub fn probe_gradient(x: &Point) -> Point {
    [PI * (PI * x[0]).cos() * (PI * x[1]).cos(), -PI * (PI * x[0]).sin() * (PI * x[1]).sin(), 0.0]
}

fn solve_options(cfg: &ExperimentConfig) -> SolveOptions {
    SolveOptions { rel_tol: cfg.solver.rel_tol, max_iter: cfg.solver.max_iter, ..SolveOptions::default() }
}

fn solve_tier(setup: &Setup, spec: &EnergySpec, tier: ContinuumTier, opts: &SolveOptions) -> Result<SolveReport> {
    let obj = ContinuumObjective::new(setup, spec, tier)?;
    let fixed = dirichlet_nodes(setup)?;
    Ok(solve_dirichlet(&obj, &fixed, opts)?)
}

/// |E_δ(u) − E_0(u)|/E_0(u) for the probe field along the δ ladder.
pub fn energy_localization(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let region = cfg.region()?;
    let setup = Setup::new(region.clone(), cfg.ladders.resolution)?;
    let spec = cfg.energy_spec(&region)?;
    let u = FnField::with_gradient(probe, probe_gradient);
    let e0 = local_energy(&setup, &u, &spec);
    let mut rep = ExperimentReport::new("localization");
    let mut sweep = Sweep::new("energy_localization", "relative_energy_error");
    let mut series = Series::new("energy_localization", "delta", "relative_error", true);
    let errs: Vec<(f64, f64)> =
        cfg.ladders.delta.iter().map(|&d| Ok((d, (nonlocal_energy(&setup, &u, &spec.with_delta(d)?) - e0).abs() / e0))).collect::<Result<_>>()?;
    let largest = errs.iter().cloned().fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let smallest = errs.iter().cloned().fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    for &(d, e) in &errs {
        let is_min = d == smallest.0;
        let tol = if is_min { 0.05 } else { f64::NAN };
        let pass = !is_min || (e < 0.05 && (errs.len() == 1 || e < largest.1));
        sweep.push(SweepRow::new("delta", d, e, tol, pass));
        series.points.push((d, e));
    }
    rep.summary.insert("local_energy".into(), e0);
    rep.add_sweep(sweep);
    rep.series.push(series);
    Ok(rep)
}

/// Cauchy differences of minimizers along the δ ladder and distance to the local minimizer.
pub fn minimizer_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let region = cfg.region()?;
    let setup = Setup::new(region.clone(), cfg.ladders.resolution)?;
    let spec = cfg.energy_spec(&region)?;
    let opts = solve_options(cfg);
    let mut rep = ExperimentReport::new("localization");
    let mut sols = Vec::new();
    for &d in &cfg.ladders.delta {
        let r = solve_tier(&setup, &spec.with_delta(d)?, ContinuumTier::Nonlocal, &opts)?;
        if !r.converged {
            rep.notes.push(format!("δ={d}: solver stopped after {} iterations", r.iterations));
        }
        sols.push(r.values);
    }
    let local = solve_tier(&setup, &spec, ContinuumTier::LocalLimit, &opts)?;
    if !local.converged {
        rep.notes.push("local problem: solver did not converge".into());
    }
    let field = |v: &Vec<f64>| GridField::new(&setup.grid, v.clone());
    let mut cauchy = Sweep::new("cauchy", "lp_distance_to_next_delta");
    let mut diffs = Vec::new();
    for i in 0..sols.len().saturating_sub(1) {
        let dist = lp_distance(&setup, &field(&sols[i])?, &field(&sols[i + 1])?, &spec);
        let prev = diffs.last().copied().unwrap_or(f64::NAN);
        cauchy.push(SweepRow::new("delta", cfg.ladders.delta[i], dist, prev, prev.is_nan() || dist < prev));
        diffs.push(dist);
    }
    let lf = field(&local.values)?;
    let mut to_local = Sweep::new("to_local", "lp_distance_to_local");
    let mut series = Series::new("localization", "delta", "error", true);
    // The finest δ is compared with twice the last Cauchy difference.
    let target = sols.len().checked_sub(1);
    for (i, s) in sols.iter().enumerate() {
        let dist = lp_distance(&setup, &field(s)?, &lf, &spec);
        let (tol, pass) = match (target, diffs.last()) {
            (Some(t), Some(&last)) if t == i => (2.0 * last, dist < 2.0 * last),
            _ => (f64::NAN, true),
        };
        to_local.push(SweepRow::new("delta", cfg.ladders.delta[i], dist, tol, pass));
        series.points.push((cfg.ladders.delta[i], dist));
    }
    rep.summary.insert("local_iterations".into(), local.iterations as f64);
    rep.add_sweep(cauchy);
    rep.add_sweep(to_local);
    rep.series.push(series);
    Ok(rep)
}

pub fn localization(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = energy_localization(cfg)?;
    rep.merge(minimizer_convergence(cfg)?);
    Ok(rep)
}

/// Traces at labels for well-posed β; label-influence collapse on graphs otherwise.
pub fn regimes(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let region = cfg.region()?;
    let d = cfg.d();
    let p = cfg.energy.p;
    let ell = region.gamma.ell_max();
    let (lo, hi) = wplap_core::coefficients::admissible_beta_range(d, p, ell)?;
    let mut rep = ExperimentReport::new("regimes");
    let opts = solve_options(cfg);
    for &beta in &cfg.ladders.beta {
        if beta > lo && beta < hi {
            rep.merge(trace_regime(cfg, beta, &opts)?);
        } else {
            rep.merge(degenerate_regime(cfg, beta, &opts)?);
        }
    }
    Ok(rep)
}

/// Trace estimates of the nonlocal minimizer at each point label.
pub fn trace_regime(cfg: &ExperimentConfig, beta: f64, opts: &SolveOptions) -> Result<ExperimentReport> {
    let region = cfg.region()?;
    let setup = Setup::new(region.clone(), cfg.ladders.resolution)?;
    let spec = cfg.energy_spec_at(&region, beta, cfg.energy.delta)?;
    let sol = solve_tier(&setup, &spec, ContinuumTier::Nonlocal, opts)?;
    let u = GridField::new(&setup.grid, sol.values)?;
    let h = setup.grid.h();
    let schedule: Vec<f64> = [16.0, 8.0, 4.0, 2.0].iter().map(|k| k * h).collect();
    let mut rep = ExperimentReport::new("regimes");
    let mut sweep = Sweep::new(&format!("trace_beta_{beta}"), "abs_trace_error");
    for (i, c) in region.gamma.components.iter().enumerate() {
        let Component::Point(x0) = &c.geom else {
            rep.notes.push(format!("label {i}: trace check covers point labels only"));
            continue;
        };
        let t = trace_estimate(&setup, &u, x0, &spec.weight, spec.p, 0, &schedule)?;
        let err = (t.value - c.value).abs();
        sweep.push(SweepRow::new("label", i as f64, err, 0.05, err < 0.05));
        rep.summary.insert(format!("trace_beta_{beta}_label_{i}"), t.value);
    }
    rep.add_sweep(sweep);
    Ok(rep)
}

/// Max |u − mean u| over samples at distance ≥ far_distance from Γ, along the graph n ladder.
pub fn degenerate_regime(cfg: &ExperimentConfig, beta: f64, opts: &SolveOptions) -> Result<ExperimentReport> {
    let region = cfg.region()?;
    let g = &cfg.graph;
    let mut rep = ExperimentReport::new("regimes");
    let mut sweep = Sweep::new(&format!("degenerate_beta_{beta}"), "far_field_deviation");
    let mut series = Series::new(&format!("degenerate_beta_{beta}"), "n", "deviation", true);
    let mut prev = f64::NAN;
    for &n in &g.n {
        let tau = ((n as f64).ln() / n as f64).powf(g.tau_exponent);
        let spec = cfg.energy_spec_at(&region, beta, g.delta)?.with_tau(tau);
        let samples = sample_uniform(&region.domain, n, cfg.seed)?;
        let graph = build_graph(&region, &samples, &spec)?;
        let obj = EdgeObjective::from_graph(&graph, spec.p);
        let sol = solve_dirichlet(&obj, &graph.label_values(), opts)?;
        let vals = &sol.values[..n];
        let mean = numerics::pairwise_sum(vals) / n as f64;
        let dev =
            (0..n).filter(|&i| region.gamma.distance(&graph.positions[i]) >= g.far_distance).map(|i| (vals[i] - mean).abs()).fold(0.0, f64::max);
        sweep.push(SweepRow::new("n", n as f64, dev, prev, prev.is_nan() || dev < prev));
        series.points.push((n as f64, dev));
        rep.summary.insert(format!("degenerate_beta_{beta}_n_{n}_mean_degree"), graph.mean_degree());
        prev = dev;
    }
    rep.add_sweep(sweep);
    rep.series.push(series);
    Ok(rep)
}

/// Pushforward energies along the n ladder against |Ω|^{-2}·p·E_δ(u), transport rate and sandwich bounds.
pub fn discrete(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let region = cfg.region()?;
    let spec0 = cfg.energy_spec(&region)?;
    let d = cfg.d();
    let vol = region.domain.volume();
    let fine = Setup::new(region.clone(), cfg.discrete.reference_resolution)?;
    let u = FnField::with_gradient(probe, probe_gradient);
    let target = spec0.p * nonlocal_energy(&fine, &u, &spec0) / (vol * vol);
    let mut rep = ExperimentReport::new("discrete");
    rep.summary.insert("target_energy".into(), target);
    let mut err_sweep = Sweep::new("discrete_error", "median_relative_error");
    let mut zeta_sweep = Sweep::new("zeta", "median_zeta");
    let mut sandwich = Sweep::new("sandwich", "min_q");
    let mut zseries = Series::new("zeta", "n", "zeta", true);
    let mut eseries = Series::new("discrete_error", "n", "relative_error", true);
    let mut prev = f64::NAN;
    let last_n = cfg.ladders.n.last().copied();
    for &n in &cfg.ladders.n {
        let setup = Setup::new(region.clone(), transport_resolution(n, d))?;
        let vals: Vec<f64> = setup.grid.nodes.iter().map(probe).collect();
        let mut errs = Vec::new();
        let mut zetas = Vec::new();
        let mut qmin = f64::INFINITY;
        let mut all_hold = true;
        for s in 0..cfg.ladders.seeds as u64 {
            let samples = sample_uniform(&region.domain, n, cfg.seed + s)?;
            let plan = transport_map(&setup.grid, &samples)?;
            let tau = tau_schedule(plan.zeta, cfg.discrete.tau_rule.rule())?;
            let spec = spec0.with_tau(tau);
            let e = pushforward_energy(&setup, &vals, &plan, &spec)?;
            errs.push((e - target).abs() / target);
            zetas.push(plan.zeta);
            match sandwich_check(&setup, &vals, &plan, &spec) {
                Ok(r) => {
                    qmin = qmin.min(r.q);
                    all_hold &= r.holds;
                }
                Err(wplap_core::error::Error::Admissibility(msg)) => {
                    let (_, q, _) =
                        wplap_core::transport::sandwich_factors(plan.zeta, tau, spec.delta, wplap_core::transport::comparison_kappa(&spec));
                    qmin = qmin.min(q);
                    all_hold = false;
                    rep.notes.push(format!("n={n} seed={}: {msg}", cfg.seed + s));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let em = median(&errs);
        let zm = median(&zetas);
        let is_last = Some(n) == last_n;
        let tol = if is_last { cfg.discrete.final_tolerance } else { prev };
        let pass = (prev.is_nan() || em < prev) && (!is_last || em < cfg.discrete.final_tolerance);
        err_sweep.push(SweepRow::new("n", n as f64, em, tol, pass));
        zeta_sweep.push(SweepRow::new("n", n as f64, zm, f64::NAN, true));
        sandwich.push(SweepRow::new("n", n as f64, qmin, 0.0, all_hold));
        zseries.points.push((n as f64, zm));
        eseries.points.push((n as f64, em));
        prev = em;
    }
    let mut rate = Sweep::new("zeta_rate", "loglog_slope");
    if let Some(sl) = zseries.fitted_slope() {
        rate.push(SweepRow::new("slope", -0.5, sl, 0.15, (sl + 0.5).abs() <= 0.15));
        rep.summary.insert("zeta_slope".into(), sl);
    }
    rep.add_sweep(err_sweep);
    rep.add_sweep(zeta_sweep);
    rep.add_sweep(rate);
    rep.add_sweep(sandwich);
    rep.series.push(zseries);
    rep.series.push(eseries);
    Ok(rep)
}

/// Single Dirichlet solve; the truncated tier when τ > 0.
pub fn solve(cfg: &ExperimentConfig) -> Result<(ExperimentReport, SolveReport, Vec<Point>)> {
    let region = cfg.region()?;
    let setup = Setup::new(region.clone(), cfg.ladders.resolution)?;
    let spec = cfg.energy_spec(&region)?;
    let tier = if spec.tau > 0.0 { ContinuumTier::Truncated } else { ContinuumTier::Nonlocal };
    let opts = solve_options(cfg);
    let sol = solve_tier(&setup, &spec, tier, &opts)?;
    let mut rep = ExperimentReport::new("solve");
    let mut sweep = Sweep::new("solve", "gradient_norm");
    let tol = opts.rel_tol * sol.initial_gradient_norm;
    sweep.push(SweepRow::new("iterations", sol.iterations as f64, sol.gradient_norm, tol, sol.converged));
    rep.summary.insert("energy".into(), sol.energy);
    rep.summary.insert("iterations".into(), sol.iterations as f64);
    rep.summary.insert("gradient_norm".into(), sol.gradient_norm);
    if sol.non_unique {
        rep.notes.push("no labels: solution is an arbitrary constant".into());
    }
    rep.add_sweep(sweep);
    Ok((rep, sol, setup.grid.nodes.clone()))
}

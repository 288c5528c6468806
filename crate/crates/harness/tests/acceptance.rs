//! Acceptance criteria, one test each. Every test prints a single pass/fail line to stderr.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use wplap_core::coefficients::{ap_membership, cbar, make_kernel, KernelShape, KernelSpec};
use wplap_core::funcspace::{embedding_predicate, hardy_check_1d, nonlocal_seminorm, EnergySpec, FnField, HardyBranch, PiecewiseLinear, Setup};
use wplap_core::geometry::{build_grid, sample_uniform, Domain, LabeledSet};
use wplap_core::numerics::Point;
use wplap_core::transport::{transport_map, transport_resolution};
use wplap_harness::config::{ExperimentConfig, LabelConfig, VerifyConfig};
use wplap_harness::experiments::{self, ExperimentReport};
use wplap_harness::output::Sweep;
use wplap_harness::verify::{self, EmbeddingCase};

fn report(id: usize, title: &str, pass: bool, detail: &str, elapsed: Duration) {
    let _ =
        writeln!(std::io::stderr(), "criterion {id:>2} [{}] {title}: {detail} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
}

fn rows<'a>(rep: &'a ExperimentReport, name: &str) -> &'a Sweep {
    rep.sweep(name).unwrap_or_else(|| panic!("missing sweep {name}"))
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// 1 / (average of |ω₁|^p over the unit sphere).
fn cbar_oracle(d: usize, p: f64) -> f64 {
    match d {
        1 => 1.0,
        2 => 1.0 / (simpson(|t| t.cos().abs().powf(p), 0.0, 2.0 * PI, 40000) / (2.0 * PI)),
        3 => p + 1.0,
        _ => unreachable!(),
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn center_label() -> Vec<LabelConfig> {
    vec![LabelConfig::Point { at: vec![0.5, 0.5], value: 1.0 }]
}

#[test]
fn criterion_01_kernel_normalization() {
    let t = Instant::now();
    let area = [2.0, 2.0 * PI, 4.0 * PI];
    let mut worst: f64 = 0.0;
    let mut worst_p2: f64 = 0.0;
    for d in 1..=3usize {
        for p in [1.5, 2.0, 3.0] {
            let want = cbar_oracle(d, p);
            for shape in [KernelShape::Indicator, KernelShape::Bump] {
                let k = make_kernel(KernelSpec { shape, d, p, c_rho: 0.5 }).unwrap();
                let m = area[d - 1] * simpson(|r| k.eval(r.min(1.0 - 1e-15)) * r.powf(d as f64 + p - 1.0), 0.0, 1.0, 20000);
                worst = worst.max((m - want).abs() / want);
            }
            worst = worst.max((cbar(d, p) - want).abs() / want);
        }
        worst_p2 = worst_p2.max((cbar(d, 2.0) - d as f64).abs() / d as f64);
    }
    let el = t.elapsed();
    let pass = worst < 1e-6 && worst_p2 < 1e-10 && el < Duration::from_secs(1);
    report(1, "kernel normalization", pass, &format!("max rel moment error {worst:.2e}, cbar(d,2) error {worst_p2:.2e}"), el);
    assert!(pass);
}

#[test]
fn criterion_02_linear_field_exactness() {
    let t = Instant::now();
    let region = verify::center_region(2, 0.1).unwrap();
    let setup = Setup::new(region, 128).unwrap();
    let a: Point = [0.7, -0.4, 0.0];
    let u = FnField::new(move |x: &Point| a[0] * x[0] + a[1] * x[1] + 0.3);
    let mut worst: f64 = 0.0;
    for beta in [0.0, 1.0] {
        for delta in [0.05, 0.2] {
            let spec = EnergySpec::standard(2, 2.0, beta, delta, 0.1).unwrap();
            // ∫γ^{-β}: 1 + ∫_{B(c,2R)} (γ^{-β} − 1), polar about the label.
            let ring = |s: f64| 2.0 * PI * s * (spec.weight.profile(s).powf(-beta) - 1.0);
            let inner = simpson(
                |s| {
                    if s == 0.0 {
                        if beta == 1.0 {
                            2.0 * PI
                        } else {
                            0.0
                        }
                    } else {
                        ring(s)
                    }
                },
                0.0,
                0.1,
                2000,
            );
            let want = (a[0] * a[0] + a[1] * a[1]) * (1.0 + inner + simpson(ring, 0.1, 0.2, 2000));
            let got = nonlocal_seminorm(&setup, &u, &spec);
            worst = worst.max((got - want).abs() / want);
        }
    }
    let el = t.elapsed();
    let pass = worst < 1e-3 && el < Duration::from_secs(30);
    report(2, "linear-field exactness", pass, &format!("max rel error {worst:.2e} at resolution 128"), el);
    assert!(pass);
}

#[test]
fn criterion_03_energy_localization() {
    let t = Instant::now();
    let mut cfg = ExperimentConfig { labels: center_label(), ..Default::default() };
    cfg.ladders.delta = vec![0.4, 0.05];
    cfg.ladders.resolution = 128;
    let rep = experiments::energy_localization(&cfg).unwrap();
    let r = &rows(&rep, "energy_localization").rows;
    let (e_large, e_small) = (r[0].metric, r[1].metric);
    let el = t.elapsed();
    let pass = e_small < 0.05 && e_small < e_large && el < Duration::from_secs(120);
    report(3, "localization of energy", pass, &format!("rel error {e_large:.2e} at δ=0.4, {e_small:.2e} at δ=0.05"), el);
    assert!(pass);
}

#[test]
fn criterion_04_minimizer_convergence() {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.ladders.delta = vec![0.4, 0.2, 0.1];
    let rep = experiments::minimizer_convergence(&cfg).unwrap();
    let cauchy: Vec<f64> = rows(&rep, "cauchy").rows.iter().map(|r| r.metric).collect();
    let to_local = rows(&rep, "to_local").rows.last().unwrap().metric;
    let last = *cauchy.last().unwrap();
    let el = t.elapsed();
    let pass = cauchy.windows(2).all(|w| w[1] < w[0]) && to_local < 2.0 * last && el < Duration::from_secs(300);
    report(
        4,
        "minimizer convergence",
        pass,
        &format!("Cauchy {:?}, ‖u_0.1 − u_local‖ = {to_local:.3e} vs 2×{last:.3e}", cauchy.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>()),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_05_regimes() {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::default();
    cfg.ladders.beta = vec![1.0, -1.5];
    let rep = experiments::regimes(&cfg).unwrap();
    let region = cfg.region().unwrap();
    let mut trace_err: f64 = 0.0;
    for (i, c) in region.gamma.components.iter().enumerate() {
        let v = rep.summary[&format!("trace_beta_1_label_{i}")];
        trace_err = trace_err.max((v - c.value).abs());
    }
    let dev: Vec<f64> = rows(&rep, "degenerate_beta_-1.5").rows.iter().map(|r| r.metric).collect();
    let el = t.elapsed();
    let pass = trace_err < 0.05 && dev.len() == 3 && dev.windows(2).all(|w| w[1] < w[0]) && el < Duration::from_secs(300);
    report(
        5,
        "well-posed and degenerate regimes",
        pass,
        &format!(
            "max trace error {trace_err:.2e}; far-field deviation {:?} for n=500,2000,8000",
            dev.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()
        ),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_06_discrete_to_nonlocal() {
    let t = Instant::now();
    let mut cfg = ExperimentConfig { labels: center_label(), ..Default::default() };
    cfg.energy.delta = 0.3;
    let rep = experiments::discrete(&cfg).unwrap();
    let errs: Vec<f64> = rows(&rep, "discrete_error").rows.iter().map(|r| r.metric).collect();
    let sandwich = rows(&rep, "sandwich");
    let qmin = sandwich.rows.iter().map(|r| r.metric).fold(f64::INFINITY, f64::min);
    let el = t.elapsed();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let final_ok = *errs.last().unwrap() < 0.1;
    let pass = decreasing && final_ok && sandwich.all_pass() && el < Duration::from_secs(600);
    report(
        6,
        "discrete to nonlocal",
        pass,
        &format!(
            "median rel errors {errs:.3?}; decreasing={decreasing}; final<0.1={final_ok}; sandwich holds={} (min q {qmin:.3})",
            sandwich.all_pass()
        ),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_07_transport_rate() {
    let t = Instant::now();
    let dom = Domain::unit_box(2);
    let ns = [250usize, 500, 1000, 2000];
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &n in &ns {
        let r = transport_resolution(n, 2);
        let grid = build_grid(&dom, &LabeledSet::empty(2), r).unwrap();
        let mut z: Vec<f64> = (0..3)
            .map(|s| {
                let samples = sample_uniform(&dom, n, s).unwrap();
                let plan = transport_map(&grid, &samples).unwrap();
                // ζ is twice the largest node-to-image displacement.
                let disp =
                    plan.assignment.iter().zip(&grid.nodes).map(|(&j, x)| ((x[0] - samples[j][0]).powi(2) + (x[1] - samples[j][1]).powi(2)).sqrt());
                let z = 2.0 * disp.fold(0.0, f64::max);
                assert!((z - plan.zeta).abs() < 1e-12);
                z
            })
            .collect();
        z.sort_by(f64::total_cmp);
        lx.push((n as f64).ln());
        ly.push(z[1].ln());
    }
    let s = slope(&lx, &ly);
    let el = t.elapsed();
    let pass = (-0.65..=-0.35).contains(&s) && el < Duration::from_secs(300);
    report(7, "transport rate", pass, &format!("log-log slope {s:.3}"), el);
    assert!(pass);
}

#[test]
fn criterion_08_hardy() {
    let t = Instant::now();
    let closed = hardy_check_1d(&PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap(), 1, 2.0, 0.0, HardyBranch::AtZero).unwrap();
    // v = min(r, 1): ∫₀¹ 1 + ∫₁^∞ r⁻² = 2 on the left, (2/1)²·∫₀¹ 1 = 4 on the right.
    let closed_ok = (closed.lhs - 2.0).abs() < 1e-3 && (closed.rhs - 4.0).abs() < 1e-3;
    let (sw, max_ratio) = verify::hardy(&VerifyConfig::default(), 0).unwrap();
    let zero = sw.rows.iter().filter(|r| r.parameter == "case_at_zero").collect::<Vec<_>>();
    let inf = sw.rows.iter().filter(|r| r.parameter == "case_at_infinity").collect::<Vec<_>>();
    let bumps = sw.rows.iter().filter(|r| r.parameter == "bump").collect::<Vec<_>>();
    let cases_ok = zero.len() == 50 && inf.len() == 50 && zero.iter().chain(&inf).all(|r| r.pass && r.metric <= 1.0);
    let bumps_ok = bumps.len() == 20 && bumps.iter().all(|r| r.metric.is_finite() && r.metric > 0.0) && max_ratio.is_finite();
    let el = t.elapsed();
    let pass = closed_ok && cases_ok && bumps_ok && el < Duration::from_secs(60);
    report(
        8,
        "Hardy suites",
        pass,
        &format!("closed form lhs {:.6} bound {:.6}; 100 branch cases ok={cases_ok}; max bump ratio {max_ratio:.3e}", closed.lhs, closed.rhs),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_09_convolution() {
    let t = Instant::now();
    let sw = verify::convolution(&VerifyConfig::default(), 0).unwrap();
    let get = |name: &str| sw.rows.iter().filter(|r| r.parameter == name).collect::<Vec<_>>();
    let constant = get("constant")[0].metric;
    let grad = get("gradient_identity")[0].metric;
    let traces = get("trace_preservation");
    let shrink = get("shrinking");
    let trace_max = traces.iter().map(|r| r.metric).fold(0.0, f64::max);
    let el = t.elapsed();
    let pass = constant < 1e-12
        && grad < 1e-3
        && traces.len() == 5
        && trace_max < 0.02
        && shrink.len() == 10
        && shrink.iter().all(|r| r.pass)
        && el < Duration::from_secs(180);
    report(
        9,
        "convolution suite",
        pass,
        &format!(
            "constant {constant:.1e}; gradient identity {grad:.2e}; trace shift {trace_max:.1e}; shrinking {}/10",
            shrink.iter().filter(|r| r.pass).count()
        ),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_10_seminorm_structure() {
    let t = Instant::now();
    let sw = verify::seminorm_structure(&VerifyConfig::default(), 0).unwrap();
    let count = |name: &str| sw.rows.iter().filter(|r| r.parameter == name && r.pass).count();
    let fd = sw.rows.iter().find(|r| r.parameter == "energy_gradient_fd").unwrap().metric;
    let el = t.elapsed();
    let (h, k) = (count("horizon_invariance"), count("kernel_equivalence"));
    let pass = h == 20 && k == 20 && fd < 1e-5 && el < Duration::from_secs(180);
    report(10, "seminorm structure", pass, &format!("horizon {h}/20, kernel {k}/20, gradient FD error {fd:.2e} over 100 coordinates"), el);
    assert!(pass);
}

#[test]
fn criterion_11_predicates() {
    let t = Instant::now();
    // Endpoint rows: quantity exactly 0 (continuous, not compact), q = q*, β at either end of the A_p range.
    let embedding: [EmbeddingCase; 10] = [
        ((3, 2.0, 2.0, 1.0, 1.0), (true, true)),
        ((3, 2.0, 6.0, 0.0, 0.0), (true, false)),
        ((2, 2.0, 2.0, 0.0, 0.0), (true, true)),
        ((2, 2.0, 4.0, 2.0, 0.0), (true, false)),
        ((2, 2.0, 4.0, 3.0, 0.0), (false, false)),
        ((3, 2.0, 4.0, 0.0, 0.0), (true, true)),
        ((1, 1.5, 3.0, 1.0, 0.5), (true, true)),
        ((3, 2.0, 1.0, 3.0, 0.0), (false, false)),
        ((3, 2.0, 3.0, 2.0, -1.0), (false, false)),
        ((2, 3.0, 2.0, 1.0, 0.0), (true, true)),
    ];
    let ap: [((usize, f64, f64, usize), bool); 10] = [
        ((2, 2.0, 0.0, 0), true),
        ((2, 2.0, 2.0, 0), false),
        ((2, 2.0, -2.0, 0), false),
        ((2, 2.0, 1.999, 0), true),
        ((3, 2.0, 2.0, 1), false),
        ((3, 2.0, 1.0, 1), true),
        ((3, 3.0, -4.0, 1), false),
        ((3, 3.0, -3.9, 1), true),
        ((1, 1.5, 0.5, 0), true),
        ((3, 2.0, 3.5, 0), false),
    ];
    let mut mismatches = Vec::new();
    for (i, &((d, p, q, a, b), want)) in embedding.iter().enumerate() {
        // Oracle: the exponent balance and the critical Sobolev exponent.
        let df = d as f64;
        let qstar = if p < df { df * p / (df - p) } else { f64::INFINITY };
        let s = df * (1.0 / q - 1.0 / p) - a / q + b / p + 1.0;
        let oracle = (s >= -1e-12, s > 1e-12 && q < qstar);
        let got = embedding_predicate(d, p, q, a, b).unwrap();
        if oracle != want || (got.continuous, got.compact) != want {
            mismatches.push(format!("embedding row {i}"));
        }
    }
    for (i, &((d, p, b, ell), want)) in ap.iter().enumerate() {
        let k = (d - ell) as f64;
        let oracle = -k * (p - 1.0) < b && b < k;
        if oracle != want || ap_membership(d, p, b, ell).unwrap() != want {
            mismatches.push(format!("A_p row {i}"));
        }
    }
    let range_err = embedding_predicate(2, 2.0, 0.5, 0.0, 0.0).is_err() && embedding_predicate(3, 2.0, 7.0, 0.0, 0.0).is_err();
    let sw = verify::predicates().unwrap();
    let el = t.elapsed();
    let pass = mismatches.is_empty() && range_err && sw.all_pass() && el < Duration::from_secs(1);
    report(11, "predicates", pass, &format!("20-case truth table, mismatches {mismatches:?}, q range errors {range_err}"), el);
    assert!(pass);
}

//! Verification suites. Each returns one sweep whose rows carry their own pass flags.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use wplap_core::coefficients::{
    admissible_beta_range, ap_membership, cbar, make_kernel, make_mollifier, KernelShape, KernelSpec, LambdaSpec, MollifierShape, MollifierSpec,
};
use wplap_core::convolution::{aux_gradient_at, boundary_convolution, shrinking_check, ConvolutionSpec, Convolved};
use wplap_core::funcspace::{
    embedding_predicate, hardy_check_1d, hardy_check_nd, horizon_invariance_check, kernel_equivalence_check, nonlocal_seminorm, trace_estimate,
    EnergySpec, FnField, GridField, HardyBranch, PiecewiseLinear, ScalarField, Setup,
};
use wplap_core::geometry::{Domain, Label, LabeledSet, Region};
use wplap_core::numerics::{self, det_map, Point};
use wplap_core::solver::{energy_gradient, ContinuumObjective, ContinuumTier, Objective};

use crate::config::{ExperimentConfig, VerifyConfig};
use crate::error::Result;
use crate::experiments::ExperimentReport;
use crate::output::{Sweep, SweepRow};

/// c + Σ aₖ sin(kₖ·x + φₖ) with analytic gradient.
#[derive(Clone, Debug)]
pub struct SmoothField {
    pub offset: f64,
    pub terms: Vec<(f64, Point, f64)>,
}

impl SmoothField {
    pub fn random<R: Rng>(rng: &mut R, d: usize) -> Self {
        let terms = (0..3)
            .map(|_| {
                let mut k = [0.0; 3];
                for c in k.iter_mut().take(d) {
                    *c = rng.gen_range(-3.0..3.0);
                }
                (rng.gen_range(-1.0..1.0), k, rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        SmoothField { offset: rng.gen_range(-0.5..0.5), terms }
    }
}

impl ScalarField for SmoothField {
    fn value(&self, x: &Point) -> f64 {
        self.offset + self.terms.iter().map(|(a, k, ph)| a * (numerics::dot(k, x) + ph).sin()).sum::<f64>()
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        let mut g = [0.0; 3];
        for (a, k, ph) in &self.terms {
            g = numerics::axpy(&g, a * (numerics::dot(k, x) + ph).cos(), k);
        }
        Some(g)
    }
}

/// Unit square with one point label at its center.
pub fn center_region(d: usize, separation: f64) -> Result<Region> {
    let c = vec![0.5; d];
    let g = LabeledSet::new(d, vec![Label::point(&c, 1.0)], separation)?;
    Ok(Region::new(Domain::unit_box(d), g)?)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Composite Simpson on [0, 1] with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

pub fn kernel_normalization() -> Result<Sweep> {
    let mut sw = Sweep::new("kernel_normalization", "relative_moment_error");
    let area = [2.0, 2.0 * PI, 4.0 * PI];
    for d in 1..=3usize {
        for p in [1.5, 2.0, 3.0] {
            for shape in [KernelShape::Indicator, KernelShape::Bump] {
                let k = make_kernel(KernelSpec { shape, d, p, c_rho: 0.5 })?;
                let m = area[d - 1] * simpson(|r| k.eval(r.min(1.0 - 1e-15)) * r.powf(d as f64 + p - 1.0), 20000);
                let e = rel(m, cbar(d, p));
                sw.push(SweepRow::new(&format!("d{d}_p{p}_{shape:?}").to_lowercase(), p, e, 1e-6, e < 1e-6));
            }
        }
        let e = rel(cbar(d, 2.0), d as f64);
        sw.push(SweepRow::new(&format!("cbar_d{d}_p2"), 2.0, e, 1e-10, e < 1e-10));
    }
    Ok(sw)
}

/// ∫_Ω γ^{-β} for the unit cube with a center point label, by radial quadrature inside B(c, 2R).
pub fn weight_integral_center(d: usize, beta: f64, spec: &EnergySpec) -> f64 {
    let r2 = 2.0 * spec.weight.radius;
    let area = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
    let (x, w) = numerics::gauss_legendre(40);
    let mut extra = 0.0;
    // γ(s) = s on [0, R], blended on [R, 2R].
    for (lo, hi) in [(0.0, 0.5 * r2), (0.5 * r2, r2)] {
        let c = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        for (t, wi) in x.iter().zip(&w) {
            let s: f64 = m + c * t;
            let g = spec.weight.profile(s);
            // s^{d−1}(g^{-β} − 1), written to stay finite at s → 0.
            let f = if beta == 0.0 { 0.0 } else { s.powf(d as f64 - 1.0) * g.powf(-beta) - s.powf(d as f64 - 1.0) };
            extra += wi * c * area * f;
        }
    }
    1.0 + extra
}

pub fn linear_exactness(v: &VerifyConfig) -> Result<Sweep> {
    let mut sw = Sweep::new("linear_exactness", "relative_error");
    let region = center_region(2, 0.1)?;
    let setup = Setup::new(region, v.linear_resolution)?;
    let a = [0.7, -0.4, 0.0];
    let u = FnField::with_gradient(move |x: &Point| numerics::dot(&a, x) + 0.3, move |_: &Point| a);
    for beta in [0.0, 1.0] {
        for delta in [0.05, 0.2] {
            let spec = EnergySpec::standard(2, 2.0, beta, delta, 0.1)?;
            let got = nonlocal_seminorm(&setup, &u, &spec);
            let want = numerics::norm(&a).powi(2) * weight_integral_center(2, beta, &spec);
            let e = rel(got, want);
            sw.push(SweepRow::new(&format!("beta{beta}_delta{delta}"), delta, e, 1e-3, e < 1e-3));
        }
    }
    Ok(sw)
}

fn random_pl<R: Rng>(rng: &mut R, vanish_at_end: bool) -> Result<PiecewiseLinear> {
    let n = rng.gen_range(3..7);
    let mut knots = vec![0.0];
    let mut values = vec![rng.gen_range(-1.0..1.0)];
    for _ in 1..n {
        knots.push(knots.last().unwrap() + rng.gen_range(0.1..1.0));
        values.push(rng.gen_range(-1.0..1.0));
    }
    if vanish_at_end {
        *values.last_mut().unwrap() = 0.0;
    }
    Ok(PiecewiseLinear::new(knots, values)?)
}

/// Bump (1 − |x−c|²/r²)³₊ with analytic gradient.
fn bump(c: Point, r: f64) -> FnField<impl Fn(&Point) -> f64 + Sync, impl Fn(&Point) -> Point + Sync> {
    FnField::with_gradient(
        move |x: &Point| {
            let t = 1.0 - numerics::dist(x, &c).powi(2) / (r * r);
            if t > 0.0 {
                t.powi(3)
            } else {
                0.0
            }
        },
        move |x: &Point| {
            let t = 1.0 - numerics::dist(x, &c).powi(2) / (r * r);
            if t > 0.0 {
                numerics::scale(&numerics::sub(x, &c), -6.0 * t * t / (r * r))
            } else {
                [0.0; 3]
            }
        },
    )
}

pub fn hardy(v: &VerifyConfig, seed: u64) -> Result<(Sweep, f64)> {
    let mut sw = Sweep::new("hardy", "ratio");
    let closed = hardy_check_1d(&PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0])?, 1, 2.0, 0.0, HardyBranch::AtZero)?;
    let ok = (closed.lhs - 2.0).abs() < 1e-3 && (closed.rhs - 4.0).abs() < 1e-3 && closed.holds;
    sw.push(SweepRow::new("closed_form_lhs", 2.0, closed.lhs, 1e-3, ok));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..v.hardy_cases {
        let d = rng.gen_range(1..=3usize);
        let p = rng.gen_range(1.5..3.0);
        let crit = d as f64 - p;
        let zero = hardy_check_1d(&random_pl(&mut rng, false)?, d, p, crit + rng.gen_range(0.2..2.0), HardyBranch::AtZero)?;
        let inf = hardy_check_1d(&random_pl(&mut rng, true)?, d, p, crit - rng.gen_range(0.2..2.0), HardyBranch::AtInfinity)?;
        sw.push(SweepRow::new("case_at_zero", i as f64, zero.ratio, 1.0, zero.holds));
        sw.push(SweepRow::new("case_at_infinity", i as f64, inf.ratio, 1.0, inf.holds));
    }
    let region = center_region(2, 0.1)?;
    let setup = Setup::new(region, v.structure_resolution.max(32))?;
    let spec = EnergySpec::standard(2, 2.0, 1.0, 0.1, 0.1)?;
    let mut max_ratio: f64 = 0.0;
    for i in 0..v.bump_fields {
        let r = rng.gen_range(0.08..0.2);
        // Supports stay inside Ω and clear of the label cell.
        let c = loop {
            let c = [rng.gen_range(r..1.0 - r), rng.gen_range(r..1.0 - r), 0.0];
            if numerics::dist(&c, &[0.5, 0.5, 0.0]) > r + 0.1 {
                break c;
            }
        };
        let rep = hardy_check_nd(&setup, &bump(c, r), &spec)?;
        max_ratio = max_ratio.max(rep.ratio);
        sw.push(SweepRow::new("bump", i as f64, rep.ratio, f64::NAN, rep.holds && rep.ratio > 0.0));
    }
    Ok((sw, max_ratio))
}

fn trig(x: &Point) -> f64 {
    (3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[0] * x[1]
}

fn trig_gradient(x: &Point) -> Point {
    [3.0 * (3.0 * x[0]).cos() * (2.0 * x[1]).cos() + x[1], -2.0 * (3.0 * x[0]).sin() * (2.0 * x[1]).sin() + x[0], 0.0]
}

/// Max over nodes of |∇(K_ε u) − K̃_ε ∇u|, relative to max |∇u|, with ∇(K_ε u) by central differences.
pub fn gradient_identity(setup: &Setup, eps: f64) -> Result<f64> {
    let region = &setup.region;
    let lam = LambdaSpec::default();
    let m = make_mollifier(MollifierSpec { shape: MollifierShape::Bump { k: 2 }, d: 2 })?;
    let c = ConvolutionSpec::new(eps, m, lam.clone())?;
    let f = FnField::new(trig);
    let k = Convolved::new(setup, &f, &c)?;
    let errs = det_map(setup.grid.len(), |i| {
        let x = setup.grid.nodes[i];
        let st = 1e-4 * (eps * lam.eval(region, &x)).max(1e-9);
        let mut fd = [0.0; 3];
        for a in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[a] += st;
            xm[a] -= st;
            fd[a] = (k.value(&xp) - k.value(&xm)) / (2.0 * st);
        }
        numerics::dist(&fd, &aux_gradient_at(setup, &trig_gradient, &c, &x))
    });
    let gmax = setup.grid.nodes.iter().map(|x| numerics::norm(&trig_gradient(x))).fold(0.0, f64::max);
    Ok(errs.iter().cloned().fold(0.0, f64::max) / gmax)
}

pub fn convolution(v: &VerifyConfig, seed: u64) -> Result<Sweep> {
    let mut sw = Sweep::new("convolution", "error");
    let region = center_region(2, 0.1)?;
    let m = make_mollifier(MollifierSpec { shape: MollifierShape::Bump { k: 2 }, d: 2 })?;
    let c = ConvolutionSpec::new(0.2, m, LambdaSpec::default())?;
    let setup = Setup::new(region.clone(), 64)?;
    let k1 = boundary_convolution(&setup, &FnField::new(|_: &Point| 1.7), &c)?;
    let e = k1.values.iter().map(|x| (x - 1.7).abs()).fold(0.0, f64::max);
    sw.push(SweepRow::new("constant", 1.7, e, 1e-12, e < 1e-12));

    let fine = Setup::new(region.clone(), v.gradient_resolution)?;
    let g = gradient_identity(&fine, 0.2)?;
    sw.push(SweepRow::new("gradient_identity", 0.2, g, 1e-3, g < 1e-3));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = [0.5, 0.5, 0.0];
    let h = setup.grid.h();
    let schedule: Vec<f64> = [8.0, 4.0, 2.0].iter().map(|k| k * h).collect();
    let spec = EnergySpec::standard(2, 2.0, 1.0, 0.1, 0.1)?;
    for i in 0..5 {
        let u = SmoothField::random(&mut rng, 2);
        let ku = boundary_convolution(&setup, &u, &c)?;
        let tk = trace_estimate(&setup, &ku, &x0, &spec.weight, 2.0, 0, &schedule)?.value;
        let tu = trace_estimate(&setup, &GridField::sample(&setup.grid, &u), &x0, &spec.weight, 2.0, 0, &schedule)?.value;
        let e = (tk - tu).abs();
        sw.push(SweepRow::new("trace_preservation", i as f64, e, 0.02, e < 0.02));
    }

    let coarse = Setup::new(region, 32)?;
    for i in 0..10 {
        let u = SmoothField::random(&mut rng, 2);
        let rep = shrinking_check(&coarse, &u, &spec, &c, 0.3)?;
        sw.push(SweepRow::new("shrinking", i as f64, rep.lhs / rep.rhs, 1.0, rep.holds));
    }
    Ok(sw)
}

pub fn seminorm_structure(v: &VerifyConfig, seed: u64) -> Result<Sweep> {
    let mut sw = Sweep::new("seminorm_structure", "value");
    let region = center_region(2, 0.1)?;
    let setup = Setup::new(region.clone(), v.structure_resolution)?;
    let spec = EnergySpec::standard(2, 2.0, 1.0, 0.2, 0.1)?;
    let rho = make_kernel(KernelSpec { shape: KernelShape::Bump, d: 2, p: 2.0, c_rho: 0.5 })?;
    let lam = LambdaSpec::smoothed(&region, 8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..v.random_fields {
        let u = SmoothField::random(&mut rng, 2);
        let h = horizon_invariance_check(&setup, &u, &spec, 0.05, 0.2)?;
        sw.push(SweepRow::new("horizon_invariance", i as f64, h.seminorm_delta1 / h.seminorm_delta2, f64::NAN, h.holds));
        let k = kernel_equivalence_check(&setup, &u, &spec, &rho, &lam)?;
        sw.push(SweepRow::new("kernel_equivalence", i as f64, k.general / k.seminorm, f64::NAN, k.holds));
    }
    let e = fd_gradient_error(&setup, v.fd_coordinates, seed)?;
    sw.push(SweepRow::new("energy_gradient_fd", v.fd_coordinates as f64, e, 1e-5, e < 1e-5));
    Ok(sw)
}

/// Max relative error of energy_gradient against central differences of the energy, p = 3.
pub fn fd_gradient_error(setup: &Setup, coords: usize, seed: u64) -> Result<f64> {
    let spec = EnergySpec::standard(2, 3.0, 1.0, 0.2, 0.1)?;
    let obj = ContinuumObjective::new(setup, &spec, ContinuumTier::Nonlocal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let field = SmoothField::random(&mut rng, 2);
    let u: Vec<f64> = setup.grid.nodes.iter().map(|x| field.value(x)).collect();
    let g = energy_gradient(&obj, &u);
    let gscale = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let uscale = u.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..coords {
        let i = rng.gen_range(0..u.len());
        let st = 1e-6 * uscale;
        let mut up = u.clone();
        up[i] += st;
        let mut um = u.clone();
        um[i] -= st;
        let fd = (obj.energy(&up) - obj.energy(&um)) / (2.0 * st);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1e-3 * gscale));
    }
    Ok(worst)
}

pub type EmbeddingCase = ((usize, f64, f64, f64, f64), (bool, bool));

/// (d, p, q, α, β) → (continuous, compact).
pub const EMBEDDING_TABLE: [EmbeddingCase; 10] = [
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

/// (d, p, β, ℓ) → A_p membership.
pub const AP_TABLE: [((usize, f64, f64, usize), bool); 10] = [
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

pub fn predicates() -> Result<Sweep> {
    let mut sw = Sweep::new("predicates", "matches");
    for (i, ((d, p, q, a, b), (cont, comp))) in EMBEDDING_TABLE.iter().enumerate() {
        let e = embedding_predicate(*d, *p, *q, *a, *b)?;
        let ok = e.continuous == *cont && e.compact == *comp;
        sw.push(SweepRow::new("embedding", i as f64, e.quantity, f64::NAN, ok));
    }
    for (i, ((d, p, beta, ell), want)) in AP_TABLE.iter().enumerate() {
        let got = ap_membership(*d, *p, *beta, *ell)?;
        let (lo, hi) = admissible_beta_range(*d, *p, *ell)?;
        sw.push(SweepRow::new("ap_membership", i as f64, (beta - lo).min(hi - beta), 0.0, got == *want));
    }
    let bad = embedding_predicate(2, 2.0, 0.5, 0.0, 0.0).is_err();
    sw.push(SweepRow::new("embedding_q_range", 0.5, f64::NAN, f64::NAN, bad));
    Ok(sw)
}

/// Every suite; the report passes iff every row does.
pub fn run_all(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let v = &cfg.verify;
    let mut rep = ExperimentReport::new("verify");
    rep.add_sweep(kernel_normalization()?);
    rep.add_sweep(linear_exactness(v)?);
    let (h, max_ratio) = hardy(v, cfg.seed)?;
    rep.summary.insert("hardy_max_bump_ratio".into(), max_ratio);
    rep.add_sweep(h);
    rep.add_sweep(convolution(v, cfg.seed)?);
    rep.add_sweep(seminorm_structure(v, cfg.seed)?);
    rep.add_sweep(predicates()?);
    Ok(rep)
}

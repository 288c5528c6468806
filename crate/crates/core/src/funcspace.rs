//! Weighted norms and seminorms, traces, Hardy checks, embedding predicates and
//! the seminorm comparison theorems.

use crate::coefficients::{self, pow_weight, Kernel, LambdaSpec, WeightSpec};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, DomainKind, QuadratureGrid, Region};
use crate::numerics::{self, Point, ORIGIN};
use crate::quadrature::{self, outer_rule, BallRule, OuterOptions, OuterRule};
use serde::{Deserialize, Serialize};

/// Scalar function evaluable anywhere in the closure of Ω.
pub trait ScalarField: Sync {
    fn value(&self, x: &Point) -> f64;

    /// Value at grid node `node` located at `x`.
    fn node_value(&self, _node: usize, x: &Point) -> f64 {
        self.value(x)
    }

    fn gradient(&self, _x: &Point) -> Option<Point> {
        None
    }
}

/// Closure-backed field with optional analytic gradient.
pub struct FnField<F, G = fn(&Point) -> Point> {
    pub f: F,
    pub g: Option<G>,
}

impl<F: Fn(&Point) -> f64 + Sync> FnField<F> {
    pub fn new(f: F) -> Self {
        FnField { f, g: None }
    }
}

impl<F: Fn(&Point) -> f64 + Sync, G: Fn(&Point) -> Point + Sync> FnField<F, G> {
    pub fn with_gradient(f: F, g: G) -> Self {
        FnField { f, g: Some(g) }
    }
}

impl<F: Fn(&Point) -> f64 + Sync, G: Fn(&Point) -> Point + Sync> ScalarField for FnField<F, G> {
    fn value(&self, x: &Point) -> f64 {
        (self.f)(x)
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        self.g.as_ref().map(|g| g(x))
    }
}

/// Field sampled at grid nodes; multilinear in between.
#[derive(Clone, Debug)]
pub struct GridField<'g> {
    pub grid: &'g QuadratureGrid,
    pub values: Vec<f64>,
    pub gradients: Option<Vec<Point>>,
}

impl<'g> GridField<'g> {
    pub fn new(grid: &'g QuadratureGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!("field has {} values for {} nodes", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("field values must be finite".into()));
        }
        Ok(GridField { grid, values, gradients: None })
    }

    pub fn sample<F: ScalarField + ?Sized>(grid: &'g QuadratureGrid, f: &F) -> Self {
        let values = grid.nodes.iter().map(|x| f.value(x)).collect();
        GridField { grid, values, gradients: None }
    }

    /// Attach second-order central-difference gradients (one-sided at the lattice edge).
    pub fn with_fd_gradients(mut self) -> Self {
        let g = self.grid;
        let mut out = vec![ORIGIN; g.len()];
        for (ni, &li) in g.node_lattice.iter().enumerate() {
            let k = g.lattice_coords(li);
            for i in 0..g.d {
                let n = g.dims[i];
                if n < 3 {
                    continue;
                }
                let at = |off: i64| {
                    let mut kk = k;
                    kk[i] = (k[i] as i64 + off) as usize;
                    self.values[g.lattice_node[g.lattice_index(kk)]]
                };
                let h = g.spacing[i];
                out[ni][i] = if k[i] == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if k[i] == n - 1 {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else {
                    (at(1) - at(-1)) / (2.0 * h)
                };
            }
        }
        self.gradients = Some(out);
        self
    }
}

impl ScalarField for GridField<'_> {
    fn value(&self, x: &Point) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    fn node_value(&self, node: usize, _x: &Point) -> f64 {
        self.values[node]
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        let gr = self.gradients.as_ref()?;
        let (idx, w, m) = self.grid.stencil(x);
        let mut out = ORIGIN;
        for j in 0..m {
            out = numerics::axpy(&out, w[j], &gr[idx[j]]);
        }
        Some(out)
    }
}

/// One energy functional: exponents, horizon, truncation, kernel, weight, λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySpec {
    pub p: f64,
    pub delta: f64,
    pub tau: f64,
    pub kernel: Kernel,
    pub weight: WeightSpec,
    pub lambda: LambdaSpec,
}

impl EnergySpec {
    pub fn new(p: f64, delta: f64, tau: f64, kernel: Kernel, weight: WeightSpec, lambda: LambdaSpec) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::Parameter(format!("p={p} must exceed 1")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("δ={delta} outside (0,1)")));
        }
        if !(tau >= 0.0) {
            return Err(Error::Parameter(format!("τ={tau} must be nonnegative")));
        }
        if (kernel.spec.p - p).abs() > 1e-15 {
            return Err(Error::Parameter("kernel normalized for a different p".into()));
        }
        Ok(EnergySpec { p, delta, tau, kernel, weight, lambda })
    }

    /// Indicator kernel, exact distance, transition radius R.
    pub fn standard(d: usize, p: f64, beta: f64, delta: f64, radius: f64) -> Result<Self> {
        Self::new(p, delta, 0.0, coefficients::indicator_kernel(d, p), WeightSpec::new(radius, beta)?, LambdaSpec::default())
    }

    pub fn beta(&self) -> f64 {
        self.weight.beta
    }

    pub fn d(&self) -> usize {
        self.kernel.spec.d
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("δ={delta} outside (0,1)")));
        }
        s.delta = delta;
        Ok(s)
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        let mut s = self.clone();
        s.tau = tau;
        s
    }

    /// δ < δ̲₀(κ₀, κ₁).
    pub fn is_admissible(&self) -> bool {
        crate::geometry::max_admissible_delta(self.lambda.kappa0, self.lambda.kappa1).map(|m| self.delta < m).unwrap_or(false)
    }
}

/// Grid, region and quadrature rules shared by the continuum evaluations.
#[derive(Clone, Debug)]
pub struct Setup {
    pub region: Region,
    pub grid: QuadratureGrid,
    pub ball: BallRule,
    pub outer: OuterOptions,
}

impl Setup {
    pub fn new(region: Region, resolution: usize) -> Result<Self> {
        let grid = build_grid(&region.domain, &region.gamma, resolution)?;
        let ball = BallRule::standard(region.d());
        Ok(Setup { region, grid, ball, outer: OuterOptions::default() })
    }

    pub fn with_ball(mut self, ball: BallRule) -> Self {
        self.ball = ball;
        self
    }

    pub fn d(&self) -> usize {
        self.region.d()
    }

    /// Outer rule for γ^{-b}.
    pub fn weight_rule(&self, weight: &WeightSpec, b: f64) -> OuterRule {
        outer_rule(&self.grid, &self.region, |x| pow_weight(weight.gamma(&self.region, x), b), b, self.outer)
    }

    /// Outer rule with an arbitrary pointwise weight and singular exponent.
    pub fn custom_rule<W: Fn(&Point) -> f64>(&self, w: W, b: f64) -> OuterRule {
        outer_rule(&self.grid, &self.region, w, b, self.outer)
    }
}

#[inline]
fn outer_value<F: ScalarField + ?Sized>(field: &F, rule: &OuterRule, a: usize) -> f64 {
    match rule.node[a] {
        Some(i) => field.node_value(i, &rule.points[a]),
        None => field.value(&rule.points[a]),
    }
}

/// Σ_a W_a r_a^{-p} Σ_q ω_q k_q |u(x_a + r_a z_q) − u(x_a)|^p, the common double
/// integral behind every nonlocal seminorm and energy. `clip` drops y ∉ Ω.
pub fn nonlocal_sum<F, R>(setup: &Setup, field: &F, rule: &OuterRule, radius: R, kern: &[f64], p: f64, clip: bool) -> f64
where
    F: ScalarField + ?Sized,
    R: Fn(&Point) -> f64 + Sync,
{
    let ball = &setup.ball;
    let dom = &setup.region.domain;
    numerics::det_sum(rule.len(), |a| {
        let wa = rule.weights[a];
        if wa == 0.0 {
            return 0.0;
        }
        let x = &rule.points[a];
        let r = radius(x);
        if r <= 0.0 {
            return 0.0;
        }
        let ua = outer_value(field, rule, a);
        let mut inner = 0.0;
        for q in 0..ball.len() {
            let k = kern[q];
            if k == 0.0 {
                continue;
            }
            let y = numerics::axpy(x, r, &ball.points[q]);
            if clip && !dom.contains(&y) {
                continue;
            }
            let diff = (field.value(&y) - ua).abs();
            if diff > 0.0 {
                inner += ball.weights[q] * k * diff.powf(p);
            }
        }
        if inner > 0.0 && rule.divergent[a] {
            return f64::INFINITY;
        }
        wa * inner * r.powf(-p)
    })
}

/// ∫ |u|^p γ^{-(β+shift)} (returns +∞ when the weight diverges where u ≠ 0).
pub fn lp_norm_weighted<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec, shift: f64) -> f64 {
    let b = spec.beta() + shift;
    let rule = setup.weight_rule(&spec.weight, b);
    let p = spec.p;
    numerics::det_sum(rule.len(), |a| {
        let v = outer_value(field, &rule, a).abs();
        if v == 0.0 {
            return 0.0;
        }
        if rule.divergent[a] || !rule.weights[a].is_finite() {
            return f64::INFINITY;
        }
        rule.weights[a] * v.powf(p)
    })
}

/// ∫ |u − v|^p γ^{-β} for two fields.
pub fn lp_distance<F: ScalarField + ?Sized, G: ScalarField + ?Sized>(setup: &Setup, u: &F, v: &G, spec: &EnergySpec) -> f64 {
    let rule = setup.weight_rule(&spec.weight, spec.beta());
    let p = spec.p;
    let s = numerics::det_sum(rule.len(), |a| {
        let d = (outer_value(u, &rule, a) - outer_value(v, &rule, a)).abs();
        if d == 0.0 {
            0.0
        } else {
            rule.weights[a] * d.powf(p)
        }
    });
    s.powf(1.0 / p)
}

fn fd_gradient<F: ScalarField + ?Sized>(setup: &Setup, field: &F, x: &Point) -> Point {
    let d = setup.d();
    let h = 1e-6 * setup.region.domain.diameter();
    let mut g = ORIGIN;
    for i in 0..d {
        let mut a = *x;
        let mut b = *x;
        a[i] += h;
        b[i] -= h;
        let (fa, fb, span) = if !setup.region.domain.contains(&a) {
            (field.value(x), field.value(&b), h)
        } else if !setup.region.domain.contains(&b) {
            (field.value(&a), field.value(x), h)
        } else {
            (field.value(&a), field.value(&b), 2.0 * h)
        };
        g[i] = (fa - fb) / span;
    }
    g
}

/// Gradient of a field at x: analytic/cached if available, else central differences.
pub fn field_gradient<F: ScalarField + ?Sized>(setup: &Setup, field: &F, x: &Point) -> Point {
    field.gradient(x).unwrap_or_else(|| fd_gradient(setup, field, x))
}

/// ∫ |∇u|^p γ^{-β}.
pub fn grad_seminorm_weighted<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> f64 {
    let rule = setup.weight_rule(&spec.weight, spec.beta());
    let p = spec.p;
    numerics::det_sum(rule.len(), |a| {
        let g = numerics::norm(&field_gradient(setup, field, &rule.points[a]));
        if g == 0.0 {
            return 0.0;
        }
        if rule.divergent[a] {
            return f64::INFINITY;
        }
        rule.weights[a] * g.powf(p)
    })
}

/// [u]^p for the indicator seminorm with horizon δη.
pub fn nonlocal_seminorm<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> f64 {
    let d = setup.d();
    let c = coefficients::seminorm_prefactor(d, spec.p);
    let kern = vec![c; setup.ball.len()];
    let rule = setup.weight_rule(&spec.weight, spec.beta());
    let region = &setup.region;
    let delta = spec.delta;
    nonlocal_sum(setup, field, &rule, |x| delta * region.eta(x), &kern, spec.p, false)
}

/// [u]^p with kernel ρ(|x−y|/λ_δ(x)) and scale λ_δ(x)^{d+p}.
pub fn nonlocal_seminorm_general<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec, rho: &Kernel, lambda: &LambdaSpec) -> f64 {
    let kern: Vec<f64> = setup.ball.radii.iter().map(|r| rho.eval(*r)).collect();
    let rule = setup.weight_rule(&spec.weight, spec.beta());
    let region = &setup.region;
    let delta = spec.delta;
    nonlocal_sum(setup, field, &rule, |x| delta * lambda.eval(region, x), &kern, spec.p, false)
}

/// Distance from x along unit direction ω to the boundary of the domain.
pub fn ray_exit(setup: &Setup, x: &Point, om: &Point) -> f64 {
    let d = setup.d();
    match &setup.region.domain.kind {
        DomainKind::Box { lo, hi } => {
            let mut t = f64::INFINITY;
            for i in 0..d {
                if om[i] > 1e-300 {
                    t = t.min((hi[i] - x[i]) / om[i]);
                } else if om[i] < -1e-300 {
                    t = t.min((lo[i] - x[i]) / om[i]);
                }
            }
            t.max(0.0)
        }
        DomainKind::Disc { center, radius } => {
            let a = numerics::sub(x, center);
            let ao = numerics::dot(&a, om);
            (-ao + (ao * ao - numerics::dot(&a, &a) + radius * radius).max(0.0).sqrt()).max(0.0)
        }
    }
}

/// ∫_{B(x₀,ε)∩Ω} f(y) |y−x₀|^{-b} dy by polar quadrature from x₀.
fn star_integral<F: Fn(&Point) -> f64>(setup: &Setup, x0: &Point, eps: f64, b: f64, f: F) -> f64 {
    let d = setup.d();
    let e = d as f64 - b;
    let (s, ws) = numerics::gauss_legendre_on(24, 0.0, 1.0);
    let dirs = quadrature::sphere_rule(d, if d == 2 { 512 } else { 48 });
    let mut total = 0.0;
    for (om, wo) in dirs {
        let len = eps.min(ray_exit(setup, x0, &om));
        if len <= 0.0 {
            continue;
        }
        let mut inner = 0.0;
        if (e - e.round()).abs() < 1e-14 {
            // Polynomial radial weight: Gauss in r is exact for it.
            for (si, wi) in s.iter().zip(&ws) {
                inner += wi * si.powf(e - 1.0) * f(&numerics::axpy(x0, si * len, &om));
            }
            total += wo * len.powf(e) * inner;
        } else {
            for (si, wi) in s.iter().zip(&ws) {
                let t = si.powf(1.0 / e);
                inner += wi * f(&numerics::axpy(x0, t * len, &om));
            }
            total += wo * len.powf(e) * inner / e;
        }
    }
    total
}

/// (u)_{B(x₀,ε)∩Ω,β}; plain average for β ≥ 0, γ^{-β}-weighted for β < 0.
pub fn weighted_ball_average<F: ScalarField + ?Sized>(setup: &Setup, field: &F, x0: &Point, eps: f64, weight: &WeightSpec) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("ε={eps} must be positive")));
    }
    if !setup.region.domain.contains(x0) {
        return Err(Error::Domain("ball center outside the domain".into()));
    }
    let beta = weight.beta;
    let region = &setup.region;
    let (num, den) = if beta >= 0.0 {
        (star_integral(setup, x0, eps, 0.0, |y| field.value(y)), star_integral(setup, x0, eps, 0.0, |_| 1.0))
    } else {
        // γ^{|β|} ≈ r^{|β|} near x₀.
        let sm = |y: &Point| {
            let r = numerics::dist(y, x0);
            let g = weight.gamma(region, y);
            if r > 0.0 {
                (g / r).powf(-beta)
            } else {
                1.0
            }
        };
        (star_integral(setup, x0, eps, beta, |y| sm(y) * field.value(y)), star_integral(setup, x0, eps, beta, sm))
    };
    if !(den > 0.0) {
        return Err(Error::Domain("empty intersection of ball and domain".into()));
    }
    Ok(num / den)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub value: f64,
    pub error_indicator: f64,
    pub averages: Vec<f64>,
    pub decay_exponent: f64,
    pub expected_exponent: f64,
}

/// Trace at x₀ from ball averages over a decreasing ε schedule with a
/// Richardson-style correction using the measured decay exponent.
pub fn trace_estimate<F: ScalarField + ?Sized>(
    setup: &Setup,
    field: &F,
    x0: &Point,
    weight: &WeightSpec,
    p: f64,
    ell: usize,
    eps_schedule: &[f64],
) -> Result<TraceEstimate> {
    let d = setup.d();
    let (lo, hi) = coefficients::admissible_beta_range(d, p, ell)?;
    let beta = weight.beta;
    if !(beta > lo && beta < hi) {
        return Err(Error::Admissibility(format!("β={beta} outside ({lo},{hi}); no trace")));
    }
    if eps_schedule.is_empty() {
        return Err(Error::Parameter("empty ε schedule".into()));
    }
    let avgs: Vec<f64> = eps_schedule.iter().map(|e| weighted_ball_average(setup, field, x0, *e, weight)).collect::<Result<_>>()?;
    let n = avgs.len();
    let expected = (beta - d as f64 + p) / p;
    let mut value = avgs[n - 1];
    let mut err = 0.0;
    let mut rate = f64::NAN;
    if n >= 2 {
        err = (avgs[n - 1] - avgs[n - 2]).abs();
    }
    if n >= 3 {
        let d1 = avgs[n - 2] - avgs[n - 3];
        let d2 = avgs[n - 1] - avgs[n - 2];
        let ratio = eps_schedule[n - 2] / eps_schedule[n - 1];
        if d1 != 0.0 && d2 != 0.0 && d1.signum() == d2.signum() && d2.abs() < d1.abs() {
            rate = (d1 / d2).ln() / ratio.ln();
            let q = ratio.powf(rate);
            value = avgs[n - 1] + d2 / (q - 1.0);
        }
    }
    Ok(TraceEstimate { value, error_indicator: err, averages: avgs, decay_exponent: rate, expected_exponent: expected })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardyBranch {
    AtZero,
    AtInfinity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Piecewise-linear function on [0, ∞): knots r₀=0 < r₁ < … with constant extension.
#[derive(Clone, Debug)]
pub struct PiecewiseLinear {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() || knots[0] != 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("knots must start at 0 and increase".into()));
        }
        Ok(PiecewiseLinear { knots, values })
    }
}

/// ∫_a^b f on a geometrically graded composite Gauss rule refined toward both ends.
fn graded_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = numerics::gauss_legendre(10);
    let seg = |lo: f64, hi: f64| -> f64 {
        let c = 0.5 * (hi - lo);
        let m = 0.5 * (hi + lo);
        x.iter().zip(&w).map(|(t, wi)| wi * c * f(m + c * t)).sum()
    };
    let mid = 0.5 * (a + b);
    let mut total = 0.0;
    for (end, other) in [(a, mid), (b, mid)] {
        let mut len = other - end;
        let mut pos = other;
        for _ in 0..48 {
            let next = pos - 0.5 * len;
            total += seg(next.min(pos), next.max(pos));
            pos = next;
            len *= 0.5;
        }
    }
    total
}

/// 1D Hardy inequality at zero (β > d−p, |v−v(0)|) or at infinity (β < d−p, |v|).
pub fn hardy_check_1d(v: &PiecewiseLinear, d: usize, p: f64, beta: f64, branch: HardyBranch) -> Result<HardyReport> {
    let df = d as f64;
    let (constant, shift) = match branch {
        HardyBranch::AtZero => {
            if !(beta > df - p) {
                return Err(Error::Admissibility(format!("at-zero branch needs β > d−p, got β={beta}")));
            }
            ((p / (beta + p - df)).powf(p), v.values[0])
        }
        HardyBranch::AtInfinity => {
            if !(beta < df - p) {
                return Err(Error::Admissibility(format!("at-infinity branch needs β < d−p, got β={beta}")));
            }
            ((p / (df - p - beta)).powf(p), 0.0)
        }
    };
    let a = beta - df + 1.0 + p;
    let b = beta - df + 1.0;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for k in 0..v.knots.len() - 1 {
        let (r0, r1) = (v.knots[k], v.knots[k + 1]);
        let (v0, v1) = (v.values[k] - shift, v.values[k + 1] - shift);
        let s = (v1 - v0) / (r1 - r0);
        let f = |r: f64| {
            let val = (v0 + s * (r - r0)).abs();
            if val == 0.0 {
                0.0
            } else {
                val.powf(p) * r.powf(-a)
            }
        };
        // Split at a sign change so each piece is smooth inside.
        let mut cuts = vec![r0];
        if s != 0.0 {
            let rc = r0 - v0 / s;
            if rc > r0 && rc < r1 {
                cuts.push(rc);
            }
        }
        cuts.push(r1);
        for w in cuts.windows(2) {
            lhs += graded_integral(&f, w[0], w[1]);
        }
        if s != 0.0 {
            let piece = if (b - 1.0).abs() < 1e-14 {
                if r0 == 0.0 {
                    f64::INFINITY
                } else {
                    (r1 / r0).ln()
                }
            } else if r0 == 0.0 && b > 1.0 {
                f64::INFINITY
            } else {
                (r1.powf(1.0 - b) - r0.powf(1.0 - b)) / (1.0 - b)
            };
            rhs += s.abs().powf(p) * piece;
        }
    }
    let tail_val = (v.values[v.values.len() - 1] - shift).abs();
    if tail_val > 0.0 {
        let rk = v.knots[v.knots.len() - 1];
        lhs += if a > 1.0 { tail_val.powf(p) * rk.powf(1.0 - a) / (a - 1.0) } else { f64::INFINITY };
    }
    let bound = constant * rhs;
    let holds = lhs.is_finite() && lhs <= bound * (1.0 + 1e-9) + 1e-300;
    let ratio = if bound > 0.0 { lhs / bound } else { 0.0 };
    Ok(HardyReport { lhs, rhs: bound, ratio, holds })
}

/// ∫|u|^p γ^{-(β+p)} against ∫|∇u|^p γ^{-β} for fields vanishing near Γ.
pub fn hardy_check_nd<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> Result<HardyReport> {
    check_hardy_range(setup, spec)?;
    let lhs = lp_norm_weighted(setup, field, spec, spec.p);
    let rhs = grad_seminorm_weighted(setup, field, spec);
    Ok(hardy_report(lhs, rhs))
}

/// Nonlocal variant with [u]^p on the right.
pub fn hardy_check_nonlocal<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> Result<HardyReport> {
    check_hardy_range(setup, spec)?;
    let lhs = lp_norm_weighted(setup, field, spec, spec.p);
    let rhs = nonlocal_seminorm(setup, field, spec);
    Ok(hardy_report(lhs, rhs))
}

fn check_hardy_range(setup: &Setup, spec: &EnergySpec) -> Result<()> {
    let d = setup.d();
    let ell = setup.region.gamma.ell_max();
    let lo = (d - ell) as f64 - spec.p;
    if !(spec.beta() > lo) {
        return Err(Error::Admissibility(format!("Hardy inequality needs β > d−ℓ−p = {lo}")));
    }
    Ok(())
}

fn hardy_report(lhs: f64, rhs: f64) -> HardyReport {
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    HardyReport { lhs, rhs, ratio, holds: ratio.is_finite() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub quantity: f64,
    pub continuous: bool,
    pub compact: bool,
}

/// d(1/q − 1/p) − α/q + β/p + 1 ≥ 0 (continuous), > 0 with q < dp/(d−p) (compact).
pub fn embedding_predicate(d: usize, p: f64, q: f64, alpha: f64, beta: f64) -> Result<Embedding> {
    let df = d as f64;
    let qstar = if p < df { df * p / (df - p) } else { f64::INFINITY };
    if !(q >= 1.0 && q <= qstar * (1.0 + 1e-14)) {
        return Err(Error::Parameter(format!("q={q} outside [1, {qstar}]")));
    }
    let quantity = df * (1.0 / q - 1.0 / p) - alpha / q + beta / p + 1.0;
    let tol = 1e-12;
    let continuous = quantity >= -tol;
    let compact = quantity > tol && q < qstar * (1.0 - 1e-14);
    Ok(Embedding { quantity, continuous, compact })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub seminorm_delta1: f64,
    pub seminorm_delta2: f64,
    pub lower_constant: f64,
    pub upper_constant: f64,
    pub holds: bool,
}

/// Constant L with [u]_{δ₁} ≥ L·[u]_{δ₂} for δ₁ ≤ δ₂.
pub fn horizon_lower_constant(d: usize, p: f64, beta: f64, kappa0: f64, kappa1: f64, delta2: f64) -> Result<f64> {
    let k = kappa0 * kappa1 * delta2;
    if !(delta2 < 1.0 && k < 1.0) {
        return Err(Error::Parameter(format!("δ₂={delta2} too large for horizon comparison")));
    }
    let e = (d as f64 + p) / p;
    Ok(((1.0 - delta2) / (2.0 * (1.0 + delta2))).powf(e) * ((1.0 - k) / (1.0 + k)).powf(beta.abs() / p))
}

pub fn horizon_invariance_check<F: ScalarField + ?Sized>(
    setup: &Setup,
    field: &F,
    spec: &EnergySpec,
    delta1: f64,
    delta2: f64,
) -> Result<InvarianceReport> {
    let dmax = crate::geometry::max_admissible_delta(spec.lambda.kappa0, spec.lambda.kappa1)?;
    if !(delta1 > 0.0 && delta1 <= delta2 && delta2 < dmax) {
        return Err(Error::Parameter(format!("need 0 < δ₁ ≤ δ₂ < {dmax}")));
    }
    let d = setup.d();
    let p = spec.p;
    let lower = horizon_lower_constant(d, p, spec.beta(), spec.lambda.kappa0, spec.lambda.kappa1, delta2)?;
    let upper = (delta2 / delta1).powf((d as f64 + p) / p);
    let s1 = nonlocal_seminorm(setup, field, &spec.with_delta(delta1)?).powf(1.0 / p);
    let s2 = nonlocal_seminorm(setup, field, &spec.with_delta(delta2)?).powf(1.0 / p);
    let slack = 1e-9 * s2.max(s1);
    let holds = lower * s2 <= s1 + slack && s1 <= upper * s2 + slack;
    Ok(InvarianceReport { seminorm_delta1: s1, seminorm_delta2: s2, lower_constant: lower, upper_constant: upper, holds })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelEquivalenceReport {
    pub seminorm: f64,
    pub general: f64,
    pub lower_constant: f64,
    pub upper_constant: f64,
    pub holds: bool,
}

/// Constants c, C with c[u] ≤ [u]_gen ≤ C[u], from ρ ≥ ρ(c_ρ)1_{B(c_ρ)}, ρ ≤ ρ(0)1_{B(1)}
/// and κ₀^{-1}η ≤ λ ≤ κ₀η, combined with the horizon comparison.
pub fn kernel_equivalence_constants(d: usize, spec: &EnergySpec, rho: &Kernel, lambda: &LambdaSpec) -> Result<(f64, f64)> {
    let p = spec.p;
    let dp = d as f64 + p;
    let cbar = coefficients::seminorm_prefactor(d, p);
    let k0 = lambda.kappa0;
    let c_rho = rho.spec.c_rho;
    let delta = spec.delta;
    let l_low = horizon_lower_constant(d, p, spec.beta(), spec.lambda.kappa0, spec.lambda.kappa1, delta)?;
    let lower_p = rho.eval(c_rho) / cbar * k0.powf(-dp) * (c_rho / k0).powf(dp) * l_low.powf(p);
    let mut upper_p = rho.sup() / cbar * k0.powf(2.0 * dp);
    if k0 > 1.0 {
        let l_up = horizon_lower_constant(d, p, spec.beta(), spec.lambda.kappa0, spec.lambda.kappa1, k0 * delta)?;
        upper_p /= l_up.powf(p);
    }
    Ok((lower_p.powf(1.0 / p), upper_p.powf(1.0 / p)))
}

pub fn kernel_equivalence_check<F: ScalarField + ?Sized>(
    setup: &Setup,
    field: &F,
    spec: &EnergySpec,
    rho: &Kernel,
    lambda: &LambdaSpec,
) -> Result<KernelEquivalenceReport> {
    let d = setup.d();
    let (c, cc) = kernel_equivalence_constants(d, spec, rho, lambda)?;
    let p = spec.p;
    let s = nonlocal_seminorm(setup, field, spec).powf(1.0 / p);
    let g = nonlocal_seminorm_general(setup, field, spec, rho, lambda).powf(1.0 / p);
    let slack = 1e-9 * s.max(g);
    let holds = c * s <= g + slack && g <= cc * s + slack;
    Ok(KernelEquivalenceReport { seminorm: s, general: g, lower_constant: c, upper_constant: cc, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Label, LabeledSet};

    fn setup(res: usize) -> Setup {
        let g = LabeledSet::new(2, vec![Label::point(&[0.5, 0.5], 1.0)], 0.1).unwrap();
        Setup::new(Region::new(Domain::unit_box(2), g).unwrap(), res).unwrap()
    }

    #[test]
    fn lp_examples() {
        let s = setup(32);
        let one = FnField::new(|_: &Point| 1.0);
        let zero = FnField::new(|_: &Point| 0.0);
        let spec0 = EnergySpec::standard(2, 2.0, 0.0, 0.2, 0.1).unwrap();
        assert!((lp_norm_weighted(&s, &one, &spec0, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(lp_norm_weighted(&s, &zero, &spec0, 0.0), 0.0);
        let spec3 = EnergySpec::standard(2, 2.0, 2.5, 0.2, 0.1).unwrap();
        assert_eq!(lp_norm_weighted(&s, &one, &spec3, 0.0), f64::INFINITY);
    }

    #[test]
    fn grad_examples() {
        let s = setup(64);
        let spec = EnergySpec::standard(2, 2.0, 0.0, 0.2, 0.1).unwrap();
        let u = FnField::with_gradient(|x: &Point| x[0], |_: &Point| [1.0, 0.0, 0.0]);
        assert!((grad_seminorm_weighted(&s, &u, &spec) - 1.0).abs() < 1e-12);
        let q = FnField::with_gradient(|x: &Point| x[0] * x[0], |x: &Point| [2.0 * x[0], 0.0, 0.0]);
        assert!((grad_seminorm_weighted(&s, &q, &spec) - 4.0 / 3.0).abs() < 1e-3);
        let c = FnField::new(|_: &Point| 3.0);
        assert!(grad_seminorm_weighted(&s, &c, &spec).abs() < 1e-12);
    }

    #[test]
    fn seminorm_of_linear_field() {
        let s = setup(32);
        let spec = EnergySpec::standard(2, 2.0, 0.0, 0.2, 0.1).unwrap();
        let u = FnField::new(|x: &Point| x[0]);
        assert!((nonlocal_seminorm(&s, &u, &spec) - 1.0).abs() < 1e-10);
        let c = FnField::new(|_: &Point| 2.0);
        assert_eq!(nonlocal_seminorm(&s, &c, &spec), 0.0);
        let gen = nonlocal_seminorm_general(&s, &u, &spec, &spec.kernel, &LambdaSpec::default());
        assert!((gen - nonlocal_seminorm(&s, &u, &spec)).abs() < 1e-10);
    }

    #[test]
    fn ball_average_examples() {
        let s = setup(16);
        let w = WeightSpec::new(0.1, 0.0).unwrap();
        let x0 = [0.5, 0.5, 0.0];
        let u = FnField::new(move |x: &Point| numerics::dist(x, &x0));
        let a = weighted_ball_average(&s, &u, &x0, 0.06, &w).unwrap();
        assert!((a - 0.04).abs() < 1e-10);
        let c = FnField::new(|_: &Point| 2.5);
        let wn = WeightSpec::new(0.1, -1.0).unwrap();
        assert!((weighted_ball_average(&s, &c, &x0, 0.05, &wn).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn hardy_closed_form() {
        let v = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let r = hardy_check_1d(&v, 1, 2.0, 0.0, HardyBranch::AtZero).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-3 && (r.rhs - 4.0).abs() < 1e-12 && r.holds);
        let z = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let r = hardy_check_1d(&z, 1, 2.0, 0.0, HardyBranch::AtZero).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(hardy_check_1d(&v, 1, 2.0, -2.0, HardyBranch::AtZero).is_err());
    }

    #[test]
    fn embedding_examples() {
        let e = embedding_predicate(3, 2.0, 2.0, 1.0, 1.0).unwrap();
        assert!((e.quantity - 1.0).abs() < 1e-14 && e.continuous && e.compact);
        let e = embedding_predicate(3, 2.0, 6.0, 0.0, 0.0).unwrap();
        assert!(e.quantity.abs() < 1e-14 && e.continuous && !e.compact);
        assert!(embedding_predicate(3, 2.0, 7.0, 0.0, 0.0).is_err());
    }
}

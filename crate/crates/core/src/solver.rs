//! Dirichlet-constrained minimization of each energy tier, Euler–Lagrange
//! residuals and the nonlocal boundary flux.

use crate::coefficients::{pow_weight, Kernel};
use crate::energies::{truncated_horizon, truncated_weight, Graph};
use crate::error::{Error, Result};
use crate::funcspace::{EnergySpec, ScalarField, Setup};
use crate::geometry::Component;
use crate::numerics::{self, Point};
use crate::quadrature::BallRule;
use serde::{Deserialize, Serialize};

/// Objective over a vector of node values.
pub trait Objective: Sync {
    fn len(&self) -> usize;
    fn p(&self) -> f64;
    fn energy(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;
    /// Diagonal of the Hessian of the p = 2 version of the objective.
    fn hessian_diagonal(&self) -> Vec<f64>;
}

#[inline]
fn dpow(diff: f64, p: f64) -> f64 {
    // d/dt |t|^p = p|t|^{p−2}t; zero at ties.
    if diff == 0.0 {
        0.0
    } else if p == 2.0 {
        2.0 * diff
    } else {
        p * diff.abs().powf(p - 1.0) * diff.signum()
    }
}

#[inline]
fn ppow(diff: f64, p: f64) -> f64 {
    if p == 2.0 {
        diff * diff
    } else {
        diff.abs().powf(p)
    }
}

type Stencil = ([usize; 8], [f64; 8], usize);

/// Σ_a c_a Σ_q κ_q |I(u)(x_a + r_a z_q) − I(u)(x_a)|^p, with I the clamped
/// multilinear interpolant of the node values. Stencils are precomputed.
pub struct ContinuumObjective {
    n: usize,
    p: f64,
    stride: usize,
    /// Terms of outer point a are term_start[a]..term_start[a+1].
    term_start: Vec<usize>,
    src_idx: Vec<u32>,
    src_w: Vec<f64>,
    coef: Vec<f64>,
    idx: Vec<u32>,
    w: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContinuumTier {
    /// E_δ (with its 1/p).
    Nonlocal,
    /// E_{δ,τ}, no 1/p, clipped to Ω.
    Truncated,
    /// δ → 0 limit of the nonlocal tier on the same grid: one-sided directional
    /// derivatives of the interpolant at the same outer points. A discretization of E₀.
    LocalLimit,
}

impl ContinuumObjective {
    pub fn new(setup: &Setup, spec: &EnergySpec, tier: ContinuumTier) -> Result<Self> {
        let region = &setup.region;
        let p = spec.p;
        let (rule, scale, clip) = match tier {
            ContinuumTier::Nonlocal | ContinuumTier::LocalLimit => (setup.weight_rule(&spec.weight, spec.beta()), 1.0 / p, false),
            ContinuumTier::Truncated => {
                if !(spec.tau > 0.0) {
                    return Err(Error::Parameter("truncated tier needs τ > 0".into()));
                }
                (setup.custom_rule(|x| truncated_weight(region, spec, x), spec.beta().min(0.0)), 1.0, true)
            }
        };
        let grid = &setup.grid;
        let ball = &setup.ball;
        let stride = 1usize << grid.d;
        let kern: Vec<f64> = ball.radii.iter().zip(&ball.weights).map(|(r, w)| w * spec.kernel.eval(*r)).collect();
        let mut obj = ContinuumObjective {
            n: grid.len(),
            p,
            stride,
            term_start: vec![0],
            src_idx: Vec::new(),
            src_w: Vec::new(),
            coef: Vec::new(),
            idx: Vec::new(),
            w: Vec::new(),
        };
        let push = |idx: &mut Vec<u32>, w: &mut Vec<f64>, st: &Stencil| {
            for j in 0..stride {
                if j < st.2 {
                    idx.push(st.0[j] as u32);
                    w.push(st.1[j]);
                } else {
                    idx.push(st.0[0] as u32);
                    w.push(0.0);
                }
            }
        };
        for a in 0..rule.len() {
            let x = rule.points[a];
            let r = match tier {
                ContinuumTier::Nonlocal => spec.delta * region.eta(&x),
                ContinuumTier::Truncated => truncated_horizon(region, spec, &x),
                ContinuumTier::LocalLimit => 1.0,
            };
            let wa = rule.weights[a];
            if !(r > 0.0) || wa == 0.0 || !wa.is_finite() {
                continue;
            }
            if tier == ContinuumTier::LocalLimit {
                let before = obj.coef.len();
                let step = 1e-7 * grid.h();
                for q in 0..ball.len() {
                    if kern[q] == 0.0 {
                        continue;
                    }
                    let z = &ball.points[q];
                    let (si, _, sd, m) = grid.stencil_gradient_clamped(&numerics::axpy(&x, step, z));
                    let mut st: Stencil = ([si[0]; 8], [0.0; 8], m);
                    for j in 0..m {
                        st.0[j] = si[j];
                        st.1[j] = numerics::dot(&sd[j], z);
                    }
                    obj.coef.push(scale * wa * kern[q]);
                    push(&mut obj.idx, &mut obj.w, &st);
                }
                if obj.coef.len() > before {
                    push(&mut obj.src_idx, &mut obj.src_w, &([0; 8], [0.0; 8], 0));
                    obj.term_start.push(obj.coef.len());
                }
                continue;
            }
            let st = match rule.node[a] {
                Some(i) => {
                    let mut idx = [0usize; 8];
                    let mut wt = [0.0; 8];
                    idx[0] = i;
                    wt[0] = 1.0;
                    (idx, wt, 1)
                }
                None => grid.stencil_clamped(&x),
            };
            let ca = scale * wa * r.powf(-p);
            let before = obj.coef.len();
            for q in 0..ball.len() {
                if kern[q] == 0.0 {
                    continue;
                }
                let y = numerics::axpy(&x, r, &ball.points[q]);
                if clip && !region.domain.contains(&y) {
                    continue;
                }
                obj.coef.push(ca * kern[q]);
                push(&mut obj.idx, &mut obj.w, &grid.stencil_clamped(&y));
            }
            if obj.coef.len() > before {
                push(&mut obj.src_idx, &mut obj.src_w, &st);
                obj.term_start.push(obj.coef.len());
            }
        }
        Ok(obj)
    }

    pub fn outer_len(&self) -> usize {
        self.term_start.len() - 1
    }

    pub fn term_count(&self) -> usize {
        self.coef.len()
    }

    #[inline]
    fn gather(idx: &[u32], w: &[f64], u: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..idx.len() {
            s += w[j] * u[idx[j] as usize];
        }
        s
    }
}

impl Objective for ContinuumObjective {
    fn len(&self) -> usize {
        self.n
    }

    fn p(&self) -> f64 {
        self.p
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let k = self.stride;
        numerics::det_sum(self.outer_len(), |a| {
            let ua = Self::gather(&self.src_idx[a * k..(a + 1) * k], &self.src_w[a * k..(a + 1) * k], u);
            let mut s = 0.0;
            for t in self.term_start[a]..self.term_start[a + 1] {
                let ut = Self::gather(&self.idx[t * k..(t + 1) * k], &self.w[t * k..(t + 1) * k], u);
                s += self.coef[t] * ppow(ut - ua, self.p);
            }
            s
        })
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let k = self.stride;
        numerics::det_scatter(self.outer_len(), self.n, |a, acc| {
            let si = &self.src_idx[a * k..(a + 1) * k];
            let sw = &self.src_w[a * k..(a + 1) * k];
            let ua = Self::gather(si, sw, u);
            let mut total = 0.0;
            for t in self.term_start[a]..self.term_start[a + 1] {
                let ti = &self.idx[t * k..(t + 1) * k];
                let tw = &self.w[t * k..(t + 1) * k];
                let g = self.coef[t] * dpow(Self::gather(ti, tw, u) - ua, self.p);
                if g != 0.0 {
                    for j in 0..k {
                        acc[ti[j] as usize] += g * tw[j];
                    }
                    total += g;
                }
            }
            for j in 0..k {
                acc[si[j] as usize] -= total * sw[j];
            }
        })
    }

    fn hessian_diagonal(&self) -> Vec<f64> {
        let k = self.stride;
        numerics::det_scatter(self.outer_len(), self.n, |a, acc| {
            let si = &self.src_idx[a * k..(a + 1) * k];
            let sw = &self.src_w[a * k..(a + 1) * k];
            for t in self.term_start[a]..self.term_start[a + 1] {
                let c = 2.0 * self.coef[t];
                // Row of (target − source) with merged indices.
                let mut idx = [0u32; 16];
                let mut val = [0.0f64; 16];
                let mut m = 0;
                let mut push = |i: u32, v: f64| {
                    for q in 0..m {
                        if idx[q] == i {
                            val[q] += v;
                            return;
                        }
                    }
                    idx[m] = i;
                    val[m] = v;
                    m += 1;
                };
                for j in 0..k {
                    push(self.idx[t * k + j], self.w[t * k + j]);
                }
                for j in 0..k {
                    push(si[j], -sw[j]);
                }
                for q in 0..m {
                    acc[idx[q] as usize] += c * val[q] * val[q];
                }
            }
        })
    }
}

/// Σ_e c_e |u_{i_e} − u_{j_e}|^p.
#[derive(Clone, Debug)]
pub struct EdgeObjective {
    pub n: usize,
    pub p: f64,
    pub edges: Vec<(usize, usize)>,
    pub coef: Vec<f64>,
}

impl EdgeObjective {
    /// Discrete energy E_{n,δ,τ} of a graph.
    pub fn from_graph(graph: &Graph, p: f64) -> Self {
        let coef_all = graph.edge_coefficients(p);
        let mut edges = Vec::new();
        let mut coef = Vec::new();
        for i in 0..graph.len() {
            for e in graph.offsets[i]..graph.offsets[i + 1] {
                if coef_all[e] != 0.0 {
                    edges.push((i, graph.targets[e]));
                    coef.push(coef_all[e]);
                }
            }
        }
        EdgeObjective { n: graph.len(), p, edges, coef }
    }
}

impl Objective for EdgeObjective {
    fn len(&self) -> usize {
        self.n
    }

    fn p(&self) -> f64 {
        self.p
    }

    fn energy(&self, u: &[f64]) -> f64 {
        numerics::det_sum(self.edges.len(), |e| {
            let (i, j) = self.edges[e];
            self.coef[e] * ppow(u[i] - u[j], self.p)
        })
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        numerics::det_scatter(self.edges.len(), self.n, |e, acc| {
            let (i, j) = self.edges[e];
            let g = self.coef[e] * dpow(u[i] - u[j], self.p);
            acc[i] += g;
            acc[j] -= g;
        })
    }

    fn hessian_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            if i != j {
                d[i] += 2.0 * self.coef[e];
                d[j] += 2.0 * self.coef[e];
            }
        }
        d
    }
}

/// Gradient of the objective at u (all coordinates, fixed ones included).
pub fn energy_gradient<O: Objective + ?Sized>(obj: &O, u: &[f64]) -> Vec<f64> {
    obj.gradient(u)
}

/// Nodes pinned by each labeled component: those whose cell closure meets it.
pub fn dirichlet_nodes(setup: &Setup) -> Result<Vec<(usize, f64)>> {
    let g = &setup.grid;
    let d = g.d;
    let mut out = Vec::new();
    for (ci, c) in setup.region.gamma.components.iter().enumerate() {
        let (lo, hi) = match &c.geom {
            Component::Point(p) => (*p, *p),
            Component::Box { lo, hi } => (*lo, *hi),
        };
        let before = out.len();
        for (ni, &li) in g.node_lattice.iter().enumerate() {
            let (a, b) = g.cell_bounds(g.lattice_coords(li));
            if (0..d).all(|j| hi[j] >= a[j] - 1e-12 && lo[j] <= b[j] + 1e-12) {
                out.push((ni, c.value));
            }
        }
        if out.len() == before {
            return Err(Error::Config(format!("labeled component {ci} touches no grid cell")));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop when |∇E|_free ≤ rel_tol·|∇E(u₀)|_free.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
    pub energy_tol: f64,
    pub init: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { rel_tol: 1e-8, max_iter: 20000, cg_tol: 1e-10, energy_tol: 1e-12, init: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub values: Vec<f64>,
    pub energy: f64,
    pub gradient_norm: f64,
    pub initial_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub non_unique: bool,
    pub method: String,
    pub residual_max: f64,
    pub residual_median: f64,
}

fn norm_free(g: &[f64], free: &[usize]) -> f64 {
    numerics::det_sum(free.len(), |k| g[free[k]] * g[free[k]]).sqrt()
}

fn dot_free(a: &[f64], b: &[f64], free: &[usize]) -> f64 {
    numerics::det_sum(free.len(), |k| a[free[k]] * b[free[k]])
}

/// Minimize with the given node values pinned.
pub fn solve_dirichlet<O: Objective + ?Sized>(obj: &O, fixed: &[(usize, f64)], opts: &SolveOptions) -> Result<SolveReport> {
    let n = obj.len();
    let mut pinned: Vec<Option<f64>> = vec![None; n];
    for &(i, v) in fixed {
        if i >= n {
            return Err(Error::Parameter(format!("pinned node {i} out of range")));
        }
        match pinned[i] {
            Some(w) if w != v => return Err(Error::Config(format!("node {i} pinned to two values {w} and {v}"))),
            _ => pinned[i] = Some(v),
        }
    }
    let free: Vec<usize> = (0..n).filter(|i| pinned[*i].is_none()).collect();
    let mean = if fixed.is_empty() { 0.0 } else { fixed.iter().map(|f| f.1).sum::<f64>() / fixed.len() as f64 };
    let mut u = match &opts.init {
        Some(v) if v.len() == n => v.clone(),
        Some(_) => return Err(Error::Parameter("initial guess has wrong length".into())),
        None => vec![mean; n],
    };
    for (i, pv) in pinned.iter().enumerate() {
        if let Some(v) = pv {
            u[i] = *v;
        }
    }
    if fixed.is_empty() {
        let c = u.iter().sum::<f64>() / n.max(1) as f64;
        let u = vec![c; n];
        return Ok(SolveReport {
            energy: obj.energy(&u),
            values: u,
            gradient_norm: 0.0,
            initial_gradient_norm: 0.0,
            iterations: 0,
            converged: true,
            non_unique: true,
            method: "constant".into(),
            residual_max: 0.0,
            residual_median: 0.0,
        });
    }
    let g0 = obj.gradient(&u);
    let gn0 = norm_free(&g0, &free);
    let (iterations, method) = if gn0 == 0.0 {
        (0, "trivial")
    } else if obj.p() == 2.0 {
        (conjugate_gradient(obj, &mut u, &free, &g0, opts), "pcg")
    } else {
        (accelerated_descent(obj, &mut u, &free, gn0, opts), "nesterov")
    };
    let g = obj.gradient(&u);
    let gn = norm_free(&g, &free);
    let res: Vec<f64> = free.iter().map(|&i| g[i].abs()).collect();
    let rmax = res.iter().cloned().fold(0.0, f64::max);
    let rmed = if res.is_empty() { 0.0 } else { numerics::median(&res) };
    Ok(SolveReport {
        energy: obj.energy(&u),
        values: u,
        gradient_norm: gn,
        initial_gradient_norm: gn0,
        iterations,
        converged: gn <= opts.rel_tol * gn0 || gn0 == 0.0,
        non_unique: false,
        method: method.into(),
        residual_max: rmax,
        residual_median: rmed,
    })
}

/// Jacobi-preconditioned CG on the free block; the gradient map is the Hessian.
fn conjugate_gradient<O: Objective + ?Sized>(obj: &O, u: &mut [f64], free: &[usize], g0: &[f64], opts: &SolveOptions) -> usize {
    let n = u.len();
    let diag = obj.hessian_diagonal();
    let minv: Vec<f64> = (0..n).map(|i| if diag[i] > 0.0 { 1.0 / diag[i] } else { 0.0 }).collect();
    let hess = |v: &[f64]| obj.gradient(v);
    let mut r = vec![0.0; n];
    for &i in free {
        r[i] = -g0[i];
    }
    let bnorm = norm_free(&r, free);
    let mut z = vec![0.0; n];
    for &i in free {
        z[i] = minv[i] * r[i];
    }
    let mut d = z.clone();
    let mut rz = dot_free(&r, &z, free);
    let mut it = 0;
    while it < opts.max_iter {
        if norm_free(&r, free) <= opts.cg_tol * bnorm {
            break;
        }
        let hd = hess(&d);
        let dhd = dot_free(&d, &hd, free);
        if !(dhd > 0.0) {
            break;
        }
        let alpha = rz / dhd;
        for &i in free {
            u[i] += alpha * d[i];
            r[i] -= alpha * hd[i];
            z[i] = minv[i] * r[i];
        }
        let rz_new = dot_free(&r, &z, free);
        let beta = rz_new / rz;
        rz = rz_new;
        for &i in free {
            d[i] = z[i] + beta * d[i];
        }
        it += 1;
    }
    it
}

/// Nesterov acceleration with function-value restart and backtracking.
fn accelerated_descent<O: Objective + ?Sized>(obj: &O, u: &mut [f64], free: &[usize], gn0: f64, opts: &SolveOptions) -> usize {
    let n = u.len();
    let mut x = u.to_vec();
    let mut y = x.clone();
    let mut ex = obj.energy(&x);
    let mut t = 1.0f64;
    let mut lip = {
        let d = obj.hessian_diagonal();
        free.iter().map(|&i| d[i]).fold(1e-300, f64::max)
    };
    let mut stall = 0;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        let gy = obj.gradient(&y);
        let ey = obj.energy(&y);
        let gg = dot_free(&gy, &gy, free);
        let gny = gg.sqrt();
        if gny <= opts.rel_tol * gn0 && ey <= ex {
            x.copy_from_slice(&y);
            break;
        }
        let mut xn = vec![0.0; n];
        let mut en;
        loop {
            xn.copy_from_slice(&y);
            for &i in free {
                xn[i] -= gy[i] / lip;
            }
            en = obj.energy(&xn);
            if en <= ey - 0.5 * gg / lip * (1.0 - 1e-12) || lip > 1e300 {
                break;
            }
            lip *= 2.0;
        }
        if en > ex {
            // Restart momentum from the last iterate.
            t = 1.0;
            y.copy_from_slice(&x);
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / tn;
        for &i in free {
            y[i] = xn[i] + mom * (xn[i] - x[i]);
        }
        let rel = (ex - en).abs() / ex.abs().max(1e-300);
        x = xn;
        ex = en;
        t = tn;
        lip *= 0.95;
        stall = if rel < opts.energy_tol { stall + 1 } else { 0 };
        if stall >= 20 {
            break;
        }
    }
    u.copy_from_slice(&x);
    it
}

/// L_{p,δ}u at each grid node (interior quadrature of both kernel terms).
pub fn el_residual<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> Vec<f64> {
    let region = &setup.region;
    let ball = &setup.ball;
    let d = setup.d();
    let p = spec.p;
    let delta = spec.delta;
    let wgt = |x: &Point| pow_weight(spec.weight.gamma(region, x), spec.beta());
    let phi = |t: f64| if t == 0.0 { 0.0 } else { t.abs().powf(p - 2.0) * t };
    let nodes = &setup.grid.nodes;
    numerics::det_map(nodes.len(), |i| {
        let x = &nodes[i];
        let ux = field.value(x);
        let ex = region.eta(x);
        if ex <= 0.0 {
            return 0.0;
        }
        let r1 = delta * ex;
        let wx = wgt(x);
        let mut s = 0.0;
        for q in 0..ball.len() {
            let k = spec.kernel.eval(ball.radii[q]);
            if k != 0.0 {
                let y = numerics::axpy(x, r1, &ball.points[q]);
                s += ball.weights[q] * k * wx * phi(ux - field.value(&y)) * r1.powf(-p);
            }
        }
        // Reversed term: y with |x−y| < δη(y) ⊂ B(x, δη(x)/(1−δ)).
        let r2 = r1 / (1.0 - delta);
        for q in 0..ball.len() {
            let y = numerics::axpy(x, r2, &ball.points[q]);
            if !region.domain.contains(&y) {
                continue;
            }
            let ry = delta * region.eta(&y);
            if ry <= 0.0 {
                continue;
            }
            let k = spec.kernel.eval(numerics::dist(x, &y) / ry);
            if k != 0.0 {
                s += ball.weights[q] * r2.powi(d as i32) * k * wgt(&y) * phi(ux - field.value(&y)) / ry.powf(d as f64 + p);
            }
        }
        s
    })
}

/// BF_{p,δ}(∇u, ν) = ∫_{B(0,1)} ln((1+δν·z)/(1−δν·z)) ρ(|z|)/(2δ) |∇u·z|^{p−2}(∇u·z) dz.
pub fn nonlocal_flux(grad: &Point, nu: &Point, delta: f64, p: f64, kernel: &Kernel, ball: &BallRule) -> Result<f64> {
    if (numerics::norm(nu) - 1.0).abs() > 1e-10 {
        return Err(Error::Parameter("ν must be a unit vector".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("δ={delta} outside (0,1)")));
    }
    let mut s = 0.0;
    for q in 0..ball.len() {
        let z = &ball.points[q];
        let nz = numerics::dot(nu, z);
        let gz = numerics::dot(grad, z);
        if gz == 0.0 {
            continue;
        }
        let lw = ((1.0 + delta * nz) / (1.0 - delta * nz)).ln();
        s += ball.weights[q] * lw * kernel.eval(ball.radii[q]) / (2.0 * delta) * gz.abs().powf(p - 2.0) * gz;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::indicator_kernel;
    use crate::energies::{build_graph, discrete_energy};
    use crate::funcspace::{FnField, GridField};
    use crate::geometry::{Domain, Label, LabeledSet, Region};

    fn setup(res: usize, labels: Vec<Label>) -> Setup {
        let g = LabeledSet::new(2, labels, 0.05).unwrap();
        Setup::new(Region::new(Domain::unit_box(2), g).unwrap(), res).unwrap()
    }

    #[test]
    fn continuum_objective_matches_energy() {
        let s = setup(16, vec![Label::point(&[0.5, 0.5], 1.0)]);
        let spec = EnergySpec::standard(2, 2.0, 1.0, 0.2, 0.1).unwrap();
        let obj = ContinuumObjective::new(&s, &spec, ContinuumTier::Nonlocal).unwrap();
        let u = FnField::new(|x: &Point| x[0] * x[1]);
        let f = GridField::sample(&s.grid, &u);
        let e = obj.energy(&f.values);
        assert!(e > 0.0);
        let c = vec![2.0; s.grid.len()];
        assert!(obj.energy(&c) < 1e-25);
        assert!(obj.gradient(&c).iter().all(|g| g.abs() < 1e-12));
        let g1 = obj.gradient(&f.values);
        let f2: Vec<f64> = f.values.iter().map(|v| 2.0 * v).collect();
        let g2 = obj.gradient(&f2);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn single_label_gives_constant() {
        let s = setup(12, vec![Label::point(&[0.5, 0.5], 1.0)]);
        let spec = EnergySpec::standard(2, 2.0, 1.0, 0.2, 0.1).unwrap();
        let obj = ContinuumObjective::new(&s, &spec, ContinuumTier::Nonlocal).unwrap();
        let fixed = dirichlet_nodes(&s).unwrap();
        assert_eq!(fixed.len(), 4);
        let rep = solve_dirichlet(&obj, &fixed, &SolveOptions { init: Some(vec![0.0; s.grid.len()]), ..Default::default() }).unwrap();
        assert!(rep.converged);
        assert!(rep.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(rep.energy < 1e-14);
    }

    #[test]
    fn three_node_graph_closed_form() {
        let obj = EdgeObjective { n: 3, p: 2.0, edges: vec![(0, 2), (2, 0), (1, 2), (2, 1)], coef: vec![1.0, 0.5, 2.0, 1.0] };
        let rep = solve_dirichlet(&obj, &[(0, 0.0), (1, 1.0)], &SolveOptions::default()).unwrap();
        // w₀ = 1.5, w₁ = 3.
        assert!((rep.values[2] - 3.0 / 4.5).abs() < 1e-12);
        let obj3 = EdgeObjective { p: 3.0, ..obj };
        let rep3 = solve_dirichlet(&obj3, &[(0, 0.0), (1, 1.0)], &SolveOptions::default()).unwrap();
        // Stationarity: 1.5 u² = 3 (1−u)² → u = √2/(1+√2).
        let expect = 2f64.sqrt() / (1.0 + 2f64.sqrt());
        assert!((rep3.values[2] - expect).abs() < 1e-6, "{}", rep3.values[2]);
    }

    #[test]
    fn graph_solve_and_energy() {
        let r =
            Region::new(Domain::unit_box(2), LabeledSet::new(2, vec![Label::point(&[0.3, 0.5], 0.0), Label::point(&[0.7, 0.5], 1.0)], 0.04).unwrap())
                .unwrap();
        let spec = EnergySpec::standard(2, 2.0, 1.0, 0.3, 0.04).unwrap().with_tau(0.2);
        let pts = crate::geometry::sample_uniform(&r.domain, 200, 3).unwrap();
        let g = build_graph(&r, &pts, &spec).unwrap();
        let obj = EdgeObjective::from_graph(&g, 2.0);
        let rep = solve_dirichlet(&obj, &g.label_values(), &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        assert!((obj.energy(&rep.values) - discrete_energy(&g, &rep.values, 2.0).unwrap()).abs() < 1e-10 * rep.energy);
        assert!(rep.values.iter().all(|v| *v >= -1e-9 && *v <= 1.0 + 1e-9));
    }

    #[test]
    fn flux_examples() {
        let k = indicator_kernel(2, 2.0);
        let ball = BallRule::standard(2);
        let nu = [1.0, 0.0, 0.0];
        assert!(nonlocal_flux(&[0.0, 1.0, 0.0], &nu, 0.2, 2.0, &k, &ball).unwrap().abs() < 1e-12);
        assert_eq!(nonlocal_flux(&[0.0, 0.0, 0.0], &nu, 0.2, 2.0, &k, &ball).unwrap(), 0.0);
        let lim: f64 = (0..ball.len()).map(|q| ball.weights[q] * ball.points[q][0].powi(2) * k.eval(ball.radii[q])).sum();
        let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|d| (nonlocal_flux(&nu, &nu, *d, 2.0, &k, &ball).unwrap() - lim).abs()).collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 1e-2 * lim);
    }
}

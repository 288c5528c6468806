//! Local, nonlocal and discrete energies, the label extension and graph construction.

use crate::coefficients::{pow_weight, WeightMode};
use crate::error::{Error, Result};
use crate::funcspace::{grad_seminorm_weighted, nonlocal_sum, EnergySpec, ScalarField, Setup};
use crate::geometry::{Component, Label, LabeledSet, Region};
use crate::numerics::{self, Point, ORIGIN};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

fn bump_f(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on [0,1], 0 on [2,∞).
pub fn cutoff(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = bump_f(2.0 - t);
        a / (a + bump_f(t - 1.0))
    }
}

pub fn cutoff_derivative(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        return 0.0;
    }
    let (s, r) = (2.0 - t, t - 1.0);
    let (a, b) = (bump_f(s), bump_f(r));
    // d/dt a = −a/s², d/dt b = b/r².
    let da = -a / (s * s);
    let db = b / (r * r);
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

fn component_distance(a: &Component, b: &Component) -> f64 {
    let bounds = |c: &Component| match c {
        Component::Point(p) => (*p, *p),
        Component::Box { lo, hi } => (*lo, *hi),
    };
    let (alo, ahi) = bounds(a);
    let (blo, bhi) = bounds(b);
    let mut gap = ORIGIN;
    for i in 0..3 {
        gap[i] = (blo[i] - ahi[i]).max(alo[i] - bhi[i]).max(0.0);
    }
    numerics::norm(&gap)
}

/// E_Γ g(x) = Σ g_i ψ(dist(x, Γ_i)/R).
#[derive(Clone, Debug)]
pub struct LabelExtension {
    pub labels: Vec<Label>,
    pub radius: f64,
}

impl ScalarField for LabelExtension {
    fn value(&self, x: &Point) -> f64 {
        self.labels.iter().map(|l| l.value * cutoff(l.nearest(x).1 / self.radius)).sum()
    }

    fn gradient(&self, x: &Point) -> Option<Point> {
        let mut g = ORIGIN;
        for l in &self.labels {
            let (f, dd) = l.nearest(x);
            if dd > 0.0 {
                let c = l.value * cutoff_derivative(dd / self.radius) / (self.radius * dd);
                g = numerics::axpy(&g, c, &numerics::sub(x, &f));
            }
        }
        Some(g)
    }
}

pub fn extend_labels(gamma: &LabeledSet, radius: f64) -> Result<LabelExtension> {
    if !(radius > 0.0) {
        return Err(Error::Parameter("extension radius must be positive".into()));
    }
    let c = &gamma.components;
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            if component_distance(&c[i].geom, &c[j].geom) < 4.0 * radius {
                return Err(Error::Config(format!("2R-neighborhoods of components {i} and {j} overlap")));
            }
        }
    }
    Ok(LabelExtension { labels: c.clone(), radius })
}

/// E₀(u) = (1/p) ∫ |∇u|^p γ^{-β}.
pub fn local_energy<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> f64 {
    grad_seminorm_weighted(setup, field, spec) / spec.p
}

fn kernel_table(setup: &Setup, spec: &EnergySpec) -> Vec<f64> {
    setup.ball.radii.iter().map(|r| spec.kernel.eval(*r)).collect()
}

/// E_δ(u) with kernel ρ(|y−x|/δη(x)).
pub fn nonlocal_energy<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> f64 {
    let rule = setup.weight_rule(&spec.weight, spec.beta());
    let region = &setup.region;
    let delta = spec.delta;
    nonlocal_sum(setup, field, &rule, |x| delta * region.eta(x), &kernel_table(setup, spec), spec.p, false) / spec.p
}

/// Outer weight of the truncated energy, (γ^τ)^{-max(β,0)} γ^{-min(β,0)}.
pub fn truncated_weight(region: &Region, spec: &EnergySpec, x: &Point) -> f64 {
    spec.weight.factor(region, x, WeightMode::Truncated { tau: spec.tau }, spec.beta())
}

/// η_δ^τ(x) = δ·max(η(x), τ).
pub fn truncated_horizon(region: &Region, spec: &EnergySpec, x: &Point) -> f64 {
    spec.delta * region.eta(x).max(spec.tau)
}

/// E_{δ,τ}(u), no 1/p prefactor; ball quadrature clipped to Ω.
pub fn truncated_nonlocal_energy<F: ScalarField + ?Sized>(setup: &Setup, field: &F, spec: &EnergySpec) -> Result<f64> {
    if !(spec.tau > 0.0) {
        return Err(Error::Parameter("truncated energy needs τ > 0".into()));
    }
    let region = &setup.region;
    let b = spec.beta().min(0.0);
    let rule = setup.custom_rule(|x| truncated_weight(region, spec, x), b);
    Ok(nonlocal_sum(setup, field, &rule, |x| truncated_horizon(region, spec, x), &kernel_table(setup, spec), spec.p, true))
}

/// Uniform bins over a bounding box for radius queries.
#[derive(Clone, Debug)]
pub struct SpatialHash {
    d: usize,
    lo: Point,
    cell: f64,
    dims: [usize; 3],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl SpatialHash {
    pub fn new(d: usize, points: &[Point], cell: f64) -> Self {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..d {
            lo[i] = points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            hi[i] = points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            if !lo[i].is_finite() {
                lo[i] = 0.0;
                hi[i] = 0.0;
            }
        }
        let cell = cell.max(1e-12);
        let mut dims = [1usize; 3];
        for i in 0..d {
            dims[i] = (((hi[i] - lo[i]) / cell).floor() as usize + 1).min(4096);
        }
        let mut h = SpatialHash { d, lo, cell, dims, start: Vec::new(), items: Vec::new() };
        let nb = dims[0] * dims[1] * dims[2];
        let keys: Vec<usize> = points.iter().map(|p| h.key(&h.coords(p))).collect();
        let mut count = vec![0usize; nb + 1];
        for k in &keys {
            count[k + 1] += 1;
        }
        for i in 0..nb {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut items = vec![0; points.len()];
        for (i, k) in keys.iter().enumerate() {
            items[fill[*k]] = i;
            fill[*k] += 1;
        }
        h.start = count;
        h.items = items;
        h
    }

    fn coords(&self, x: &Point) -> [usize; 3] {
        let mut c = [0usize; 3];
        for i in 0..self.d {
            c[i] = (((x[i] - self.lo[i]) / self.cell).floor().max(0.0) as usize).min(self.dims[i] - 1);
        }
        c
    }

    fn key(&self, c: &[usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    /// Calls `f(j)` for every point j within distance < r of x (plus some beyond).
    pub fn for_candidates<F: FnMut(usize)>(&self, x: &Point, r: f64, mut f: F) {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for i in 0..self.d {
            let a = ((x[i] - r - self.lo[i]) / self.cell).floor();
            let b = ((x[i] + r - self.lo[i]) / self.cell).floor();
            if b < 0.0 || a > (self.dims[i] - 1) as f64 {
                return;
            }
            lo[i] = a.max(0.0) as usize;
            hi[i] = (b.max(0.0) as usize).min(self.dims[i] - 1);
        }
        for k2 in lo[2]..=hi[2] {
            for k1 in lo[1]..=hi[1] {
                let base = self.dims[0] * (k1 + self.dims[1] * k2);
                let (s, e) = (self.start[base + lo[0]], self.start[base + hi[0] + 1]);
                for &j in &self.items[s..e] {
                    f(j);
                }
            }
        }
    }
}

/// Σ_i m_i Σ_j m_j ρ(|P_i−P_j|/η^τ(P_i)) |u_i−u_j|^p w(P_i)/η^τ(P_i)^{d+p}, with
/// kernel and weight arguments taken at positions P and values at the nodes.
pub fn pair_sum_energy(region: &Region, spec: &EnergySpec, positions: &[Point], values: &[f64], measures: &[f64]) -> Result<f64> {
    if positions.len() != values.len() || values.len() != measures.len() {
        return Err(Error::Parameter("pair sum: mismatched lengths".into()));
    }
    if !(spec.tau > 0.0) {
        return Err(Error::Parameter("truncated energy needs τ > 0".into()));
    }
    let d = region.d();
    let p = spec.p;
    let horizon: Vec<f64> = positions.iter().map(|x| truncated_horizon(region, spec, x)).collect();
    let weight: Vec<f64> = positions.iter().map(|x| truncated_weight(region, spec, x)).collect();
    let rmax = horizon.iter().cloned().fold(0.0, f64::max);
    let hash = SpatialHash::new(d, positions, rmax.max(1e-9) / 2.0);
    let dp = d as f64 + p;
    Ok(numerics::det_sum(positions.len(), |i| {
        let x = &positions[i];
        let r = horizon[i];
        let mut s = 0.0;
        hash.for_candidates(x, r, |j| {
            let dist = numerics::dist(x, &positions[j]);
            if dist < r {
                let diff = (values[i] - values[j]).abs();
                if diff > 0.0 {
                    s += measures[j] * spec.kernel.eval(dist / r) * diff.powf(p);
                }
            }
        });
        measures[i] * weight[i] * s / r.powf(dp)
    }))
}

/// Grid pair-sum form of E_{δ,τ}(u) on node values.
pub fn truncated_energy_pairs(setup: &Setup, values: &[f64], spec: &EnergySpec) -> Result<f64> {
    pair_sum_energy(&setup.region, spec, &setup.grid.nodes, values, &setup.grid.measures)
}

/// Point cloud 𝒳_n = X_n ∪ Γ with heterogeneous truncated horizons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub d: usize,
    pub beta: f64,
    pub n_samples: usize,
    pub positions: Vec<Point>,
    pub eta_tau: Vec<f64>,
    pub gamma_tau: Vec<f64>,
    pub gamma: Vec<f64>,
    pub label: Vec<Option<f64>>,
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
    pub kernel: Vec<f64>,
    /// Sum over labeled nodes as sources too (default true).
    pub include_gamma_sources: bool,
}

impl Graph {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_kernels(&self, i: usize) -> &[f64] {
        &self.kernel[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn mean_degree(&self) -> f64 {
        self.targets.len() as f64 / self.len().max(1) as f64
    }

    /// 1/((γ^τ)^{max(β,0)} γ^{min(β,0)}) at node i.
    pub fn weight_factor(&self, i: usize) -> f64 {
        pow_weight(self.gamma_tau[i], self.beta.max(0.0)) * pow_weight(self.gamma[i], self.beta.min(0.0))
    }

    pub fn source_active(&self, i: usize) -> bool {
        self.include_gamma_sources || self.label[i].is_none()
    }

    /// Per-edge coefficients c_xy (the energy is Σ c_xy |u_x − u_y|^p).
    pub fn edge_coefficients(&self, p: f64) -> Vec<f64> {
        let n2 = (self.len() as f64).powi(2);
        let dp = self.d as f64 + p;
        let mut c = vec![0.0; self.targets.len()];
        for i in 0..self.len() {
            if !self.source_active(i) {
                continue;
            }
            let s = self.weight_factor(i) / (self.eta_tau[i].powf(dp) * n2);
            for e in self.offsets[i]..self.offsets[i + 1] {
                c[e] = s * self.kernel[e];
            }
        }
        c
    }

    pub fn label_values(&self) -> Vec<(usize, f64)> {
        self.label.iter().enumerate().filter_map(|(i, l)| l.map(|v| (i, v))).collect()
    }

    pub fn export<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# wplap-graph v1 d={} beta={} n_samples={} include_gamma_sources={}",
            self.d, self.beta, self.n_samples, self.include_gamma_sources
        );
        let _ = writeln!(s, "[nodes] {}", self.len());
        for i in 0..self.len() {
            let _ = write!(s, "{i}");
            for k in 0..self.d {
                let _ = write!(s, " {}", self.positions[i][k]);
            }
            let (flag, val) = match self.label[i] {
                Some(v) => (1, v),
                None => (0, 0.0),
            };
            let _ = writeln!(s, " {} {} {} {} {}", self.eta_tau[i], self.gamma_tau[i], self.gamma[i], flag, val);
        }
        let _ = writeln!(s, "[edges] {}", self.targets.len());
        for i in 0..self.len() {
            for e in self.offsets[i]..self.offsets[i + 1] {
                let _ = writeln!(s, "{i} {} {}", self.targets[e], self.kernel[e]);
            }
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn import<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        let mut lines = r.lines();
        let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("unexpected end of graph file"))?.map_err(Error::from) };
        let header = next()?;
        let field = |key: &str| -> Result<String> {
            header
                .split_whitespace()
                .find_map(|t| t.strip_prefix(&format!("{key}=")).map(str::to_string))
                .ok_or_else(|| bad(&format!("missing header field {key}")))
        };
        if !header.starts_with("# wplap-graph v1") {
            return Err(bad("not a version-1 graph file"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer '{s}'")));
        let d = int(&field("d")?)?;
        let beta = num(&field("beta")?)?;
        let n_samples = int(&field("n_samples")?)?;
        let include_gamma_sources = field("include_gamma_sources")? == "true";
        let count = |line: String, tag: &str| -> Result<usize> {
            let rest = line.strip_prefix(tag).ok_or_else(|| bad(&format!("expected {tag}")))?;
            int(rest.trim())
        };
        let nn = count(next()?, "[nodes]")?;
        let mut g = Graph {
            d,
            beta,
            n_samples,
            positions: Vec::with_capacity(nn),
            eta_tau: Vec::with_capacity(nn),
            gamma_tau: Vec::with_capacity(nn),
            gamma: Vec::with_capacity(nn),
            label: Vec::with_capacity(nn),
            offsets: vec![0; nn + 1],
            targets: Vec::new(),
            kernel: Vec::new(),
            include_gamma_sources,
        };
        for i in 0..nn {
            let line = next()?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != d + 6 || int(t[0])? != i {
                return Err(bad(&format!("malformed node row {i}")));
            }
            let mut x = ORIGIN;
            for k in 0..d {
                x[k] = num(t[1 + k])?;
            }
            g.positions.push(x);
            g.eta_tau.push(num(t[d + 1])?);
            g.gamma_tau.push(num(t[d + 2])?);
            g.gamma.push(num(t[d + 3])?);
            g.label.push(if t[d + 4] == "1" { Some(num(t[d + 5])?) } else { None });
        }
        let ne = count(next()?, "[edges]")?;
        let mut last = 0;
        for _ in 0..ne {
            let line = next()?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(bad("malformed edge row"));
            }
            let (src, dst) = (int(t[0])?, int(t[1])?);
            if src < last || src >= nn || dst >= nn {
                return Err(bad("edges must be sorted by source and in range"));
            }
            last = src;
            g.offsets[src + 1] += 1;
            g.targets.push(dst);
            g.kernel.push(num(t[2])?);
        }
        for i in 0..nn {
            g.offsets[i + 1] += g.offsets[i];
        }
        Ok(g)
    }
}

/// Graph on samples plus labeled points; y ∈ N(x) iff |x−y| < η_δ^τ(x).
pub fn build_graph(region: &Region, samples: &[Point], spec: &EnergySpec) -> Result<Graph> {
    if !(spec.tau > 0.0) {
        return Err(Error::Parameter("graph construction needs τ > 0".into()));
    }
    let d = region.d();
    let mut positions: Vec<Point> = samples.to_vec();
    let mut label = vec![None; samples.len()];
    for (i, c) in region.gamma.components.iter().enumerate() {
        match &c.geom {
            Component::Point(p) => {
                positions.push(*p);
                label.push(Some(c.value));
            }
            Component::Box { .. } => {
                return Err(Error::Config(format!("component {i}: the discrete tier takes point labels only")));
            }
        }
    }
    let eta_tau: Vec<f64> = positions.iter().map(|x| truncated_horizon(region, spec, x)).collect();
    let gamma: Vec<f64> = positions.iter().map(|x| spec.weight.gamma(region, x)).collect();
    let gamma_tau: Vec<f64> = gamma.iter().map(|g| g.max(spec.tau)).collect();
    let rmax = eta_tau.iter().cloned().fold(0.0, f64::max);
    let hash = SpatialHash::new(d, &positions, rmax.max(1e-9) / 2.0);
    let lists: Vec<Vec<(usize, f64)>> = numerics::det_map(positions.len(), |i| {
        let x = &positions[i];
        let r = eta_tau[i];
        let mut out = Vec::new();
        hash.for_candidates(x, r, |j| {
            if j != i {
                let dist = numerics::dist(x, &positions[j]);
                if dist < r {
                    out.push((j, spec.kernel.eval(dist / r)));
                }
            }
        });
        out.sort_by_key(|e| e.0);
        out
    });
    let mut offsets = Vec::with_capacity(positions.len() + 1);
    offsets.push(0);
    let mut targets = Vec::new();
    let mut kernel = Vec::new();
    for l in lists {
        for (j, k) in l {
            targets.push(j);
            kernel.push(k);
        }
        offsets.push(targets.len());
    }
    Ok(Graph {
        d,
        beta: spec.beta(),
        n_samples: samples.len(),
        positions,
        eta_tau,
        gamma_tau,
        gamma,
        label,
        offsets,
        targets,
        kernel,
        include_gamma_sources: true,
    })
}

/// E_{n,δ,τ}(u) = (1/N²) Σ_x Σ_{y∈N(x)} ρ |u(x)−u(y)|^p / (weight · η^τ(x)^{d+p}).
pub fn discrete_energy(graph: &Graph, values: &[f64], p: f64) -> Result<f64> {
    if values.len() != graph.len() {
        return Err(Error::Parameter(format!("{} values for {} graph nodes", values.len(), graph.len())));
    }
    let c = graph.edge_coefficients(p);
    Ok(numerics::det_sum(graph.len(), |i| {
        let mut s = 0.0;
        for e in graph.offsets[i]..graph.offsets[i + 1] {
            let diff = (values[i] - values[graph.targets[e]]).abs();
            if diff > 0.0 {
                s += c[e] * diff.powf(p);
            }
        }
        s
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::FnField;
    use crate::geometry::{Domain, Label};

    fn region() -> Region {
        let g = LabeledSet::new(2, vec![Label::point(&[0.5, 0.5], 1.0)], 0.1).unwrap();
        Region::new(Domain::unit_box(2), g).unwrap()
    }

    #[test]
    fn extension_examples() {
        let r = region();
        let e = extend_labels(&r.gamma, 0.05).unwrap();
        assert_eq!(e.value(&[0.5, 0.5, 0.0]), 1.0);
        assert_eq!(e.value(&[0.5, 0.61, 0.0]), 0.0);
        let two = LabeledSet::new(2, vec![Label::point(&[0.2, 0.5], 0.0), Label::point(&[0.8, 0.5], 1.0)], 0.05).unwrap();
        let e = extend_labels(&two, 0.05).unwrap();
        assert_eq!(e.value(&[0.21, 0.5, 0.0]), 0.0);
        assert_eq!(e.value(&[0.79, 0.5, 0.0]), 1.0);
        assert!(extend_labels(&two, 0.2).is_err());
        let h = 1e-6;
        let x = [0.5, 0.58, 0.0];
        let g = e.gradient(&x).unwrap();
        let e1 = extend_labels(&r.gamma, 0.05).unwrap();
        let g1 = e1.gradient(&x).unwrap();
        let fd = (e1.value(&[0.5, 0.58 + h, 0.0]) - e1.value(&[0.5, 0.58 - h, 0.0])) / (2.0 * h);
        assert!((g1[1] - fd).abs() < 1e-6 && g[0] == 0.0);
    }

    #[test]
    fn energy_examples() {
        let s = Setup::new(region(), 32).unwrap();
        let spec = EnergySpec::standard(2, 2.0, 0.0, 0.2, 0.1).unwrap();
        let u = FnField::with_gradient(|x: &Point| x[0], |_: &Point| [1.0, 0.0, 0.0]);
        assert!((local_energy(&s, &u, &spec) - 0.5).abs() < 1e-12);
        assert!((nonlocal_energy(&s, &u, &spec) - 0.5).abs() < 1e-10);
        let c = FnField::new(|_: &Point| 1.5);
        assert_eq!(nonlocal_energy(&s, &c, &spec), 0.0);
        assert_eq!(truncated_nonlocal_energy(&s, &c, &spec.with_tau(0.1)).unwrap(), 0.0);
    }

    #[test]
    fn two_node_graph() {
        // No labels: η is the boundary distance.
        let r = Region::new(Domain::unit_box(2), LabeledSet::empty(2)).unwrap();
        let spec = EnergySpec::standard(2, 2.0, 0.0, 0.4, 0.1).unwrap().with_tau(0.01);
        let pts = vec![[0.5, 0.45, 0.0], [0.5, 0.55, 0.0]];
        let g = build_graph(&r, &pts, &spec).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        let rho0 = spec.kernel.eval(0.0);
        let eta: f64 = 0.4 * 0.45;
        let e = discrete_energy(&g, &[0.0, 1.0], 2.0).unwrap();
        let expect = 0.25 * rho0 * 2.0 / eta.powi(4);
        assert!((e - expect).abs() < 1e-9 * expect);
        let mut buf = Vec::new();
        g.export(&mut buf).unwrap();
        let back = Graph::import(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, g);
    }
}

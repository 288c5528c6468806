//! Quadrature rules: unit-ball rules for inner integrals, puncture-aware outer
//! rules over grids, and star-shaped singular rules.

use crate::geometry::{Component, QuadratureGrid, Region};
use crate::numerics::{self, Point, ORIGIN};
use std::collections::BTreeSet;

/// Direction rule on S^{d-1}; weights sum to σ(S^{d-1}).
pub fn sphere_rule(d: usize, n: usize) -> Vec<(Point, f64)> {
    let pi = std::f64::consts::PI;
    match d {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => (0..n)
            .map(|j| {
                let t = 2.0 * pi * (j as f64 + 0.5) / n as f64;
                ([t.cos(), t.sin(), 0.0], 2.0 * pi / n as f64)
            })
            .collect(),
        _ => {
            let nc = n.div_ceil(2).max(2);
            let (c, wc) = numerics::gauss_legendre(nc);
            let mut out = Vec::with_capacity(nc * n);
            for (ci, wi) in c.iter().zip(&wc) {
                let s = (1.0 - ci * ci).max(0.0).sqrt();
                for j in 0..n {
                    let ph = 2.0 * pi * (j as f64 + 0.5) / n as f64;
                    out.push(([s * ph.cos(), s * ph.sin(), *ci], wi * 2.0 * pi / n as f64));
                }
            }
            out
        }
    }
}

/// Product rule on the unit ball: Σ w f(z) ≈ ∫_{B(0,1)} f(z) dz.
#[derive(Clone, Debug)]
pub struct BallRule {
    pub d: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub radii: Vec<f64>,
}

impl BallRule {
    pub fn new(d: usize, n_rad: usize, n_ang: usize) -> Self {
        let (r, wr) = numerics::gauss_legendre_on(n_rad, 0.0, 1.0);
        let dirs = sphere_rule(d, n_ang);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut radii = Vec::new();
        for (ri, wi) in r.iter().zip(&wr) {
            for (om, wo) in &dirs {
                points.push(numerics::scale(om, *ri));
                weights.push(wi * ri.powi(d as i32 - 1) * wo);
                radii.push(*ri);
            }
        }
        BallRule { d, points, weights, radii }
    }

    /// Default rule per dimension.
    pub fn standard(d: usize) -> Self {
        match d {
            1 => BallRule::new(1, 16, 2),
            2 => BallRule::new(2, 8, 32),
            _ => BallRule::new(3, 6, 16),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// ∫_{B(c,ρ)} f(y, |y−a|) |y−a|^{-b} dy for an apex a inside the ball, with the
/// radial substitution s = t^{d−b} absorbing the singular factor. Returns ∞ when b ≥ d.
pub fn ball_star_integral<F>(d: usize, apex: &Point, center: &Point, radius: f64, b: f64, n_rad: usize, n_ang: usize, f: F) -> f64
where
    F: Fn(&Point, f64) -> f64,
{
    if b >= d as f64 {
        return f64::INFINITY;
    }
    let e = d as f64 - b;
    let (s, ws) = numerics::gauss_legendre_on(n_rad, 0.0, 1.0);
    let a = numerics::sub(apex, center);
    let aa = numerics::dot(&a, &a);
    let mut total = 0.0;
    for (om, wo) in sphere_rule(d, n_ang) {
        let ao = numerics::dot(&a, &om);
        let len = -ao + (ao * ao - aa + radius * radius).max(0.0).sqrt();
        if len <= 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (si, wi) in s.iter().zip(&ws) {
            let t = si.powf(1.0 / e);
            let rr = t * len;
            let y = numerics::axpy(apex, rr, &om);
            inner += wi * f(&y, rr);
        }
        total += wo * len.powf(e) * inner / e;
    }
    total
}

/// Outer quadrature Σ_a W_a f(x_a) ≈ ∫_Ω f(x) w(x) dx for a weight behaving like
/// dist(x,Γ)^{-b} near labeled points.
#[derive(Clone, Debug)]
pub struct OuterRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Grid node index when the point is a node.
    pub node: Vec<Option<usize>>,
    /// Points of cells touching Γ where the weight is not integrable.
    pub divergent: Vec<bool>,
}

impl OuterRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(&Point) -> f64 + Sync>(&self, f: F) -> f64 {
        numerics::det_sum(self.len(), |a| {
            let w = self.weights[a];
            if w == 0.0 {
                0.0
            } else {
                w * f(&self.points[a])
            }
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OuterOptions {
    pub facet_points: usize,
    pub radial_points: usize,
    pub gauss_points: usize,
}

impl Default for OuterOptions {
    fn default() -> Self {
        OuterOptions { facet_points: 12, radial_points: 12, gauss_points: 6 }
    }
}

fn tensor_gauss(d: usize, a: &Point, bnd: &Point, n: usize) -> Vec<(Point, f64)> {
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d).map(|i| numerics::gauss_legendre_on(n, a[i], bnd[i])).collect();
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for m in 0..total {
        let mut r = m;
        let mut x = ORIGIN;
        let mut w = 1.0;
        for (i, (xs, ws)) in rules.iter().enumerate() {
            let k = r % n;
            r /= n;
            x[i] = xs[k];
            w *= ws[k];
        }
        out.push((x, w));
    }
    out
}

/// Cone decomposition of the cell [a, b] from an apex x₀ in its closure.
/// Returns points and weights for ∫_cell g(y)|y−x₀|^{-β} dy as Σ w g(y).
pub fn apex_cell_rule(d: usize, a: &Point, bnd: &Point, x0: &Point, beta: f64, nf: usize, ns: usize) -> Vec<(Point, f64)> {
    let e = d as f64 - beta;
    let (s, ws) = numerics::gauss_legendre_on(ns, 0.0, 1.0);
    let mut out = Vec::new();
    for i in 0..d {
        for side in 0..2 {
            let plane = if side == 0 { a[i] } else { bnd[i] };
            let h = (x0[i] - plane).abs();
            if h < 1e-14 {
                continue;
            }
            let mut fa = *a;
            let mut fb = *bnd;
            fa[i] = plane;
            fb[i] = plane;
            // Facet rule over the remaining axes.
            let others: Vec<usize> = (0..d).filter(|&j| j != i).collect();
            let rules: Vec<(Vec<f64>, Vec<f64>)> = others.iter().map(|&j| numerics::gauss_legendre_on(nf, fa[j], fb[j])).collect();
            let total = nf.pow(others.len() as u32);
            for m in 0..total {
                let mut r = m;
                let mut f = fa;
                let mut wf = 1.0;
                for (oi, (xs, wsf)) in rules.iter().enumerate() {
                    let k = r % nf;
                    r /= nf;
                    f[others[oi]] = xs[k];
                    wf *= wsf[k];
                }
                let v = numerics::sub(&f, x0);
                let lv = numerics::norm(&v);
                for (si, wi) in s.iter().zip(&ws) {
                    let t = si.powf(1.0 / e);
                    let y = numerics::axpy(x0, t, &v);
                    out.push((y, h * wf * lv.powf(-beta) * wi / e));
                }
            }
        }
    }
    out
}

/// Lattice cells that receive refined quadrature: the 3^d block around each
/// labeled point and the cells within one cell of each labeled box.
pub fn refined_cells(grid: &QuadratureGrid, region: &Region) -> BTreeSet<usize> {
    let d = grid.d;
    let mut set = BTreeSet::new();
    for c in &region.gamma.components {
        match &c.geom {
            Component::Point(p) => {
                let k0 = grid.cell_of(p);
                let span = 3usize.pow(d as u32);
                for m in 0..span {
                    let mut k = [0usize; 3];
                    let mut r = m;
                    let mut ok = true;
                    for i in 0..d {
                        let off = (r % 3) as i64 - 1;
                        r /= 3;
                        let v = k0[i] as i64 + off;
                        if v < 0 || v >= grid.dims[i] as i64 {
                            ok = false;
                        }
                        k[i] = v.max(0) as usize;
                    }
                    if ok {
                        set.insert(grid.lattice_index(k));
                    }
                }
            }
            Component::Box { lo, hi } => {
                for li in 0..grid.lattice_len() {
                    let (a, b) = grid.cell_bounds(grid.lattice_coords(li));
                    if (0..d).all(|i| hi[i] >= a[i] - grid.spacing[i] && lo[i] <= b[i] + grid.spacing[i]) {
                        set.insert(li);
                    }
                }
            }
        }
    }
    set.retain(|li| grid.lattice_valid[*li]);
    set
}

/// Build the outer rule for weight `w` (full pointwise weight) with singular
/// exponent `b` at labeled components.
pub fn outer_rule<W>(grid: &QuadratureGrid, region: &Region, w: W, b: f64, opts: OuterOptions) -> OuterRule
where
    W: Fn(&Point) -> f64,
{
    let d = grid.d;
    let refined = if region.gamma.is_empty() { BTreeSet::new() } else { refined_cells(grid, region) };
    let mut points = Vec::with_capacity(grid.len() + refined.len() * 64);
    let mut weights = Vec::with_capacity(points.capacity());
    let mut node = Vec::with_capacity(points.capacity());
    let mut divergent = Vec::with_capacity(points.capacity());
    let cell = grid.cell_volume();
    for (i, x) in grid.nodes.iter().enumerate() {
        let li = grid.node_lattice[i];
        if refined.contains(&li) {
            continue;
        }
        points.push(*x);
        weights.push(grid.measures[i] * w(x));
        node.push(Some(i));
        divergent.push(false);
    }
    for &li in &refined {
        let k = grid.lattice_coords(li);
        let (a, bnd) = grid.cell_bounds(k);
        let ni = grid.lattice_node[li];
        let frac = grid.measures[ni] / cell;
        // Labeled component touching the closed cell, if any.
        let mut touching: Option<(Point, usize)> = None;
        for c in &region.gamma.components {
            match &c.geom {
                Component::Point(p) => {
                    if (0..d).all(|j| p[j] >= a[j] - 1e-14 && p[j] <= bnd[j] + 1e-14) {
                        touching = Some((*p, 0));
                    }
                }
                Component::Box { lo, hi } => {
                    if (0..d).all(|j| hi[j] >= a[j] && lo[j] <= bnd[j]) {
                        touching = Some((ORIGIN, c.ell(d)));
                    }
                }
            }
        }
        match touching {
            Some((x0, 0)) if b > 0.0 && b < d as f64 => {
                for (y, wt) in apex_cell_rule(d, &a, &bnd, &x0, b, opts.facet_points, opts.radial_points) {
                    let r = numerics::dist(&y, &x0);
                    let smooth = if r > 0.0 { w(&y) * r.powf(b) } else { 0.0 };
                    points.push(y);
                    weights.push(frac * wt * smooth);
                    node.push(None);
                    divergent.push(false);
                }
            }
            Some((_, ell)) => {
                let div = b >= (d - ell) as f64;
                let n = if ell == 0 { opts.gauss_points } else { 2 * opts.gauss_points };
                for (y, wt) in tensor_gauss(d, &a, &bnd, n) {
                    points.push(y);
                    weights.push(frac * wt * w(&y));
                    node.push(None);
                    divergent.push(div);
                }
            }
            None => {
                for (y, wt) in tensor_gauss(d, &a, &bnd, opts.gauss_points) {
                    points.push(y);
                    weights.push(frac * wt * w(&y));
                    node.push(None);
                    divergent.push(false);
                }
            }
        }
    }
    OuterRule { points, weights, node, divergent }
}

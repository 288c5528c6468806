//! Balanced transport from grid cells to samples, truncation schedules and
//! pushforward energies.

use crate::energies::{pair_sum_energy, truncated_horizon, SpatialHash};
use crate::error::{Error, Result};
use crate::funcspace::{EnergySpec, Setup};
use crate::geometry::QuadratureGrid;
use crate::numerics::{self, Point};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// Sample index assigned to each grid node.
    pub assignment: Vec<usize>,
    pub samples: Vec<Point>,
    /// 2·max |node − assigned sample|.
    pub zeta: f64,
    pub n: usize,
    pub capacities: Vec<usize>,
}

impl TransportPlan {
    /// Every node is its own sample.
    pub fn identity(grid: &QuadratureGrid) -> Self {
        TransportPlan {
            assignment: (0..grid.len()).collect(),
            samples: grid.nodes.clone(),
            zeta: 0.0,
            n: grid.len(),
            capacities: vec![1; grid.len()],
        }
    }

    pub fn image(&self, node: usize) -> &Point {
        &self.samples[self.assignment[node]]
    }

    pub fn max_displacement(&self, grid: &QuadratureGrid) -> f64 {
        grid.nodes.iter().enumerate().map(|(i, x)| numerics::dist(x, self.image(i))).fold(0.0, f64::max)
    }

    /// Cells per sample.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        for &j in &self.assignment {
            c[j] += 1;
        }
        c
    }
}

/// Capacities ⌊M/N⌋ or ⌈M/N⌉, the larger ones on the first M mod N samples.
pub fn capacities(m: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || m < n {
        return Err(Error::Config(format!("cannot split {m} cells among {n} samples")));
    }
    let base = m / n;
    let extra = m % n;
    Ok((0..n).map(|j| base + usize::from(j < extra)).collect())
}

/// Min-heap of slot prices for one sample with holder ids.
#[derive(Clone, Debug)]
struct SlotHeap {
    price: Vec<f64>,
    holder: Vec<usize>,
}

const NOBODY: usize = usize::MAX;

impl SlotHeap {
    fn new(cap: usize) -> Self {
        SlotHeap { price: vec![0.0; cap], holder: vec![NOBODY; cap] }
    }

    fn min(&self) -> f64 {
        self.price[0]
    }

    fn second_min(&self) -> f64 {
        match self.price.len() {
            0 | 1 => f64::INFINITY,
            2 => self.price[1],
            _ => self.price[1].min(self.price[2]),
        }
    }

    /// Replace the cheapest slot; returns its previous holder.
    fn replace_min(&mut self, price: f64, holder: usize) -> usize {
        let old = self.holder[0];
        self.price[0] = price;
        self.holder[0] = holder;
        let n = self.price.len();
        let mut i = 0;
        loop {
            let l = 2 * i + 1;
            let r = l + 1;
            let mut s = i;
            if l < n && self.price[l] < self.price[s] {
                s = l;
            }
            if r < n && self.price[r] < self.price[s] {
                s = r;
            }
            if s == i {
                break;
            }
            self.price.swap(i, s);
            self.holder.swap(i, s);
            i = s;
        }
        old
    }

    fn clear_holders(&mut self) {
        self.holder.iter_mut().for_each(|h| *h = NOBODY);
    }
}

/// Auction options: candidate list length, ε-scaling factor and final ε relative to the cost scale.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AuctionOptions {
    pub candidates: usize,
    pub eps_factor: f64,
    pub final_eps: f64,
    /// Per-cell slack for problems above 10⁶ pairs.
    pub large_eps: f64,
}

impl Default for AuctionOptions {
    fn default() -> Self {
        AuctionOptions { candidates: 24, eps_factor: 6.0, final_eps: 1e-9, large_eps: 1e-7 }
    }
}

/// ε-optimal min-cost assignment of persons to capacitated objects with sparse
/// candidate lists, extended until ε-complementary slackness holds against
/// every object. Costs are squared distances between `persons` and `objects`.
pub fn auction_assign(persons: &[Point], objects: &[Point], caps: &[usize], d: usize, opts: AuctionOptions) -> Result<Vec<usize>> {
    let m = persons.len();
    let n = objects.len();
    if caps.len() != n || caps.iter().sum::<usize>() != m {
        return Err(Error::Config("capacities must sum to the number of cells".into()));
    }
    if n == 0 {
        return Err(Error::Config("no samples".into()));
    }
    let cost = |i: usize, j: usize| {
        let a = &persons[i];
        let b = &objects[j];
        let mut s = 0.0;
        for k in 0..d {
            s += (a[k] - b[k]) * (a[k] - b[k]);
        }
        s
    };
    let scale = {
        let (lo, hi) = bbox(persons.iter().chain(objects.iter()), d);
        (0..d).map(|k| (hi[k] - lo[k]).powi(2)).sum::<f64>().max(1e-300)
    };
    // Candidate lists: k nearest objects (all of them when small).
    let k = opts.candidates.min(n);
    let mut cand: Vec<Vec<usize>> = if n <= 64 || m * n <= 200_000 {
        vec![(0..n).collect(); m]
    } else {
        let mut c = nearest_lists(persons, objects, d, k);
        // A feasible assignment inside the lists keeps prices bounded.
        for (i, j) in chunk_assignment(persons, objects, caps, d).into_iter().enumerate() {
            if !c[i].contains(&j) {
                c[i].push(j);
            }
        }
        c
    };
    let mut heaps: Vec<SlotHeap> = caps.iter().map(|&c| SlotHeap::new(c)).collect();
    let mut owner = vec![NOBODY; m];
    // Exact regime: total slack M·ε below final_eps·scale.
    let final_eps = if m * n <= 1_000_000 { opts.final_eps * scale / (m as f64).max(1.0) } else { opts.large_eps * scale };
    let mut eps = 0.05 * scale;
    let bid_all = |queue: &mut Vec<usize>, owner: &mut [usize], heaps: &mut [SlotHeap], cand: &[Vec<usize>], eps: f64| {
        while let Some(i) = queue.pop() {
            let mut best = NOBODY;
            let mut v1 = f64::NEG_INFINITY;
            let mut v2 = f64::NEG_INFINITY;
            for &j in &cand[i] {
                let v = -cost(i, j) - heaps[j].min();
                if v > v1 {
                    v2 = v1;
                    v1 = v;
                    best = j;
                } else if v > v2 {
                    v2 = v;
                }
            }
            let same = -cost(i, best) - heaps[best].second_min();
            v2 = v2.max(same);
            if !v2.is_finite() {
                v2 = v1 - scale;
            }
            let bid = heaps[best].min() + (v1 - v2) + eps;
            let prev = heaps[best].replace_min(bid, i);
            owner[i] = best;
            if prev != NOBODY {
                owner[prev] = NOBODY;
                queue.push(prev);
            }
        }
    };
    loop {
        owner.iter_mut().for_each(|o| *o = NOBODY);
        heaps.iter_mut().for_each(SlotHeap::clear_holders);
        let mut queue: Vec<usize> = (0..m).rev().collect();
        bid_all(&mut queue, &mut owner, &mut heaps, &cand, eps);
        if eps <= final_eps {
            break;
        }
        eps = (eps / opts.eps_factor).max(final_eps);
    }
    // Global ε-CS check at the final ε; violators get wider lists and re-bid.
    loop {
        let minp: Vec<f64> = heaps.iter().map(SlotHeap::min).collect();
        let mut queue = Vec::new();
        for i in 0..m {
            let j = owner[i];
            let slot = heaps[j].holder.iter().position(|&h| h == i).expect("assigned person holds a slot");
            let mine = -cost(i, j) - heaps[j].price[slot];
            let before = cand[i].len();
            for l in 0..n {
                if -cost(i, l) - minp[l] > mine + eps && !cand[i][..before].contains(&l) {
                    cand[i].push(l);
                }
            }
            if cand[i].len() > before {
                heaps[j].holder[slot] = NOBODY;
                owner[i] = NOBODY;
                queue.push(i);
            }
        }
        if queue.is_empty() {
            break;
        }
        queue.reverse();
        bid_all(&mut queue, &mut owner, &mut heaps, &cand, eps);
    }
    Ok(owner)
}

fn bbox<'a, I: Iterator<Item = &'a Point>>(pts: I, d: usize) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Feasible assignment: cells and samples both in serpentine strip order,
/// consecutive cells filling consecutive samples up to capacity.
fn chunk_assignment(persons: &[Point], objects: &[Point], caps: &[usize], d: usize) -> Vec<usize> {
    let n = objects.len();
    let strips = ((n as f64).powf(1.0 / d as f64).round() as usize).max(1);
    let (lo, hi) = bbox(persons.iter().chain(objects.iter()), d);
    let key = |x: &Point| {
        let w = (hi[0] - lo[0]).max(1e-300);
        let s = (((x[0] - lo[0]) / w * strips as f64) as usize).min(strips - 1);
        let y = if d > 1 { x[1] } else { 0.0 };
        (s, if s.is_multiple_of(2) { y } else { -y })
    };
    let order = |pts: &[Point]| {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ka, kb) = (key(&pts[a]), key(&pts[b]));
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(a.cmp(&b))
        });
        idx
    };
    let cells = order(persons);
    let objs = order(objects);
    let mut out = vec![0; persons.len()];
    let mut pos = 0;
    for &j in &objs {
        for _ in 0..caps[j] {
            out[cells[pos]] = j;
            pos += 1;
        }
    }
    out
}

fn nearest_lists(persons: &[Point], objects: &[Point], d: usize, k: usize) -> Vec<Vec<usize>> {
    let (lo, hi) = bbox(objects.iter(), d);
    let vol: f64 = (0..d).map(|i| (hi[i] - lo[i]).max(1e-12)).product();
    let cell = (vol * k as f64 / objects.len() as f64).powf(1.0 / d as f64);
    let hash = SpatialHash::new(d, objects, cell);
    numerics::det_map(persons.len(), |i| {
        let x = &persons[i];
        let mut r = cell;
        loop {
            let mut found: Vec<(f64, usize)> = Vec::new();
            hash.for_candidates(x, r, |j| {
                let dd = numerics::dist(x, &objects[j]);
                if dd < r {
                    found.push((dd, j));
                }
            });
            if found.len() >= k || found.len() == objects.len() {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                return found.into_iter().take(k).map(|f| f.1).collect();
            }
            r *= 1.5;
        }
    })
}

/// Min-cost balanced assignment of the grid cells to the samples.
pub fn transport_map(grid: &QuadratureGrid, samples: &[Point]) -> Result<TransportPlan> {
    let m = grid.len();
    let n = samples.len();
    if n == 0 {
        return Err(Error::Config("no samples".into()));
    }
    if m < 4 * n {
        return Err(Error::Config(format!("transport grid has {m} cells for {n} samples; need at least 4 per sample")));
    }
    let caps = capacities(m, n)?;
    let assignment = auction_assign(&grid.nodes, samples, &caps, grid.d, AuctionOptions::default())?;
    let mut plan = TransportPlan { assignment, samples: samples.to_vec(), zeta: 0.0, n, capacities: caps };
    plan.zeta = 2.0 * plan.max_displacement(grid);
    Ok(plan)
}

/// Transport grid resolution for n samples in dimension d: at least 16 cells per
/// sample, preferring res^d divisible by n (up to twice the minimal resolution).
pub fn transport_resolution(n: usize, d: usize) -> usize {
    let lo = ((16 * n) as f64).powf(1.0 / d as f64).ceil() as usize;
    (lo..=2 * lo).find(|r| r.pow(d as u32) % n.max(1) == 0).unwrap_or(lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TauRule {
    /// τ = √ζ.
    Sqrt,
    /// τ = ζ^a, 0 < a < 1.
    Power(f64),
    Fixed(f64),
}

pub fn tau_schedule(zeta: f64, rule: TauRule) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(Error::Parameter("ζ must be positive".into()));
    }
    Ok(match rule {
        TauRule::Sqrt => zeta.sqrt(),
        TauRule::Power(a) => {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Parameter("power rule needs 0 < a < 1".into()));
            }
            zeta.powf(a)
        }
        TauRule::Fixed(t) => t,
    })
}

/// (1/|Ω|²) Σ_ij m_i m_j ρ(|T x_i − T x_j|/η^τ(T x_i)) |u_i − u_j|^p / (γ^τ(T x_i)^β η^τ(T x_i)^{d+p}).
pub fn pushforward_energy(setup: &Setup, values: &[f64], plan: &TransportPlan, spec: &EnergySpec) -> Result<f64> {
    let g = &setup.grid;
    if plan.assignment.len() != g.len() {
        return Err(Error::Parameter("plan does not match the grid".into()));
    }
    let pos: Vec<Point> = (0..g.len()).map(|i| *plan.image(i)).collect();
    let vol = setup.region.domain.volume();
    Ok(pair_sum_energy(&setup.region, spec, &pos, values, &g.measures)? / (vol * vol))
}

/// c = ζ/τ, q = 1/(1+κ₁c/2) − c/δ, Q = (1+κ₁c/2)(1+c/δ).
pub fn sandwich_factors(zeta: f64, tau: f64, delta: f64, kappa1: f64) -> (f64, f64, f64) {
    let c = zeta / tau;
    let a = 1.0 + kappa1 * c / 2.0;
    (c, 1.0 / a - c / delta, a * (1.0 + c / delta))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub c: f64,
    pub q: f64,
    pub big_q: f64,
    pub kappa1: f64,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Lipschitz constant used in the comparison lemmas: max of κ₁ and Lip(γ).
pub fn comparison_kappa(spec: &EnergySpec) -> f64 {
    spec.lambda.kappa1.max(spec.weight.lipschitz_constant())
}

fn spec_at(spec: &EnergySpec, delta: f64) -> EnergySpec {
    let mut s = spec.clone();
    s.delta = delta;
    s
}

pub fn sandwich_check(setup: &Setup, values: &[f64], plan: &TransportPlan, spec: &EnergySpec) -> Result<SandwichReport> {
    if spec.beta() < 0.0 {
        return Err(Error::Admissibility("sandwich bounds are stated for β ≥ 0".into()));
    }
    let d = setup.d() as f64;
    let p = spec.p;
    let beta = spec.beta();
    let k1 = comparison_kappa(spec);
    let (c, q, big_q) = sandwich_factors(plan.zeta, spec.tau, spec.delta, k1);
    if !(q > 0.0) {
        return Err(Error::Admissibility(format!("q = {q:.4} ≤ 0 (c = {c:.4}, δ = {}); n too small", spec.delta)));
    }
    let a = 1.0 + k1 * c / 2.0;
    let vol = setup.region.domain.volume();
    let value = pushforward_energy(setup, values, plan, spec)?;
    let e_low = pair_sum_energy(&setup.region, &spec_at(spec, q * spec.delta), &setup.grid.nodes, values, &setup.grid.measures)?;
    let e_up = pair_sum_energy(&setup.region, &spec_at(spec, big_q * spec.delta), &setup.grid.nodes, values, &setup.grid.measures)?;
    let lower = q.powf(d + p) / (vol * vol * a.powf(d + p + beta)) * e_low;
    let upper = big_q.powf(d + p) * a.powf(d + p + beta) / (vol * vol) * e_up;
    let tol = 1e-12 * upper.abs().max(1e-300);
    Ok(SandwichReport { c, q, big_q, kappa1: k1, lower, value, upper, holds: lower <= value + tol && value <= upper + tol })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_horizon_ratio: f64,
    pub max_weight_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Pointwise η^τ and γ^τ comparisons between x and T(x) on every node.
pub fn comparison_lemma_check(setup: &Setup, plan: &TransportPlan, spec: &EnergySpec) -> Result<ComparisonReport> {
    let region = &setup.region;
    let k1 = comparison_kappa(spec);
    let c = plan.zeta / spec.tau;
    let bound = 1.0 + k1 * c / 2.0;
    let mut hr: f64 = 0.0;
    let mut wr: f64 = 0.0;
    for (i, x) in setup.grid.nodes.iter().enumerate() {
        let t = plan.image(i);
        let (h1, h2) = (truncated_horizon(region, spec, x), truncated_horizon(region, spec, t));
        hr = hr.max(h1 / h2).max(h2 / h1);
        let (g1, g2) = (spec.weight.gamma(region, x).max(spec.tau), spec.weight.gamma(region, t).max(spec.tau));
        wr = wr.max(g1 / g2).max(g2 / g1);
    }
    Ok(ComparisonReport { max_horizon_ratio: hr, max_weight_ratio: wr, bound, holds: hr <= bound * (1.0 + 1e-12) && wr <= bound * (1.0 + 1e-12) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, sample_uniform, Domain, LabeledSet};

    #[test]
    fn tau_examples() {
        assert!((tau_schedule(0.01, TauRule::Sqrt).unwrap() - 0.1).abs() < 1e-15);
        assert!((tau_schedule(1e-4, TauRule::Sqrt).unwrap() - 0.01).abs() < 1e-15);
        let (c, q, _) = sandwich_factors(0.03, 0.3, 0.3, 1.0);
        assert!((c - 0.1).abs() < 1e-15);
        assert!((q - (1.0 / 1.05 - 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_sample_takes_everything() {
        let dom = Domain::unit_box(2);
        let grid = build_grid(&dom, &LabeledSet::empty(2), 8).unwrap();
        let plan = transport_map(&grid, &[[0.5, 0.5, 0.0]]).unwrap();
        assert!(plan.assignment.iter().all(|&j| j == 0));
        let far = 2.0 * numerics::dist(&grid.nodes[0], &[0.5, 0.5, 0.0]);
        assert!((plan.zeta - far).abs() < 1e-12);
    }

    #[test]
    fn measure_preservation() {
        let dom = Domain::unit_box(2);
        let n = 50;
        let grid = build_grid(&dom, &LabeledSet::empty(2), transport_resolution(n, 2)).unwrap();
        let s = sample_uniform(&dom, n, 1).unwrap();
        let plan = transport_map(&grid, &s).unwrap();
        assert_eq!(plan.counts(), plan.capacities);
    }
}

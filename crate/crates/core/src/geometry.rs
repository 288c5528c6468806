//! Domains, labeled sets, distance functions, quadrature grids and sampling.

use crate::error::{Error, Result};
use crate::numerics::{self, Point, ORIGIN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Box { lo: Point, hi: Point },
    Disc { center: Point, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub d: usize,
    pub kind: DomainKind,
}

impl Domain {
    pub fn new_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let d = lo.len();
        if !(1..=3).contains(&d) || hi.len() != d {
            return Err(Error::Config(format!("box dimension {d} unsupported")));
        }
        if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
            return Err(Error::Config("box has empty interior".into()));
        }
        Ok(Domain { d, kind: DomainKind::Box { lo: numerics::point(lo), hi: numerics::point(hi) } })
    }

    pub fn unit_box(d: usize) -> Self {
        Self::new_box(&vec![0.0; d], &vec![1.0; d]).expect("unit box")
    }

    pub fn new_disc(center: &[f64], radius: f64) -> Result<Self> {
        let d = center.len();
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("disc dimension {d} unsupported")));
        }
        if !(radius > 0.0) {
            return Err(Error::Config("disc radius must be positive".into()));
        }
        Ok(Domain { d, kind: DomainKind::Disc { center: numerics::point(center), radius } })
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match &self.kind {
            DomainKind::Box { lo, hi } => (*lo, *hi),
            DomainKind::Disc { center, radius } => {
                let mut lo = ORIGIN;
                let mut hi = ORIGIN;
                for i in 0..self.d {
                    lo[i] = center[i] - radius;
                    hi[i] = center[i] + radius;
                }
                (lo, hi)
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match &self.kind {
            DomainKind::Box { lo, hi } => (0..self.d).map(|i| hi[i] - lo[i]).product(),
            DomainKind::Disc { radius, .. } => numerics::ball_volume(self.d) * radius.powi(self.d as i32),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::Box { lo, hi } => numerics::dist(lo, hi),
            DomainKind::Disc { radius, .. } => 2.0 * radius,
        }
    }

    /// Closure membership with a small absolute tolerance.
    pub fn contains(&self, x: &Point) -> bool {
        match &self.kind {
            DomainKind::Box { lo, hi } => (0..self.d).all(|i| x[i] >= lo[i] - TOL && x[i] <= hi[i] + TOL),
            DomainKind::Disc { center, radius } => numerics::dist(x, center) <= radius + TOL,
        }
    }

    /// Distance to the outer boundary, without the membership check.
    pub fn boundary_distance(&self, x: &Point) -> f64 {
        match &self.kind {
            DomainKind::Box { lo, hi } => {
                let mut m = f64::INFINITY;
                for i in 0..self.d {
                    m = m.min(x[i] - lo[i]).min(hi[i] - x[i]);
                }
                m.max(0.0)
            }
            DomainKind::Disc { center, radius } => (radius - numerics::dist(x, center)).max(0.0),
        }
    }

    pub fn dist_to_boundary(&self, x: &Point) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Domain(format!("point {:?} outside the domain closure", &x[..self.d])));
        }
        Ok(self.boundary_distance(x))
    }

    /// Gradient of the boundary distance; at ties the candidate gradients are averaged.
    pub fn boundary_distance_gradient(&self, x: &Point) -> Point {
        match &self.kind {
            DomainKind::Box { lo, hi } => {
                let m = self.boundary_distance(x);
                let mut g = ORIGIN;
                let mut k = 0.0;
                for i in 0..self.d {
                    if (x[i] - lo[i] - m).abs() <= TOL {
                        g[i] += 1.0;
                        k += 1.0;
                    }
                    if (hi[i] - x[i] - m).abs() <= TOL {
                        g[i] -= 1.0;
                        k += 1.0;
                    }
                }
                if k > 0.0 {
                    numerics::scale(&g, 1.0 / k)
                } else {
                    g
                }
            }
            DomainKind::Disc { center, .. } => {
                let v = numerics::sub(center, x);
                let n = numerics::norm(&v);
                if n > 0.0 {
                    numerics::scale(&v, 1.0 / n)
                } else {
                    ORIGIN
                }
            }
        }
    }

    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        loop {
            let mut x = ORIGIN;
            for i in 0..self.d {
                x[i] = lo[i] + (hi[i] - lo[i]) * rng.gen::<f64>();
            }
            if matches!(self.kind, DomainKind::Box { .. }) || self.contains(&x) {
                return x;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Point(Point),
    /// Axis-aligned box; axes with `lo == hi` are collapsed.
    Box {
        lo: Point,
        hi: Point,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub geom: Component,
    pub value: f64,
}

impl Label {
    pub fn point(x: &[f64], value: f64) -> Self {
        Label { geom: Component::Point(numerics::point(x)), value }
    }

    pub fn segment_box(lo: &[f64], hi: &[f64], value: f64) -> Self {
        Label { geom: Component::Box { lo: numerics::point(lo), hi: numerics::point(hi) }, value }
    }

    /// Intrinsic dimension ℓ.
    pub fn ell(&self, d: usize) -> usize {
        match &self.geom {
            Component::Point(_) => 0,
            Component::Box { lo, hi } => (0..d).filter(|&i| hi[i] > lo[i]).count(),
        }
    }

    /// Nearest point of the component and its distance.
    pub fn nearest(&self, x: &Point) -> (Point, f64) {
        match &self.geom {
            Component::Point(p) => (*p, numerics::dist(x, p)),
            Component::Box { lo, hi } => {
                let mut f = *x;
                for i in 0..3 {
                    f[i] = x[i].clamp(lo[i], hi[i]);
                }
                (f, numerics::dist(x, &f))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub d: usize,
    pub components: Vec<Label>,
    /// Separation radius R.
    pub separation: f64,
}

impl LabeledSet {
    pub fn new(d: usize, components: Vec<Label>, separation: f64) -> Result<Self> {
        if !(separation > 0.0) {
            return Err(Error::Config("separation radius must be positive".into()));
        }
        let s = LabeledSet { d, components, separation };
        for (i, c) in s.components.iter().enumerate() {
            if c.ell(d) >= d && d > 0 {
                return Err(Error::Config(format!("component {i} has intrinsic dimension ≥ d")));
            }
        }
        Ok(s)
    }

    pub fn empty(d: usize) -> Self {
        LabeledSet { d, components: Vec::new(), separation: 1.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn ell_max(&self) -> usize {
        self.components.iter().map(|c| c.ell(self.d)).max().unwrap_or(0)
    }

    /// Check closure membership and the separation invariant B(x₀,4R) ∩ Γ = {x₀}.
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            let inside = match &c.geom {
                Component::Point(p) => domain.contains(p),
                Component::Box { lo, hi } => domain.contains(lo) && domain.contains(hi),
            };
            if !inside {
                return Err(Error::Config(format!("labeled component {i} lies outside the domain closure")));
            }
        }
        let r4 = 4.0 * self.separation;
        for (i, c) in self.components.iter().enumerate() {
            if let Component::Point(p) = &c.geom {
                for (j, o) in self.components.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let (_, dd) = o.nearest(p);
                    let need = if matches!(o.geom, Component::Point(_)) { 2.0 * r4 } else { r4 };
                    if dd < need {
                        return Err(Error::Config(format!("components {i} and {j} violate the separation radius R={}", self.separation)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Index of nearest component, its foot point and distance.
    pub fn nearest(&self, x: &Point) -> Option<(usize, Point, f64)> {
        let mut best: Option<(usize, Point, f64)> = None;
        for (i, c) in self.components.iter().enumerate() {
            let (f, dd) = c.nearest(x);
            if best.as_ref().is_none_or(|b| dd < b.2) {
                best = Some((i, f, dd));
            }
        }
        best
    }

    pub fn distance(&self, x: &Point) -> f64 {
        self.nearest(x).map(|b| b.2).unwrap_or(f64::INFINITY)
    }

    pub fn dist_to_labeled(&self, x: &Point) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::Config("empty labeled set".into()));
        }
        Ok(self.distance(x))
    }
}

/// Ω* together with Γ; Ω = Ω* \ Γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub domain: Domain,
    pub gamma: LabeledSet,
}

impl Region {
    pub fn new(domain: Domain, gamma: LabeledSet) -> Result<Self> {
        if gamma.d != domain.d {
            return Err(Error::Config("labeled set dimension differs from domain".into()));
        }
        gamma.validate(&domain)?;
        Ok(Region { domain, gamma })
    }

    pub fn d(&self) -> usize {
        self.domain.d
    }

    /// η(x) = min(dist(x,∂Ω*), dist(x,Γ)).
    #[inline]
    pub fn eta(&self, x: &Point) -> f64 {
        self.domain.boundary_distance(x).min(self.gamma.distance(x))
    }

    /// Gradient of η with the ridge rule of the boundary distance.
    pub fn eta_gradient(&self, x: &Point) -> Point {
        let b = self.domain.boundary_distance(x);
        match self.gamma.nearest(x) {
            Some((_, f, dg)) if dg < b - TOL => {
                let v = numerics::sub(x, &f);
                if dg > 0.0 {
                    numerics::scale(&v, 1.0 / dg)
                } else {
                    ORIGIN
                }
            }
            Some((_, f, dg)) if (dg - b).abs() <= TOL && dg > 0.0 => {
                let g1 = numerics::scale(&numerics::sub(x, &f), 1.0 / dg);
                let g2 = self.domain.boundary_distance_gradient(x);
                numerics::scale(&numerics::add(&g1, &g2), 0.5)
            }
            _ => self.domain.boundary_distance_gradient(x),
        }
    }
}

/// η_δ(x) = δ·min(dist to ∂Ω*, dist to Γ).
pub fn horizon(region: &Region, delta: f64, x: &Point) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("horizon parameter δ={delta} outside (0,1)")));
    }
    region.domain.dist_to_boundary(x)?;
    Ok(delta * region.eta(x))
}

/// δ̲₀ = 1/(3κ₀²κ₁).
pub fn max_admissible_delta(kappa0: f64, kappa1: f64) -> Result<f64> {
    if !(kappa0 >= 1.0) || !(kappa1 > 0.0) {
        return Err(Error::Parameter(format!("need κ₀ ≥ 1 and κ₁ > 0, got {kappa0}, {kappa1}")));
    }
    Ok(1.0 / (3.0 * kappa0 * kappa0 * kappa1))
}

/// Uniform tensor grid of cell centers.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub d: usize,
    /// Lattice extent per axis (1 on unused axes).
    pub dims: [usize; 3],
    pub lo: Point,
    /// Spacing per axis (1 on unused axes).
    pub spacing: Point,
    pub nodes: Vec<Point>,
    pub measures: Vec<f64>,
    /// Cells containing a point of Γ (half-open cells) or meeting a box component.
    pub punctured: Vec<bool>,
    /// Lattice index of each node.
    pub node_lattice: Vec<usize>,
    /// Node index for each lattice cell; cells outside Ω map to the nearest node.
    pub lattice_node: Vec<usize>,
    /// Whether the lattice cell is a node (not a ghost).
    pub lattice_valid: Vec<bool>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest cell side.
    pub fn h(&self) -> f64 {
        (0..self.d).map(|i| self.spacing[i]).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|i| self.spacing[i]).product()
    }

    pub fn lattice_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn lattice_index(&self, k: [usize; 3]) -> usize {
        (k[2] * self.dims[1] + k[1]) * self.dims[0] + k[0]
    }

    #[inline]
    pub fn lattice_coords(&self, idx: usize) -> [usize; 3] {
        let k0 = idx % self.dims[0];
        let r = idx / self.dims[0];
        [k0, r % self.dims[1], r / self.dims[1]]
    }

    pub fn lattice_center(&self, k: [usize; 3]) -> Point {
        let mut x = ORIGIN;
        for i in 0..self.d {
            x[i] = self.lo[i] + (k[i] as f64 + 0.5) * self.spacing[i];
        }
        x
    }

    /// Cell bounds [lo, hi] of a lattice cell.
    pub fn cell_bounds(&self, k: [usize; 3]) -> (Point, Point) {
        let mut a = ORIGIN;
        let mut b = ORIGIN;
        for i in 0..self.d {
            a[i] = self.lo[i] + k[i] as f64 * self.spacing[i];
            b[i] = a[i] + self.spacing[i];
        }
        (a, b)
    }

    /// Half-open lattice cell containing x (clamped to the lattice).
    pub fn cell_of(&self, x: &Point) -> [usize; 3] {
        let mut k = [0usize; 3];
        for i in 0..self.d {
            let t = ((x[i] - self.lo[i]) / self.spacing[i]).floor();
            k[i] = (t.max(0.0) as usize).min(self.dims[i] - 1);
        }
        k
    }

    /// Multilinear interpolation stencil over lattice centers, extrapolating
    /// linearly beyond the outermost centers. Returns node indices and weights.
    #[inline]
    pub fn stencil(&self, y: &Point) -> ([usize; 8], [f64; 8], usize) {
        self.stencil_with(y, true)
    }

    /// As `stencil`, but with constant extension beyond the outermost centers
    /// (all weights nonnegative).
    #[inline]
    pub fn stencil_clamped(&self, y: &Point) -> ([usize; 8], [f64; 8], usize) {
        self.stencil_with(y, false)
    }

    /// Clamped stencil with the gradient of each weight.
    pub fn stencil_gradient_clamped(&self, y: &Point) -> ([usize; 8], [f64; 8], [Point; 8], usize) {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut dfrac = [0.0f64; 3];
        let mut two = [false; 3];
        for i in 0..self.d {
            let n = self.dims[i];
            if n >= 2 {
                let t = (y[i] - self.lo[i]) / self.spacing[i] - 0.5;
                let k = (t.floor().max(0.0) as usize).min(n - 2);
                let f = t - k as f64;
                base[i] = k;
                frac[i] = f.clamp(0.0, 1.0);
                dfrac[i] = if (0.0..=1.0).contains(&f) { 1.0 / self.spacing[i] } else { 0.0 };
                two[i] = true;
            }
        }
        let mut idx = [0usize; 8];
        let mut w = [0.0f64; 8];
        let mut dw = [ORIGIN; 8];
        let mut m = 0;
        for c in 0..(1usize << self.d) {
            let mut k = base;
            let mut ok = true;
            let mut fac = [1.0f64; 3];
            let mut dfac = [0.0f64; 3];
            for i in 0..self.d {
                let bit = (c >> i) & 1;
                if !two[i] {
                    if bit == 1 {
                        ok = false;
                        break;
                    }
                    continue;
                }
                k[i] += bit;
                if bit == 1 {
                    fac[i] = frac[i];
                    dfac[i] = dfrac[i];
                } else {
                    fac[i] = 1.0 - frac[i];
                    dfac[i] = -dfrac[i];
                }
            }
            if !ok {
                continue;
            }
            idx[m] = self.lattice_node[self.lattice_index(k)];
            w[m] = fac[..self.d].iter().product();
            for i in 0..self.d {
                let mut g = dfac[i];
                for j in 0..self.d {
                    if j != i {
                        g *= fac[j];
                    }
                }
                dw[m][i] = g;
            }
            m += 1;
        }
        (idx, w, dw, m)
    }

    #[inline]
    fn stencil_with(&self, y: &Point, extrapolate: bool) -> ([usize; 8], [f64; 8], usize) {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut two = [false; 3];
        for i in 0..self.d {
            let n = self.dims[i];
            if n >= 2 {
                let t = (y[i] - self.lo[i]) / self.spacing[i] - 0.5;
                let k = (t.floor().max(0.0) as usize).min(n - 2);
                base[i] = k;
                frac[i] = if extrapolate { t - k as f64 } else { (t - k as f64).clamp(0.0, 1.0) };
                two[i] = true;
            }
        }
        let mut idx = [0usize; 8];
        let mut w = [0.0f64; 8];
        let mut m = 0;
        let combos = 1usize << self.d;
        for c in 0..combos {
            let mut k = base;
            let mut wt = 1.0;
            let mut ok = true;
            for i in 0..self.d {
                let bit = (c >> i) & 1;
                if !two[i] {
                    if bit == 1 {
                        ok = false;
                        break;
                    }
                    continue;
                }
                k[i] += bit;
                wt *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
            }
            if !ok {
                continue;
            }
            idx[m] = self.lattice_node[self.lattice_index(k)];
            w[m] = wt;
            m += 1;
        }
        (idx, w, m)
    }

    #[inline]
    pub fn interpolate(&self, values: &[f64], y: &Point) -> f64 {
        let (idx, w, m) = self.stencil(y);
        let mut s = 0.0;
        for j in 0..m {
            s += w[j] * values[idx[j]];
        }
        s
    }
}

/// Uniform tensor grid of `resolution` cells per axis over the domain's bounding box.
pub fn build_grid(domain: &Domain, gamma: &LabeledSet, resolution: usize) -> Result<QuadratureGrid> {
    if resolution < 4 {
        return Err(Error::Parameter(format!("grid resolution {resolution} below 4")));
    }
    let d = domain.d;
    let (lo, hi) = domain.bounding_box();
    let mut dims = [1usize; 3];
    let mut spacing = [1.0f64; 3];
    for i in 0..d {
        dims[i] = resolution;
        spacing[i] = (hi[i] - lo[i]) / resolution as f64;
    }
    let mut g = QuadratureGrid {
        d,
        dims,
        lo,
        spacing,
        nodes: Vec::new(),
        measures: Vec::new(),
        punctured: Vec::new(),
        node_lattice: Vec::new(),
        lattice_node: Vec::new(),
        lattice_valid: Vec::new(),
    };
    let nl = g.lattice_len();
    let cell = g.cell_volume();
    let is_box = matches!(domain.kind, DomainKind::Box { .. });
    let mut frac = vec![1.0; nl];
    if !is_box {
        let s = 8usize;
        let per = s.pow(d as u32);
        for (idx, f) in frac.iter_mut().enumerate() {
            let k = g.lattice_coords(idx);
            let (a, _) = g.cell_bounds(k);
            let mut inside = 0usize;
            for m in 0..per {
                let mut x = ORIGIN;
                let mut r = m;
                for i in 0..d {
                    let t = r % s;
                    r /= s;
                    x[i] = a[i] + (t as f64 + 0.5) / s as f64 * spacing[i];
                }
                if domain.contains(&x) {
                    inside += 1;
                }
            }
            *f = inside as f64 / per as f64;
        }
    }
    g.lattice_valid = (0..nl).map(|idx| domain.contains(&g.lattice_center(g.lattice_coords(idx)))).collect();
    g.lattice_node = vec![usize::MAX; nl];
    for idx in 0..nl {
        if g.lattice_valid[idx] {
            g.lattice_node[idx] = g.nodes.len();
            g.node_lattice.push(idx);
            g.nodes.push(g.lattice_center(g.lattice_coords(idx)));
            g.measures.push(cell * frac[idx]);
        }
    }
    if g.nodes.is_empty() {
        return Err(Error::Config("grid has no interior nodes".into()));
    }
    if !is_box {
        // Ghost cells: map to the nearest node; their partial measure moves there too.
        for idx in 0..nl {
            if g.lattice_valid[idx] {
                continue;
            }
            let c = g.lattice_center(g.lattice_coords(idx));
            let mut best = (f64::INFINITY, 0usize);
            for (j, x) in g.nodes.iter().enumerate() {
                let dd = numerics::dist(&c, x);
                if dd < best.0 {
                    best = (dd, j);
                }
            }
            g.lattice_node[idx] = best.1;
            g.measures[best.1] += cell * frac[idx];
        }
        // Rescale partial cells so the measures sum to |Ω|.
        let full: f64 = g.measures.iter().filter(|m| (**m - cell).abs() < 1e-15).sum();
        let part: f64 = g.measures.iter().filter(|m| (**m - cell).abs() >= 1e-15).sum();
        if part > 0.0 {
            let f = (domain.volume() - full) / part;
            for m in g.measures.iter_mut() {
                if (*m - cell).abs() >= 1e-15 {
                    *m *= f;
                }
            }
        }
    }
    g.punctured = vec![false; g.nodes.len()];
    for c in &gamma.components {
        match &c.geom {
            Component::Point(p) => {
                let k = g.cell_of(p);
                let ni = g.lattice_node[g.lattice_index(k)];
                g.punctured[ni] = true;
            }
            Component::Box { lo: blo, hi: bhi } => {
                for (ni, &li) in g.node_lattice.iter().enumerate() {
                    let (a, b) = g.cell_bounds(g.lattice_coords(li));
                    if (0..d).all(|i| bhi[i] >= a[i] && blo[i] <= b[i]) {
                        g.punctured[ni] = true;
                    }
                }
            }
        }
    }
    Ok(g)
}

/// n i.i.d. uniform points, deterministic in the seed.
pub fn sample_uniform(domain: &Domain, n: usize, seed: u64) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| domain.sample_point(&mut rng)).collect())
}

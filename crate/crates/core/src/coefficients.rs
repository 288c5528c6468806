//! Weights γ, kernels ρ, mollifiers ψ, generalized distances λ, truncations and
//! normalization constants.

use crate::error::{Error, Result};
use crate::geometry::{DomainKind, Region};
use crate::numerics::{self, Point, ORIGIN};
use serde::{Deserialize, Serialize};

/// C̄_{d,p} = √π Γ((d+p)/2) / (Γ((p+1)/2) Γ(d/2)).
pub fn cbar(d: usize, p: f64) -> f64 {
    let df = d as f64;
    (numerics::ln_gamma(0.5) + numerics::ln_gamma(0.5 * (df + p)) - numerics::ln_gamma(0.5 * (p + 1.0)) - numerics::ln_gamma(0.5 * df)).exp()
}

/// C̄_{d,p}(d+p)/σ(S^{d-1}).
pub fn seminorm_prefactor(d: usize, p: f64) -> f64 {
    cbar(d, p) * (d as f64 + p) / numerics::sphere_area(d)
}

/// Open interval (d−ℓ−p, d−ℓ) of well-posed weight exponents.
pub fn admissible_beta_range(d: usize, p: f64, ell: usize) -> Result<(f64, f64)> {
    if ell >= d {
        return Err(Error::Parameter(format!("ℓ={ell} must lie in [0, d−1] for d={d}")));
    }
    let m = (d - ell) as f64;
    Ok((m - p, m))
}

/// |x''|^{-β} ∈ A_p  ⇔  (d−ℓ)(1−p) < β < d−ℓ.
pub fn ap_membership(d: usize, p: f64, beta: f64, ell: usize) -> Result<bool> {
    if ell >= d {
        return Err(Error::Parameter(format!("ℓ={ell} must lie in [0, d−1] for d={d}")));
    }
    let m = (d - ell) as f64;
    Ok(m * (1.0 - p) < beta && beta < m)
}

/// Floor truncation max(value, τ).
pub fn truncate_weight(value: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("truncation τ={tau} must be positive")));
    }
    Ok(value.max(tau))
}

/// Truncated horizon δ·max(η, τ).
pub fn truncate_horizon(eta: f64, delta: f64, tau: f64) -> Result<f64> {
    Ok(delta * truncate_weight(eta, tau)?)
}

/// Weight γ per (A_γ): dist(x,Γ) near Γ, 1 away from Γ, quintic blend between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    /// Transition radius R.
    pub radius: f64,
    pub beta: f64,
}

impl WeightSpec {
    pub fn new(radius: f64, beta: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.5) {
            return Err(Error::Parameter(format!("transition radius R={radius} must lie in (0, 0.5]")));
        }
        Ok(WeightSpec { radius, beta })
    }

    /// Blend χ as a function of s = dist(x,Γ).
    pub fn profile(&self, s: f64) -> f64 {
        let r = self.radius;
        if s <= r {
            return s;
        }
        if s >= 2.0 * r {
            return 1.0;
        }
        let t = (s - r) / r;
        let t3 = t * t * t;
        let h1 = t3 * (10.0 - 15.0 * t + 6.0 * t * t);
        let g0 = t - 6.0 * t3 + 8.0 * t3 * t - 3.0 * t3 * t * t;
        r + (1.0 - r) * h1 + r * g0
    }

    /// dχ/ds.
    pub fn profile_derivative(&self, s: f64) -> f64 {
        let r = self.radius;
        if s <= r {
            return 1.0;
        }
        if s >= 2.0 * r {
            return 0.0;
        }
        let t = (s - r) / r;
        let dh1 = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let dg0 = 1.0 - 18.0 * t * t + 32.0 * t * t * t - 15.0 * t * t * t * t;
        ((1.0 - r) * dh1 + r * dg0) / r
    }

    pub fn gamma(&self, region: &Region, x: &Point) -> f64 {
        if region.gamma.is_empty() {
            return 1.0;
        }
        self.profile(region.gamma.distance(x))
    }

    /// Lipschitz constant of χ (hence of γ), by dense sampling of χ′.
    pub fn lipschitz_constant(&self) -> f64 {
        let n = 4000;
        let r = self.radius;
        (0..=n).map(|i| self.profile_derivative(r + r * i as f64 / n as f64).abs()).fold(1.0, f64::max)
    }

    /// Smallest κ₀ with κ₀^{-1} s ≤ χ(s) ≤ κ₀ s for s ≤ 2R.
    pub fn comparability_constant(&self) -> f64 {
        let n = 4000;
        let r = self.radius;
        let mut k: f64 = 1.0;
        for i in 0..=n {
            let s = r + r * i as f64 / n as f64;
            let q = self.profile(s) / s;
            k = k.max(q).max(1.0 / q);
        }
        k
    }
}

/// Weight exponent bookkeeping for the two tiers of weights used by the energies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightMode {
    /// γ^{-β}.
    Plain,
    /// (γ^τ)^{-max(β,0)} γ^{-min(β,0)}.
    Truncated { tau: f64 },
}

impl WeightSpec {
    /// Multiplicative weight factor 1/(γ-power) at x.
    pub fn factor(&self, region: &Region, x: &Point, mode: WeightMode, exponent: f64) -> f64 {
        let g = self.gamma(region, x);
        match mode {
            WeightMode::Plain => pow_weight(g, exponent),
            WeightMode::Truncated { tau } => {
                let gt = g.max(tau);
                pow_weight(gt, exponent.max(0.0)) * pow_weight(g, exponent.min(0.0))
            }
        }
    }
}

/// g^{-b} with the conventions 0^{-b} = ∞ (b>0), 1 (b=0), 0 (b<0).
#[inline]
pub fn pow_weight(g: f64, b: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else if g <= 0.0 {
        if b > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        g.powf(-b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelShape {
    Indicator,
    /// (1−r²)₊
    Bump,
}

impl KernelShape {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(KernelShape::Indicator),
            "bump" | "polynomial-bump" => Ok(KernelShape::Bump),
            _ => Err(Error::Config(format!("unknown kernel shape '{s}'"))),
        }
    }

    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            KernelShape::Indicator => 1.0,
            KernelShape::Bump => 1.0 - r * r,
        }
    }
}

/// Radial moment ∫₀¹ f(r) r^a dr by Gauss–Legendre.
pub fn radial_moment<F: Fn(f64) -> f64>(f: F, a: f64) -> f64 {
    let (x, w) = numerics::gauss_legendre_on(64, 0.0, 1.0);
    x.iter().zip(&w).map(|(r, wi)| wi * f(*r) * r.powf(a)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub d: usize,
    pub p: f64,
    /// Radius c_ρ on which ρ is bounded below.
    pub c_rho: f64,
}

/// Normalized kernel ρ = scalar·ρ₀ with ∫_{B(0,1)} |z|^p ρ(|z|) dz = C̄_{d,p}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub spec: KernelSpec,
    pub scalar: f64,
}

impl Kernel {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.scalar * self.spec.shape.profile(r)
    }

    /// σ ∫₀¹ ρ(r) r^{d+p−1} dr.
    pub fn moment(&self) -> f64 {
        let d = self.spec.d;
        numerics::sphere_area(d) * radial_moment(|r| self.eval(r), d as f64 + self.spec.p - 1.0)
    }

    pub fn sup(&self) -> f64 {
        self.eval(0.0)
    }
}

pub fn make_kernel(spec: KernelSpec) -> Result<Kernel> {
    if !(1..=3).contains(&spec.d) || !(spec.p > 1.0) {
        return Err(Error::Parameter(format!("kernel needs d ∈ {{1,2,3}} and p > 1, got d={}, p={}", spec.d, spec.p)));
    }
    if !(spec.c_rho > 0.0 && spec.c_rho < 1.0) {
        return Err(Error::Parameter(format!("c_ρ={} outside (0,1)", spec.c_rho)));
    }
    let d = spec.d;
    let m = numerics::sphere_area(d) * radial_moment(|r| spec.shape.profile(r), d as f64 + spec.p - 1.0);
    if !(m > 0.0) {
        return Err(Error::Normalization("kernel profile has zero moment".into()));
    }
    let scalar = cbar(d, spec.p) / m;
    Ok(Kernel { spec, scalar })
}

pub fn indicator_kernel(d: usize, p: f64) -> Kernel {
    make_kernel(KernelSpec { shape: KernelShape::Indicator, d, p, c_rho: 0.5 }).expect("indicator kernel")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MollifierShape {
    Indicator,
    /// (1−r²)^k₊
    Bump {
        k: u32,
    },
}

impl MollifierShape {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(MollifierShape::Indicator),
            "bump" => Ok(MollifierShape::Bump { k: 2 }),
            "bump1" => Ok(MollifierShape::Bump { k: 1 }),
            "bump2" => Ok(MollifierShape::Bump { k: 2 }),
            "bump3" => Ok(MollifierShape::Bump { k: 3 }),
            _ => Err(Error::Config(format!("unknown mollifier shape '{s}'"))),
        }
    }

    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            MollifierShape::Indicator => 1.0,
            MollifierShape::Bump { k } => (1.0 - r * r).powi(*k as i32),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub shape: MollifierShape,
    pub d: usize,
}

/// Normalized mollifier with ∫ ψ(|x|) dx = 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub spec: MollifierSpec,
    pub scalar: f64,
}

impl Mollifier {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.scalar * self.spec.shape.profile(r)
    }

    pub fn mass(&self) -> f64 {
        let d = self.spec.d;
        numerics::sphere_area(d) * radial_moment(|r| self.eval(r), d as f64 - 1.0)
    }
}

pub fn make_mollifier(spec: MollifierSpec) -> Result<Mollifier> {
    if !(1..=3).contains(&spec.d) {
        return Err(Error::Parameter(format!("mollifier dimension {} unsupported", spec.d)));
    }
    let m = numerics::sphere_area(spec.d) * radial_moment(|r| spec.shape.profile(r), spec.d as f64 - 1.0);
    if !(m > 0.0) {
        return Err(Error::Normalization("mollifier profile has zero mass".into()));
    }
    Ok(Mollifier { scalar: 1.0 / m, spec })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LambdaChoice {
    ExactDistance,
    /// λ = (Σ_i d_i^{-q})^{-1/q} over boundary faces and labeled components.
    Smoothed {
        q: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSpec {
    pub choice: LambdaChoice,
    pub kappa0: f64,
    pub kappa1: f64,
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec { choice: LambdaChoice::ExactDistance, kappa0: 1.0, kappa1: 1.0 }
    }
}

/// Distances to each boundary feature with their gradients.
fn distance_features(region: &Region, x: &Point) -> Vec<(f64, Point)> {
    let d = region.d();
    let mut out = Vec::new();
    match &region.domain.kind {
        DomainKind::Box { lo, hi } => {
            for i in 0..d {
                let mut e = ORIGIN;
                e[i] = 1.0;
                out.push((x[i] - lo[i], e));
                e[i] = -1.0;
                out.push((hi[i] - x[i], e));
            }
        }
        DomainKind::Disc { .. } => {
            out.push((region.domain.boundary_distance(x), region.domain.boundary_distance_gradient(x)));
        }
    }
    for c in &region.gamma.components {
        let (f, dd) = c.nearest(x);
        let g = if dd > 0.0 { numerics::scale(&numerics::sub(x, &f), 1.0 / dd) } else { ORIGIN };
        out.push((dd, g));
    }
    out
}

impl LambdaSpec {
    pub fn smoothed(region: &Region, q: f64) -> Self {
        let m = distance_features(region, &region.domain.bounding_box().0).len() as f64;
        LambdaSpec { choice: LambdaChoice::Smoothed { q }, kappa0: m.powf(1.0 / q), kappa1: 1.0 }
    }

    pub fn eval(&self, region: &Region, x: &Point) -> f64 {
        match self.choice {
            LambdaChoice::ExactDistance => region.eta(x),
            LambdaChoice::Smoothed { q } => {
                let f = distance_features(region, x);
                if f.iter().any(|(dd, _)| *dd <= 0.0) {
                    return 0.0;
                }
                let m = f.iter().map(|(dd, _)| *dd).fold(f64::INFINITY, f64::min);
                let s: f64 = f.iter().map(|(dd, _)| (m / dd).powf(q)).sum();
                m * s.powf(-1.0 / q)
            }
        }
    }

    pub fn gradient(&self, region: &Region, x: &Point) -> Point {
        match self.choice {
            LambdaChoice::ExactDistance => region.eta_gradient(x),
            LambdaChoice::Smoothed { q } => {
                let lam = self.eval(region, x);
                if lam <= 0.0 {
                    return ORIGIN;
                }
                let mut g = ORIGIN;
                for (dd, gi) in distance_features(region, x) {
                    g = numerics::axpy(&g, (lam / dd).powf(q + 1.0), &gi);
                }
                g
            }
        }
    }
}

/// A_p(w, B) = (⨍_B w)(⨍_B w^{-1/(p-1)})^{p-1} for w = γ^{-β}. A labeled point
/// inside the ball is used as the apex of the polar quadrature.
pub fn ap_constant(region: &Region, weight: &WeightSpec, p: f64, center: &Point, radius: f64) -> f64 {
    let d = region.d();
    let beta = weight.beta;
    let apex = match region.gamma.nearest(center) {
        Some((_, f, dd)) if dd < radius => f,
        _ => *center,
    };
    let vol = numerics::ball_volume(d) * radius.powi(d as i32);
    let g = |y: &Point| weight.gamma(region, y);
    let b1 = if numerics::dist(&apex, center) < radius && region.gamma.distance(&apex) == 0.0 { beta } else { 0.0 };
    let b2 = -b1 / (p - 1.0);
    let i1 = crate::quadrature::ball_star_integral(d, &apex, center, radius, b1, 24, 48, |y, r| {
        // w(y)·r^{b1}, smooth near the apex.
        let gy = g(y);
        if r > 0.0 && gy > 0.0 {
            (gy / r).powf(-beta)
        } else {
            1.0
        }
    });
    let i2 = crate::quadrature::ball_star_integral(d, &apex, center, radius, b2, 24, 48, |y, r| {
        let gy = g(y);
        if r > 0.0 && gy > 0.0 {
            (gy / r).powf(beta / (p - 1.0))
        } else {
            1.0
        }
    });
    if !i1.is_finite() || !i2.is_finite() {
        return f64::INFINITY;
    }
    (i1 / vol) * (i2 / vol).powf(p - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Label, LabeledSet};

    #[test]
    fn cbar_values() {
        for d in 1..=3 {
            assert!((cbar(d, 2.0) - d as f64).abs() < 1e-10);
        }
        // Oracle: σ/C̄ = ∫_{S^{d-1}} |ω·e|^p dσ, d=2 by angular quadrature.
        for p in [1.5, 2.0, 3.0] {
            let n = 200_000;
            let s: f64 = (0..n).map(|i| (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos().abs().powf(p)).sum::<f64>()
                * 2.0
                * std::f64::consts::PI
                / n as f64;
            assert!((numerics::sphere_area(2) / cbar(2, p) - s).abs() < 1e-8);
        }
    }

    #[test]
    fn prefactors() {
        assert!((seminorm_prefactor(2, 2.0) - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((seminorm_prefactor(1, 2.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn ranges() {
        assert_eq!(admissible_beta_range(2, 2.0, 0).unwrap(), (0.0, 2.0));
        assert_eq!(admissible_beta_range(3, 2.0, 1).unwrap(), (0.0, 2.0));
        assert_eq!(admissible_beta_range(2, 3.0, 0).unwrap(), (-1.0, 2.0));
        assert!(admissible_beta_range(2, 2.0, 2).is_err());
        assert!(ap_membership(2, 2.0, 1.0, 0).unwrap());
        assert!(!ap_membership(2, 2.0, 2.5, 0).unwrap());
    }

    #[test]
    fn weight_examples() {
        let w = WeightSpec::new(0.1, 1.0).unwrap();
        assert!((w.profile(0.05) - 0.05).abs() < 1e-15);
        assert_eq!(w.profile(0.25), 1.0);
        let a = w.profile(0.14);
        let b = w.profile(0.15);
        assert!(b > a && b > 0.1 && b < 1.0);
        // Derivative matches finite differences.
        for s in [0.11, 0.13, 0.17, 0.19] {
            let fd = (w.profile(s + 1e-7) - w.profile(s - 1e-7)) / 2e-7;
            assert!((fd - w.profile_derivative(s)).abs() < 1e-5);
        }
        assert!(w.lipschitz_constant() > 1.0);
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_weight(0.02, 0.05).unwrap(), 0.05);
        assert_eq!(truncate_weight(0.3, 0.05).unwrap(), 0.3);
        assert_eq!(truncate_weight(0.05, 0.05).unwrap(), 0.05);
        assert!(truncate_weight(0.3, 0.0).is_err());
    }

    #[test]
    fn kernels() {
        let k = indicator_kernel(2, 2.0);
        assert!((k.scalar - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        let b = make_kernel(KernelSpec { shape: KernelShape::Bump, d: 2, p: 2.0, c_rho: 0.5 }).unwrap();
        // ∫₀¹(1−r²)r³ = 1/12, scalar = 2/(2π/12).
        assert!((b.scalar - 12.0 / std::f64::consts::PI).abs() < 1e-10);
        assert!((b.moment() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn mollifiers() {
        let m = make_mollifier(MollifierSpec { shape: MollifierShape::Indicator, d: 2 }).unwrap();
        assert!((m.scalar - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        let b = make_mollifier(MollifierSpec { shape: MollifierShape::Bump { k: 1 }, d: 1 }).unwrap();
        assert!((b.scalar - 0.75).abs() < 1e-12);
        assert!((b.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothed_lambda_bounds() {
        let g = LabeledSet::new(2, vec![Label::point(&[0.5, 0.5], 1.0)], 0.1).unwrap();
        let r = Region::new(Domain::unit_box(2), g).unwrap();
        let l = LambdaSpec::smoothed(&r, 8.0);
        for x in [[0.1, 0.2, 0.0], [0.45, 0.5, 0.0], [0.9, 0.9, 0.0]] {
            let e = r.eta(&x);
            let v = l.eval(&r, &x);
            assert!(v <= e * (1.0 + 1e-12) && v >= e / l.kappa0 * (1.0 - 1e-12));
            let gr = l.gradient(&r, &x);
            for i in 0..2 {
                let mut a = x;
                let mut b = x;
                a[i] += 1e-7;
                b[i] -= 1e-7;
                assert!(((l.eval(&r, &a) - l.eval(&r, &b)) / 2e-7 - gr[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn ap_constant_values() {
        let g = LabeledSet::new(2, vec![Label::point(&[0.5, 0.5], 1.0)], 0.1).unwrap();
        let r = Region::new(Domain::unit_box(2), g).unwrap();
        let w0 = WeightSpec::new(0.1, 0.0).unwrap();
        assert!((ap_constant(&r, &w0, 2.0, &[0.3, 0.3, 0.0], 0.1) - 1.0).abs() < 1e-10);
        // |x|^{-1} on B(0, ρ) ⊂ B(x₀,R): ⨍ r^{-1} = 2/ρ, ⨍ r = 2ρ/3 → A_2 = 4/3.
        let w1 = WeightSpec::new(0.1, 1.0).unwrap();
        let a = ap_constant(&r, &w1, 2.0, &[0.5, 0.5, 0.0], 0.05);
        assert!((a - 4.0 / 3.0).abs() < 1e-8, "{a}");
    }
}

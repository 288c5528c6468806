//! Boundary-localized convolution K_ε u(x) = ∫ λ_ε(x)^{-d} ψ(|y−x|/λ_ε(x)) u(y) dy
//! and its companion operators.

use crate::coefficients::{self, LambdaSpec, Mollifier};
use crate::error::{Error, Result};
use crate::funcspace::{nonlocal_sum, EnergySpec, GridField, ScalarField, Setup};
use crate::geometry::max_admissible_delta;
use crate::numerics::{self, Point, ORIGIN};
use crate::quadrature;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionSpec {
    pub epsilon: f64,
    pub mollifier: Mollifier,
    pub lambda: LambdaSpec,
}

impl ConvolutionSpec {
    pub fn new(epsilon: f64, mollifier: Mollifier, lambda: LambdaSpec) -> Result<Self> {
        let m = max_admissible_delta(lambda.kappa0, lambda.kappa1)?;
        if !(epsilon > 0.0 && epsilon < m) {
            return Err(Error::Parameter(format!("ε={epsilon} outside (0,{m})")));
        }
        Ok(ConvolutionSpec { epsilon, mollifier, lambda })
    }

    /// κ = κ₀²κ₁.
    pub fn kappa(&self) -> f64 {
        self.lambda.kappa0 * self.lambda.kappa0 * self.lambda.kappa1
    }

    pub fn theta(&self) -> f64 {
        let k = self.kappa() * self.epsilon;
        (1.0 - k) / (1.0 + k)
    }

    pub fn phi(&self, d: usize, p: f64, beta: f64) -> f64 {
        let k = self.kappa() * self.epsilon;
        let th = self.theta();
        (1.0 + k).powf(d as f64 + p) / (th.powf(d as f64 + p + beta.abs()) * (1.0 - self.lambda.kappa1 * self.epsilon).powi(2))
    }
}

/// K_ε applied to an inner field, evaluated pointwise.
pub struct Convolved<'a, F: ScalarField + ?Sized> {
    pub setup: &'a Setup,
    pub inner: &'a F,
    pub spec: &'a ConvolutionSpec,
    psi: Vec<f64>,
}

impl<'a, F: ScalarField + ?Sized> Convolved<'a, F> {
    pub fn new(setup: &'a Setup, inner: &'a F, spec: &'a ConvolutionSpec) -> Result<Self> {
        let psi: Vec<f64> = setup.ball.radii.iter().map(|r| spec.mollifier.eval(*r)).collect();
        let mass: f64 = psi.iter().zip(&setup.ball.weights).map(|(a, b)| a * b).sum();
        let expect = spec.mollifier.mass();
        if (mass - expect).abs() > 1e-10 * expect.max(1.0) {
            return Err(Error::Normalization(format!("ball rule mollifier mass {mass} differs from {expect}")));
        }
        Ok(Convolved { setup, inner, spec, psi })
    }
}

impl<F: ScalarField + ?Sized> ScalarField for Convolved<'_, F> {
    fn value(&self, x: &Point) -> f64 {
        let r = self.spec.epsilon * self.spec.lambda.eval(&self.setup.region, x);
        if r <= 0.0 {
            return self.inner.value(x);
        }
        let ball = &self.setup.ball;
        let mut s = 0.0;
        for q in 0..ball.len() {
            if self.psi[q] != 0.0 {
                s += ball.weights[q] * self.psi[q] * self.inner.value(&numerics::axpy(x, r, &ball.points[q]));
            }
        }
        s
    }
}

/// Node values of K_ε u.
pub fn boundary_convolution<'g, F: ScalarField + ?Sized>(setup: &'g Setup, field: &F, spec: &ConvolutionSpec) -> Result<GridField<'g>> {
    let k = Convolved::new(setup, field, spec)?;
    let values = numerics::det_map(setup.grid.len(), |i| k.value(&setup.grid.nodes[i]));
    GridField::new(&setup.grid, values)
}

/// Ψ_ε(x) = ∫_Ω λ_ε(y)^{-d} ψ(|x−y|/λ_ε(y)) dy.
pub fn psi_mass_reversed(setup: &Setup, spec: &ConvolutionSpec, x: &Point) -> Result<f64> {
    let region = &setup.region;
    if !region.domain.contains(x) {
        return Err(Error::Domain("point outside the domain".into()));
    }
    let d = setup.d();
    let eps = spec.epsilon;
    let lx = spec.lambda.eval(region, x);
    let k1 = spec.lambda.kappa1 * spec.lambda.kappa0;
    if lx <= 0.0 || eps * k1 >= 1.0 {
        return Ok(0.0);
    }
    // Support of y ↦ ψ_ε(y,x) lies within |y−x| < ελ(x)/(1−εκ).
    let reach = eps * lx / (1.0 - eps * k1);
    let (r, wr) = numerics::gauss_legendre_on(64, 0.0, reach);
    let dirs = quadrature::sphere_rule(d, if d == 2 { 128 } else { 32 });
    let mut s = 0.0;
    for (ri, wi) in r.iter().zip(&wr) {
        for (om, wo) in &dirs {
            let y = numerics::axpy(x, *ri, om);
            if !region.domain.contains(&y) {
                continue;
            }
            let l = eps * spec.lambda.eval(region, &y);
            if l <= 0.0 {
                continue;
            }
            s += wi * ri.powi(d as i32 - 1) * wo * l.powi(-(d as i32)) * spec.mollifier.eval(ri / l);
        }
    }
    Ok(s)
}

/// sup ψ·|B₁|·((1+εκ)/(1−εκ))^d, from λ_ε(y) ≥ ελ(x)/(1+εκ) on the support.
pub fn psi_mass_bound(d: usize, spec: &ConvolutionSpec) -> f64 {
    let k = spec.epsilon * spec.lambda.kappa1 * spec.lambda.kappa0;
    let sup = spec.mollifier.eval(0.0);
    sup * numerics::ball_volume(d) * ((1.0 + k) / (1.0 - k)).powi(d as i32)
}

/// (K̃_ε v)(x) = ∫ ψ(|z|) [v(y) + ε ∇λ(x) (z·v(y))] dz with y = x + ελ(x)z.
pub fn aux_gradient_at<V: Fn(&Point) -> Point + Sync>(setup: &Setup, v: &V, spec: &ConvolutionSpec, x: &Point) -> Point {
    let region = &setup.region;
    let eps = spec.epsilon;
    let r = eps * spec.lambda.eval(region, x);
    if r <= 0.0 {
        return v(x);
    }
    let gl = numerics::scale(&spec.lambda.gradient(region, x), eps);
    let ball = &setup.ball;
    let mut out = ORIGIN;
    for q in 0..ball.len() {
        let psi = spec.mollifier.eval(ball.radii[q]);
        if psi == 0.0 {
            continue;
        }
        let z = &ball.points[q];
        let vy = v(&numerics::axpy(x, r, z));
        let w = ball.weights[q] * psi;
        out = numerics::axpy(&out, w, &vy);
        out = numerics::axpy(&out, w * numerics::dot(z, &vy), &gl);
    }
    out
}

/// K̃_ε v at every grid node.
pub fn aux_gradient_operator<V: Fn(&Point) -> Point + Sync>(setup: &Setup, v: &V, spec: &ConvolutionSpec) -> Vec<Point> {
    let nodes = &setup.grid.nodes;
    numerics::det_map(nodes.len(), |i| aux_gradient_at(setup, v, spec, &nodes[i]))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShrinkingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub theta: f64,
    pub phi: f64,
    pub holds: bool,
}

/// Compares the seminorm of K_ε u over {η < θr} at horizon θδ with φ times that of u
/// over {η < r} at horizon δ, with the energy's kernel.
pub fn shrinking_check<F: ScalarField + ?Sized>(
    setup: &Setup,
    field: &F,
    energy: &EnergySpec,
    spec: &ConvolutionSpec,
    r: f64,
) -> Result<ShrinkingReport> {
    let d = setup.d();
    let p = energy.p;
    let beta = energy.beta();
    let theta = spec.theta();
    let phi = spec.phi(d, p, beta);
    let region = &setup.region;
    let kern: Vec<f64> = setup.ball.radii.iter().map(|t| energy.kernel.eval(*t)).collect();
    let ku = boundary_convolution(setup, field, spec)?;
    let restricted = |bound: f64| {
        setup.custom_rule(|x| if region.eta(x) < bound { coefficients::pow_weight(energy.weight.gamma(region, x), beta) } else { 0.0 }, beta)
    };
    let sampled = GridField::sample(&setup.grid, field);
    let dl = energy.delta;
    let lhs = nonlocal_sum(setup, &ku, &restricted(theta * r), |x| theta * dl * region.eta(x), &kern, p, false);
    let rhs = nonlocal_sum(setup, &sampled, &restricted(r), |x| dl * region.eta(x), &kern, p, false);
    let holds = lhs <= phi * rhs * (1.0 + 1e-9);
    Ok(ShrinkingReport { lhs, rhs: phi * rhs, theta, phi, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{make_mollifier, MollifierShape, MollifierSpec};
    use crate::funcspace::FnField;
    use crate::geometry::{Domain, Label, LabeledSet, Region};

    fn setup(res: usize) -> Setup {
        let g = LabeledSet::new(2, vec![Label::point(&[0.5, 0.5], 1.0)], 0.1).unwrap();
        Setup::new(Region::new(Domain::unit_box(2), g).unwrap(), res).unwrap()
    }

    fn cspec(eps: f64) -> ConvolutionSpec {
        let m = make_mollifier(MollifierSpec { shape: MollifierShape::Bump { k: 2 }, d: 2 }).unwrap();
        ConvolutionSpec::new(eps, m, LambdaSpec::default()).unwrap()
    }

    #[test]
    fn constants_and_linear_fields() {
        let s = setup(16);
        let c = cspec(0.2);
        let k = boundary_convolution(&s, &FnField::new(|_: &Point| 3.0), &c).unwrap();
        assert!(k.values.iter().all(|v| (v - 3.0).abs() < 1e-12));
        let k = boundary_convolution(&s, &FnField::new(|x: &Point| x[0]), &c).unwrap();
        for (v, x) in k.values.iter().zip(&s.grid.nodes) {
            assert!((v - x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_mass() {
        let s = setup(8);
        let c = cspec(0.1);
        let m = psi_mass_reversed(&s, &c, &[0.3, 0.3, 0.0]).unwrap();
        assert!((m - 1.0).abs() < 0.05, "{m}");
        let mut c2 = c.clone();
        c2.mollifier.scalar *= 2.0;
        let m2 = psi_mass_reversed(&s, &c2, &[0.3, 0.3, 0.0]).unwrap();
        assert!((m2 - 2.0 * m).abs() < 1e-12);
        assert!(m <= psi_mass_bound(2, &c));
    }

    #[test]
    fn aux_gradient_of_constant_vector() {
        let s = setup(8);
        let c = cspec(0.1);
        let v = |_: &Point| [1.0, 2.0, 0.0];
        let out = aux_gradient_at(&s, &v, &c, &[0.2, 0.3, 0.0]);
        // ∇η constant near x, and ∫ψ z = 0.
        assert!((out[0] - 1.0).abs() < 1e-12 && (out[1] - 2.0).abs() < 1e-12);
        let z = aux_gradient_at(&s, &|_: &Point| ORIGIN, &c, &[0.2, 0.3, 0.0]);
        assert_eq!(z, ORIGIN);
    }
}

//! Intrinsic-frequency densities and the Cauchy integral
//! `D(λ) = ∫ g(ω) / (λ - iω) dω` with its entire continuation.
//!
//! For `|Re λ| < NEAR_AXIS` the integrand is nearly singular, so values are
//! produced from a second-order Taylor expansion about the imaginary axis,
//! where the boundary values follow from the Sokhotski–Plemelj formula and
//! `dⁿD/dλⁿ = (-i)ⁿ ∫ g⁽ⁿ⁾(ω) / (λ - iω) dω`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quadrature::{self, Rule, Tolerance};
use crate::rng;

/// Below this `|Re λ|` the near-axis expansion replaces direct quadrature.
pub const NEAR_AXIS: f64 = 1e-3;
/// Default number of ω quadrature nodes.
pub const DEFAULT_QUAD_NODES: usize = 40;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A user-supplied even, unimodal density.
#[derive(Clone)]
pub struct CustomDensity {
    pub name: String,
    pub g: RealFn,
    pub dg: RealFn,
    pub d2g: RealFn,
    /// Analytic extension of `g`, required for continuation past the axis.
    pub complex: Option<ComplexFn>,
    /// Support is treated as `[-half_width, half_width]`; the mass outside
    /// should be below `1e-12`.
    pub half_width: f64,
}

#[derive(Clone)]
pub enum FrequencyKind {
    StandardNormal,
    Normal(f64),
    Custom(CustomDensity),
}

impl fmt::Debug for FrequencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StandardNormal => f.write_str("StandardNormal"),
            Self::Normal(s) => write!(f, "Normal({s})"),
            Self::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

/// Tanh-sinh rule weighted by the density, refined until the total mass
/// settles; negligible nodes are dropped.
fn custom_rule(c: &CustomDensity) -> Rule {
    let mut h: f64 = 0.5;
    let mut previous: Option<f64> = None;
    loop {
        let levels = (4.0 / h).ceil() as usize;
        let mut rule = Rule::tanh_sinh(c.half_width, h, levels);
        for (w, &x) in rule.weights.iter_mut().zip(&rule.nodes) {
            *w *= (c.g)(x);
        }
        let mass: f64 = rule.weights.iter().sum();
        let settled = previous.is_some_and(|p| (p - mass).abs() < 1e-13);
        if settled || h < 1e-4 {
            let keep: Vec<usize> = (0..rule.len()).filter(|&k| rule.weights[k].abs() > 1e-20).collect();
            return Rule {
                nodes: keep.iter().map(|&k| rule.nodes[k]).collect(),
                weights: keep.iter().map(|&k| rule.weights[k]).collect(),
            };
        }
        previous = Some(mass);
        h /= 2.0;
    }
}

/// Frequency density with cached constants and an ω quadrature rule.
#[derive(Clone, Debug)]
pub struct FrequencyModel {
    pub kind: FrequencyKind,
    pub quadrature: Rule,
    pub g0: f64,
    pub gpp0: f64,
    pub hilbert_gprime_0: f64,
    scale: f64,
}

impl FrequencyModel {
    pub fn standard_normal() -> Self {
        Self::build(FrequencyKind::StandardNormal, DEFAULT_QUAD_NODES).expect("standard normal is valid")
    }

    pub fn normal(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
        }
        Self::build(FrequencyKind::Normal(sigma), DEFAULT_QUAD_NODES)
    }

    pub fn custom(density: CustomDensity) -> Result<Self> {
        if !(density.half_width > 0.0 && density.half_width.is_finite()) {
            return Err(Error::Domain("custom density needs a positive half width".into()));
        }
        Self::build(FrequencyKind::Custom(density), 0)
    }

    /// Same density with `m` Gauss–Hermite nodes (Gaussian kinds only; the
    /// tanh-sinh rule of custom kinds is fixed).
    pub fn with_quad_nodes(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("need at least one quadrature node".into()));
        }
        Self::build(self.kind.clone(), m)
    }

    fn build(kind: FrequencyKind, m: usize) -> Result<Self> {
        let quadrature = match &kind {
            FrequencyKind::StandardNormal => Rule::normal_gauss_hermite(m, 1.0),
            FrequencyKind::Normal(s) => Rule::normal_gauss_hermite(m, *s),
            FrequencyKind::Custom(c) => custom_rule(c),
        };
        let mut model = Self {
            kind,
            quadrature,
            g0: 0.0,
            gpp0: 0.0,
            hilbert_gprime_0: 0.0,
            scale: 1.0,
        };
        model.scale = model.quadrature.integrate(|w| w * w).sqrt();
        model.g0 = model.density(0.0);
        model.gpp0 = model.density_d2(0.0);
        model.hilbert_gprime_0 = model.hilbert(1, 0.0)?;
        if let FrequencyKind::Custom(_) = model.kind {
            model.validate_custom()?;
        }
        Ok(model)
    }

    fn validate_custom(&self) -> Result<()> {
        let mass: f64 = self.quadrature.weights.iter().sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::ModelAssumption(format!("density integrates to {mass}, not 1")));
        }
        for &x in &self.quadrature.nodes {
            let (a, b) = (self.density(x), self.density(-x));
            if a < 0.0 || (a - b).abs() > 1e-12 * self.g0.max(1.0) || a > self.g0 * (1.0 + 1e-12) {
                return Err(Error::ModelAssumption(format!(
                    "density must be even, nonnegative and maximal at 0 (fails at {x})"
                )));
            }
        }
        if self.density_d1(0.0).abs() > 1e-10 {
            return Err(Error::ModelAssumption("g'(0) must vanish".into()));
        }
        Ok(())
    }

    fn sigma(&self) -> f64 {
        match &self.kind {
            FrequencyKind::StandardNormal => 1.0,
            FrequencyKind::Normal(s) => *s,
            FrequencyKind::Custom(_) => self.scale,
        }
    }

    /// Interval outside which `g` and its derivatives are negligible.
    fn half_width(&self) -> f64 {
        match &self.kind {
            FrequencyKind::Custom(c) => c.half_width,
            _ => 40.0 * self.sigma(),
        }
    }

    pub fn density(&self, w: f64) -> f64 {
        self.derivative(0, w)
    }

    pub fn density_d1(&self, w: f64) -> f64 {
        self.derivative(1, w)
    }

    pub fn density_d2(&self, w: f64) -> f64 {
        self.derivative(2, w)
    }

    /// `g⁽ᵒʳᵈᵉʳ⁾(ω)` for `order ≤ 2`.
    pub fn derivative(&self, order: usize, w: f64) -> f64 {
        match &self.kind {
            FrequencyKind::Custom(c) => match order {
                0 => (c.g)(w),
                1 => (c.dg)(w),
                2 => (c.d2g)(w),
                _ => panic!("derivative order {order} not available"),
            },
            _ => {
                let s = self.sigma();
                let u = w / s;
                let g = (-0.5 * u * u).exp() / (s * (2.0 * PI).sqrt());
                match order {
                    0 => g,
                    1 => -u / s * g,
                    2 => (u * u - 1.0) / (s * s) * g,
                    _ => panic!("derivative order {order} not available"),
                }
            }
        }
    }

    /// Analytic extension of `g` to complex arguments.
    pub fn density_complex(&self, z: Complex64) -> Result<Complex64> {
        match &self.kind {
            FrequencyKind::Custom(c) => c
                .complex
                .as_ref()
                .map(|f| f(z))
                .ok_or_else(|| Error::Unsupported(format!("density {} has no complex extension", c.name))),
            _ => {
                let s = self.sigma();
                let u = z / s;
                Ok((-0.5 * u * u).exp() / (s * (2.0 * PI).sqrt()))
            }
        }
    }

    fn density_complex_d1(&self, z: Complex64) -> Result<Complex64> {
        match &self.kind {
            FrequencyKind::Custom(_) => {
                let h = 1e-5;
                let up = self.density_complex(z + h)?;
                let dn = self.density_complex(z - h)?;
                Ok((up - dn) / (2.0 * h))
            }
            _ => {
                let s = self.sigma();
                Ok(-z / (s * s) * self.density_complex(z)?)
            }
        }
    }

    /// Hilbert transform `H[g⁽ᵒʳᵈᵉʳ⁾](y) = π⁻¹ PV ∫ g⁽ᵒʳᵈᵉʳ⁾(s) / (y - s) ds`.
    ///
    /// Symmetric pairs `s = y ∓ t` cancel the singularity; the excluded radius
    /// is removed by Richardson extrapolation (odd powers of the radius).
    pub fn hilbert(&self, order: usize, y: f64) -> Result<f64> {
        let f = |s: f64| self.derivative(order, s);
        let upper = y.abs() + self.half_width();
        let scale = self.sigma();
        let mut breaks: Vec<f64> = [0.25, 1.0, 2.0, 4.0, 8.0].iter().map(|b| b * scale).collect();
        breaks.push(y.abs());
        let tol = Tolerance {
            abs: 1e-15,
            rel: 1e-13,
            max_segments: 4000,
        };
        let integral_from = |eps: f64| -> Result<f64> {
            quadrature::adaptive_real(|t| (f(y - t) - f(y + t)) / t, eps, upper, &breaks, tol)
        };
        let eps = 1e-2 * scale;
        let a0 = integral_from(eps)?;
        let a1 = integral_from(eps / 2.0)?;
        let a2 = integral_from(eps / 4.0)?;
        let b0 = 2.0 * a1 - a0;
        let b1 = 2.0 * a2 - a1;
        Ok((8.0 * b1 - b0) / 7.0 / PI)
    }

    /// `∫ φ(ω) / (λ - iω) dω` by adaptive quadrature, for `|Re λ| ≥ NEAR_AXIS`.
    fn cauchy_direct(&self, order: usize, lambda: Complex64) -> Result<Complex64> {
        let half = self.half_width();
        let b = lambda.im;
        let a = lambda.re.abs();
        let mut breaks = vec![0.0, b];
        for k in [1.0, 4.0, 16.0] {
            breaks.push(b - k * a);
            breaks.push(b + k * a);
        }
        quadrature::adaptive(
            |w| Complex64::new(self.derivative(order, w), 0.0) / Complex64::new(lambda.re, lambda.im - w),
            -half,
            half,
            &breaks,
            Tolerance::default(),
        )
    }

    /// Boundary value at `λ = iy` of `dⁿ𝒟/dλⁿ`.
    fn axis_derivative(&self, n: usize, y: f64) -> Result<Complex64> {
        let boundary = Complex64::new(PI * self.derivative(n, y), -PI * self.hilbert(n, y)?);
        Ok(Complex64::new(0.0, -1.0).powu(n as u32) * boundary)
    }

    fn near_axis(&self, lambda: Complex64, terms: usize, shift: usize) -> Result<Complex64> {
        let a = lambda.re;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut coeff = 1.0;
        for n in 0..terms {
            if n > 0 {
                coeff *= a / n as f64;
            }
            sum += self.axis_derivative(n + shift, lambda.im)? * coeff;
        }
        Ok(sum)
    }

    /// `D(λ)` for `Re λ > 0`.
    pub fn d_integral(&self, lambda: Complex64) -> Result<Complex64> {
        if !(lambda.re > 0.0) {
            return Err(Error::Precondition(format!(
                "D(lambda) needs Re lambda > 0 (got {lambda}); use d_continuation"
            )));
        }
        self.d_continuation(lambda)
    }

    /// Entire continuation `𝒟(λ)`: `D(λ)` on the right half-plane,
    /// `D(λ) + 2π g(-iλ)` on the left, and the common boundary value on the axis.
    pub fn d_continuation(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.re >= NEAR_AXIS {
            self.cauchy_direct(0, lambda)
        } else if lambda.re > -NEAR_AXIS {
            self.near_axis(lambda, 3, 0)
        } else {
            let residue = self.density_complex(Complex64::new(0.0, -1.0) * lambda)?;
            Ok(self.cauchy_direct(0, lambda)? + 2.0 * PI * residue)
        }
    }

    /// `𝒟′(λ)`. Near the axis it is a first-order expansion (error `O(Re λ²)`).
    pub fn d_prime(&self, lambda: Complex64) -> Result<Complex64> {
        let minus_i = Complex64::new(0.0, -1.0);
        if lambda.re >= NEAR_AXIS {
            Ok(minus_i * self.cauchy_direct(1, lambda)?)
        } else if lambda.re > -NEAR_AXIS {
            self.near_axis(lambda, 2, 1)
        } else {
            let residue = self.density_complex_d1(minus_i * lambda)?;
            Ok(minus_i * self.cauchy_direct(1, lambda)? + 2.0 * PI * minus_i * residue)
        }
    }

    /// `g₁ = 1 / (π H[g′](0))`.
    pub fn g1(&self) -> f64 {
        1.0 / (PI * self.hilbert_gprime_0)
    }

    /// `g₂ = π g″(0) / 2`.
    pub fn g2(&self) -> Result<f64> {
        if !(self.gpp0 < 0.0) {
            return Err(Error::ModelAssumption(format!("g''(0) = {} is not negative", self.gpp0)));
        }
        Ok(PI * self.gpp0 / 2.0)
    }

    /// `n` iid draws from the labelled frequency stream of `seed`.
    pub fn sample_frequencies(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, rng::FREQUENCIES);
        match &self.kind {
            FrequencyKind::Custom(c) => {
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    let w = c.half_width * (2.0 * r.gen::<f64>() - 1.0);
                    if r.gen::<f64>() * self.g0 <= (c.g)(w) {
                        out.push(w);
                    }
                }
                out
            }
            _ => {
                let dist = Normal::new(0.0, self.sigma()).expect("positive sigma");
                (0..n).map(|_| dist.sample(&mut r)).collect()
            }
        }
    }
}

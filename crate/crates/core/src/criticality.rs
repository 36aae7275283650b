//! Critical couplings and the eigenvalue/resonance branches solving
//! `𝒟(λ) = 2 / (K μ)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freqdist::FrequencyModel;
use crate::spectral::{MuBound, SpectralDecomposition};

/// Required residual for eigenvalue-side roots.
const EIGEN_RESIDUAL: f64 = 1e-10;
/// Required residual for resonance-side roots.
const RESONANCE_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalReport {
    pub kc_plus: f64,
    /// `NegInf` when the kernel has no negative eigenvalue.
    pub kc_minus: MuBound,
    pub mu_max: MuBound,
    pub mu_min: MuBound,
    pub multiplicity_of_max: Option<usize>,
}

/// `K_c⁺ = 2 / (π g(0) μ_max)` and its counterpart for `μ_min`.
pub fn critical_couplings(decomp: &SpectralDecomposition, model: &FrequencyModel) -> Result<CriticalReport> {
    let mu_max = decomp.mu_max.finite().ok_or_else(|| {
        Error::NoPositiveEigenvalue(
            "kernel has no positive eigenvalue; flip signs (K -> -K, W -> -W) and retry".into(),
        )
    })?;
    let kc_plus = threshold(mu_max, model);
    let kc_minus = match decomp.mu_min {
        MuBound::Finite(m) => MuBound::Finite(threshold(m, model)),
        _ => MuBound::NegInf,
    };
    Ok(CriticalReport {
        kc_plus,
        kc_minus,
        mu_max: decomp.mu_max,
        mu_min: decomp.mu_min,
        multiplicity_of_max: decomp.multiplicity_of_max,
    })
}

/// `K(μ) = 2 / (π g(0) μ)`.
pub fn threshold(mu: f64, model: &FrequencyModel) -> f64 {
    2.0 / (PI * model.g0 * mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `Re λ > 0`: a true eigenvalue.
    Eigenvalue,
    /// `Re λ ≤ 0`: a root of the continued function.
    Resonance,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Eigenvalue => "eigenvalue",
            Self::Resonance => "resonance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub k: f64,
    pub lambda: Complex64,
    pub mu: f64,
    pub side: Side,
    pub residual: f64,
}

fn check_mu_k(mu: f64, k: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain(format!("mu = {mu} must be positive")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!("K = {k} must be positive")));
    }
    Ok(())
}

/// The unique real root `λ > 0` of `D(λ) = 2/(Kμ)`, for `K > K(μ)`.
pub fn eigenvalue_branch(mu: f64, k: f64, model: &FrequencyModel) -> Result<BranchPoint> {
    check_mu_k(mu, k)?;
    let target = 2.0 / (k * mu);
    if k <= threshold(mu, model) {
        return Err(Error::NoPositiveEigenvalue(format!(
            "K = {k} <= K(mu) = {}; use resonance_branch",
            threshold(mu, model)
        )));
    }
    let d = |l: f64| -> Result<f64> { Ok(model.d_continuation(Complex64::new(l, 0.0))?.re - target) };

    let mut lo = 1e-8;
    if d(lo)? <= 0.0 {
        lo = 0.0;
    }
    let mut hi = 1.0;
    while d(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NoPositiveEigenvalue("bracket search exceeded 1e12".into()));
        }
    }
    let (mut flo, mut fhi) = (d(lo)?, d(hi)?);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
        // Secant step unless it lands near an end of the bracket.
        let secant = hi - fhi * (hi - lo) / (fhi - flo);
        let mid = 0.5 * (lo + hi);
        let x = if secant > lo + 0.1 * (hi - lo) && secant < hi - 0.1 * (hi - lo) {
            secant
        } else {
            mid
        };
        let fx = d(x)?;
        if fx == 0.0 {
            lo = x;
            hi = x;
            break;
        }
        if fx > 0.0 {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
    }
    let lambda = if flo.abs() < fhi.abs() { lo } else { hi };
    let residual = (model.d_continuation(Complex64::new(lambda, 0.0))? - target).norm();
    if residual >= EIGEN_RESIDUAL {
        return Err(Error::NewtonDivergence {
            k,
            last: Complex64::new(lambda, 0.0),
            residual,
        });
    }
    Ok(BranchPoint {
        k,
        lambda: Complex64::new(lambda, 0.0),
        mu,
        side: Side::Eigenvalue,
        residual,
    })
}

/// Root of `𝒟(λ) = 2/(Kμ)` for `K ≤ K(μ)`, continued in `K` from `λ = 0` at
/// `K = K(μ)` with damped Newton steps.
pub fn resonance_branch(mu: f64, k: f64, model: &FrequencyModel) -> Result<BranchPoint> {
    check_mu_k(mu, k)?;
    let k_mu = threshold(mu, model);
    if k > k_mu {
        return Err(Error::Precondition(format!(
            "K = {k} > K(mu) = {k_mu}; use eigenvalue_branch"
        )));
    }
    let start = 2.0 / (k_mu * mu);
    let end = 2.0 / (k * mu);
    let mut lambda = Complex64::new(0.0, 0.0);
    if k == k_mu {
        let residual = (model.d_continuation(lambda)? - end).norm();
        return Ok(BranchPoint {
            k,
            lambda,
            mu,
            side: Side::Resonance,
            residual,
        });
    }
    let steps = ((end - start).abs() / 0.02).ceil().max(1.0) as usize;
    let mut residual = f64::INFINITY;
    for s in 1..=steps {
        let target = start + (end - start) * s as f64 / steps as f64;
        let tol = if s == steps { 1e-13 } else { 1e-9 };
        let mut f = model.d_continuation(lambda)? - target;
        residual = f.norm();
        let mut iterations = 0;
        while residual > tol {
            iterations += 1;
            if iterations > 60 {
                break;
            }
            let step = f / model.d_prime(lambda)?;
            let mut alpha = 1.0;
            loop {
                let trial = lambda - step * alpha;
                let ft = model.d_continuation(trial)? - target;
                if ft.norm() < residual || alpha < 1e-4 {
                    lambda = trial;
                    f = ft;
                    break;
                }
                alpha *= 0.5;
            }
            let next = f.norm();
            if !(next < residual) {
                residual = next;
                break;
            }
            residual = next;
        }
        if !residual.is_finite() || (s < steps && residual > 1e-6) {
            return Err(Error::NewtonDivergence {
                k: 2.0 / (target * mu),
                last: lambda,
                residual,
            });
        }
    }
    if residual >= RESONANCE_RESIDUAL {
        return Err(Error::NewtonDivergence {
            k,
            last: lambda,
            residual,
        });
    }
    Ok(BranchPoint {
        k,
        lambda,
        mu,
        side: Side::Resonance,
        residual,
    })
}

/// `eigenvalue_branch` above `K(μ)` and `resonance_branch` at or below it.
pub fn branch_point(mu: f64, k: f64, model: &FrequencyModel) -> Result<BranchPoint> {
    if k > threshold(mu, model) {
        eigenvalue_branch(mu, k, model)
    } else {
        resonance_branch(mu, k, model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{sample_weight_matrix, GraphonKernel, GridScheme};
    use crate::spectral::nystrom_eigs;

    fn report(kernel: &GraphonKernel, n: usize, k: usize) -> CriticalReport {
        let m = sample_weight_matrix(kernel, n, GridScheme::Midpoint).unwrap();
        critical_couplings(&nystrom_eigs(&m, k).unwrap(), &FrequencyModel::standard_normal()).unwrap()
    }

    #[test]
    fn classical_threshold() {
        let r = report(&GraphonKernel::Constant(1.0), 16, 2);
        assert!((r.kc_plus - 2.0 * (2.0 * PI).sqrt() / PI).abs() < 1e-10);
        assert_eq!(r.kc_minus, MuBound::NegInf);
    }

    #[test]
    fn cosine_and_constant_thresholds() {
        let g0 = 1.0 / (2.0 * PI).sqrt();
        let r = report(&GraphonKernel::cosine(), 64, 64);
        assert!((r.kc_plus - 4.0 / (PI * g0)).abs() < 1e-9);
        assert_eq!(r.multiplicity_of_max, Some(2));
        let p = 0.3;
        let r = report(&GraphonKernel::Constant(p), 32, 2);
        assert!((r.kc_plus - 2.0 / (PI * g0 * p)).abs() < 1e-9);
    }

    #[test]
    fn negative_eigenvalue_gives_finite_kc_minus() {
        let r = report(&GraphonKernel::small_world(0.1, 0.25).unwrap(), 128, 16);
        let kc_minus = r.kc_minus.finite().unwrap();
        assert!(kc_minus < 0.0 && r.kc_plus > 0.0);
    }

    #[test]
    fn no_positive_eigenvalue_is_reported() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(-0.5), 16, GridScheme::Midpoint).unwrap();
        let d = nystrom_eigs(&m, 2).unwrap();
        let err = critical_couplings(&d, &FrequencyModel::standard_normal());
        assert!(matches!(err, Err(Error::NoPositiveEigenvalue(_))));
    }

    #[test]
    fn eigenvalue_branch_near_threshold_is_small_and_shrinking() {
        let model = FrequencyModel::standard_normal();
        let mu = 0.5;
        let kmu = threshold(mu, &model);
        let a = eigenvalue_branch(mu, kmu * (1.0 + 1e-3), &model).unwrap();
        let b = eigenvalue_branch(mu, kmu * (1.0 + 1e-4), &model).unwrap();
        assert!(a.lambda.re > 0.0 && a.lambda.re < 1e-2);
        assert!(b.lambda.re > 0.0 && b.lambda.re < a.lambda.re);
        assert!(a.residual < 1e-10);
    }

    #[test]
    fn eigenvalue_branch_matches_bisection_oracle() {
        let model = FrequencyModel::standard_normal();
        let mu = 0.5;
        let k = 2.0 * threshold(mu, &model);
        let target = 2.0 / (k * mu);
        // Independent bisection on [1e-6, 1e3] using direct quadrature.
        let d = |l: f64| model.d_integral(Complex64::new(l, 0.0)).unwrap().re - target;
        let (mut lo, mut hi) = (1e-6, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = eigenvalue_branch(mu, k, &model).unwrap();
        assert!((p.lambda.re - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn eigenvalue_branch_increases_with_k() {
        let model = FrequencyModel::standard_normal();
        let mu = 1.0;
        let kmu = threshold(mu, &model);
        let lambdas: Vec<f64> = [1.01, 1.1, 1.5, 3.0, 10.0, 100.0]
            .iter()
            .map(|f| eigenvalue_branch(mu, kmu * f, &model).unwrap().lambda.re)
            .collect();
        assert!(lambdas.windows(2).all(|w| w[1] > w[0]));
        assert!(*lambdas.last().unwrap() > 30.0);
    }

    #[test]
    fn no_eigenvalue_below_threshold() {
        let model = FrequencyModel::standard_normal();
        let mu = 1.0;
        let kmu = threshold(mu, &model);
        let err = eigenvalue_branch(mu, 0.99 * kmu, &model);
        assert!(matches!(err, Err(Error::NoPositiveEigenvalue(_))));
        // Sign constancy of D - 2/(Kμ) on a grid of positive λ.
        let target = 2.0 / (0.99 * kmu * mu);
        for j in 0..40 {
            let l = 1e-6 * 1.6f64.powi(j);
            assert!(model.d_continuation(Complex64::new(l, 0.0)).unwrap().re < target);
        }
    }

    #[test]
    fn resonance_branch_endpoint_and_continuity() {
        let model = FrequencyModel::standard_normal();
        let mu = 0.5;
        let kmu = threshold(mu, &model);
        let p = resonance_branch(mu, kmu, &model).unwrap();
        assert_eq!(p.lambda, Complex64::new(0.0, 0.0));
        assert!(p.residual < 1e-12);

        let mut previous = Complex64::new(0.0, 0.0);
        for j in 1..=8 {
            let k = kmu * (1.0 - 0.01 * j as f64);
            let q = resonance_branch(mu, k, &model).unwrap();
            assert!(q.lambda.re < 0.0);
            assert!((q.lambda - previous).norm() < 0.05);
            let independent = (model.d_continuation(q.lambda).unwrap() - 2.0 / (k * mu)).norm();
            assert!(independent < 1e-8);
            previous = q.lambda;
        }
    }

    #[test]
    fn branch_is_continuous_across_threshold() {
        let model = FrequencyModel::standard_normal();
        let mu = 0.5;
        let kmu = threshold(mu, &model);
        let below = branch_point(mu, kmu * (1.0 - 1e-4), &model).unwrap();
        let above = branch_point(mu, kmu * (1.0 + 1e-4), &model).unwrap();
        assert!((below.lambda - above.lambda).norm() < 1e-3);
        assert_eq!(below.side, Side::Resonance);
        assert_eq!(above.side, Side::Eigenvalue);
    }

    #[test]
    fn half_critical_resonance_is_real_negative() {
        let model = FrequencyModel::standard_normal();
        let mu = 0.5;
        let k = 0.5 * threshold(mu, &model);
        let p = resonance_branch(mu, k, &model).unwrap();
        assert!(p.lambda.im.abs() < 1e-10);
        assert!(p.lambda.re < -0.5);
    }
}

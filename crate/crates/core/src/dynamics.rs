//! Finite-N Kuramoto dynamics on a weighted graph.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::graphon::WeightMatrix;
use crate::rng;

/// `R(x)` below this never supports a locked oscillator.
pub const MIN_LOCK_R: f64 = 1e-8;

/// Phases (kept unwrapped), intrinsic frequencies and grid positions.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorEnsemble {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub grid: Vec<f64>,
    pub t: f64,
}

impl OscillatorEnsemble {
    pub fn new(theta: Vec<f64>, omega: Vec<f64>, grid: Vec<f64>) -> Result<Self> {
        let n = theta.len();
        for len in [omega.len(), grid.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok(Self {
            theta,
            omega,
            grid,
            t: 0.0,
        })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// Phases reduced to `[0, 2π)`.
    pub fn wrapped_phases(&self) -> Vec<f64> {
        self.theta.iter().map(|t| wrap_positive(*t)).collect()
    }
}

fn wrap_positive(t: f64) -> f64 {
    let w = t.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Reduce an angle to `(-π, π]`.
pub fn wrap_signed(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// iid uniform phases from the labelled phase stream.
pub fn uniform_phases(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, rng::PHASES);
    (0..n).map(|_| TAU * r.gen::<f64>()).collect()
}

/// Phases whose local order parameter is close to `ε·mode(x)`: uniform
/// random phases nudged towards `arg mode` by `2ε|mode|`.
pub fn coherent_phases(mode: &[Complex64], eps: f64, seed: u64) -> Vec<f64> {
    uniform_phases(mode.len(), seed)
        .into_iter()
        .zip(mode)
        .map(|(psi, w)| psi + 2.0 * eps * w.norm() * (w.arg() - psi).sin())
        .collect()
}

/// Subtract the sample mean so the mean phase velocity vanishes.
pub fn center_frequencies(omega: &mut [f64]) {
    if omega.is_empty() {
        return;
    }
    let mean = omega.iter().sum::<f64>() / omega.len() as f64;
    for w in omega.iter_mut() {
        *w -= mean;
    }
}

/// Applies `z ↦ n⁻¹ W z`, through FFT convolution for circulant matrices.
#[derive(Clone)]
pub struct Coupling {
    matrix: Arc<WeightMatrix>,
    fast: Option<CirculantPlan>,
}

#[derive(Clone)]
struct CirculantPlan {
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Coupling {
    /// Uses the circulant path whenever the matrix is circulant.
    pub fn new(matrix: impl Into<Arc<WeightMatrix>>) -> Self {
        let matrix = matrix.into();
        let fast = matrix.circulant_column().map(|column| {
            let n = column.len();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(n);
            let inverse = planner.plan_fft_inverse(n);
            let mut spectrum: Vec<Complex64> = column.iter().map(|&c| Complex64::new(c, 0.0)).collect();
            forward.process(&mut spectrum);
            CirculantPlan {
                spectrum,
                forward,
                inverse,
            }
        });
        Self { matrix, fast }
    }

    /// Always the dense path.
    pub fn dense(matrix: impl Into<Arc<WeightMatrix>>) -> Self {
        Self {
            matrix: matrix.into(),
            fast: None,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_circulant(&self) -> bool {
        self.fast.is_some()
    }

    pub fn matrix(&self) -> &WeightMatrix {
        &self.matrix
    }

    /// `n⁻¹ Σ_j W_ij z_j` for every `i`.
    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        match &self.fast {
            Some(plan) => {
                let mut buf = z.to_vec();
                plan.forward.process(&mut buf);
                for (b, s) in buf.iter_mut().zip(&plan.spectrum) {
                    *b *= s;
                }
                plan.inverse.process(&mut buf);
                let scale = 1.0 / (n as f64 * n as f64);
                buf.iter_mut().for_each(|b| *b *= scale);
                buf
            }
            None => (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = self.matrix.row(i);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (w, zj) in row.iter().zip(z) {
                        acc += zj * *w;
                    }
                    acc / n as f64
                })
                .collect(),
        }
    }
}

fn phasors(theta: &[f64]) -> Vec<Complex64> {
    theta.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
}

fn velocities(theta: &[f64], omega: &[f64], k: f64, coupling: &Coupling) -> Vec<f64> {
    let z = phasors(theta);
    let h = coupling.apply(&z);
    theta
        .iter()
        .zip(omega)
        .zip(&h)
        .zip(&z)
        .map(|(((_, w), h), z)| w + k * (z.conj() * h).im)
        .collect()
}

fn check_dims(ensemble: &OscillatorEnsemble, coupling: &Coupling) -> Result<()> {
    if coupling.n() != ensemble.n() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.n(),
            got: coupling.n(),
        });
    }
    Ok(())
}

/// Phase velocities `ω_i + K n⁻¹ Σ_j W_ij sin(θ_j - θ_i)`.
pub fn rhs(ensemble: &OscillatorEnsemble, k: f64, coupling: &Coupling) -> Result<Vec<f64>> {
    check_dims(ensemble, coupling)?;
    Ok(velocities(&ensemble.theta, &ensemble.omega, k, coupling))
}

/// Local order parameter `h_i` with its modulus and argument.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderField {
    pub h: Vec<Complex64>,
    pub r: Vec<f64>,
    pub phi: Vec<f64>,
}

impl OrderField {
    pub fn mean_modulus(&self) -> f64 {
        if self.r.is_empty() {
            0.0
        } else {
            self.r.iter().sum::<f64>() / self.r.len() as f64
        }
    }
}

/// `h_i = n⁻¹ Σ_j W_ij e^{iθ_j}`.
pub fn order_parameter(ensemble: &OscillatorEnsemble, coupling: &Coupling) -> Result<OrderField> {
    check_dims(ensemble, coupling)?;
    let h = coupling.apply(&phasors(&ensemble.theta));
    let r = h.iter().map(|v| v.norm()).collect();
    let phi = h.iter().map(|v| v.arg()).collect();
    Ok(OrderField { h, r, phi })
}

/// Advance by `t_end` with fixed-step RK4 (last step shortened if needed),
/// calling `observer` after every `stride` steps. On a non-finite state the
/// ensemble is left at the last finite state.
pub fn integrate_observed<F>(
    ensemble: &mut OscillatorEnsemble,
    k: f64,
    coupling: &Coupling,
    dt: f64,
    t_end: f64,
    stride: usize,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(&OscillatorEnsemble),
{
    check_dims(ensemble, coupling)?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T >= 0 (dt = {dt}, T = {t_end})")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let start = ensemble.t;
    let n = ensemble.n();
    let omega = &ensemble.omega;
    let mut theta = ensemble.theta.clone();
    let mut stage = vec![0.0; n];
    for s in 0..steps {
        let h = (t_end - s as f64 * dt).min(dt);
        let k1 = velocities(&theta, omega, k, coupling);
        for i in 0..n {
            stage[i] = theta[i] + 0.5 * h * k1[i];
        }
        let k2 = velocities(&stage, omega, k, coupling);
        for i in 0..n {
            stage[i] = theta[i] + 0.5 * h * k2[i];
        }
        let k3 = velocities(&stage, omega, k, coupling);
        for i in 0..n {
            stage[i] = theta[i] + h * k3[i];
        }
        let k4 = velocities(&stage, omega, k, coupling);
        let mut finite = true;
        for i in 0..n {
            stage[i] = theta[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite &= stage[i].is_finite();
        }
        if !finite {
            ensemble.theta = theta;
            ensemble.t = start + s as f64 * dt;
            return Err(Error::NonFinite {
                last_valid_time: ensemble.t,
            });
        }
        std::mem::swap(&mut theta, &mut stage);
        if stride > 0 && (s + 1) % stride == 0 {
            ensemble.theta.copy_from_slice(&theta);
            ensemble.t = start + ((s + 1) as f64 * dt).min(t_end);
            observer(ensemble);
        }
    }
    ensemble.theta = theta;
    ensemble.t = start + t_end;
    Ok(())
}

/// [`integrate_observed`] without an observer.
pub fn integrate(ensemble: &mut OscillatorEnsemble, k: f64, coupling: &Coupling, dt: f64, t_end: f64) -> Result<()> {
    integrate_observed(ensemble, k, coupling, dt, t_end, 0, |_| {})
}

/// Lock classification against the current order field.
#[derive(Debug, Clone, PartialEq)]
pub struct LockReport {
    pub locked_mask: Vec<bool>,
    /// `Φ(x_i) + arcsin(ω_i / (K R(x_i)))` for locked oscillators.
    pub predicted_phase: Vec<Option<f64>>,
    /// Winding number of the order-parameter phase `Φ` around the ring.
    pub winding: i64,
}

impl LockReport {
    pub fn locked_fraction(&self) -> f64 {
        if self.locked_mask.is_empty() {
            return 0.0;
        }
        self.locked_mask.iter().filter(|&&l| l).count() as f64 / self.locked_mask.len() as f64
    }
}

/// Oscillators with `|ω_i| ≤ K R(x_i)` (and `R(x_i) > MIN_LOCK_R`) are locked.
pub fn classify_locked(ensemble: &OscillatorEnsemble, k: f64, field: &OrderField) -> Result<LockReport> {
    if field.r.len() != ensemble.n() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.n(),
            got: field.r.len(),
        });
    }
    let mut locked_mask = Vec::with_capacity(ensemble.n());
    let mut predicted_phase = Vec::with_capacity(ensemble.n());
    for ((w, r), phi) in ensemble.omega.iter().zip(&field.r).zip(&field.phi) {
        let kr = k * r;
        let locked = *r > MIN_LOCK_R && w.abs() <= kr;
        locked_mask.push(locked);
        predicted_phase.push(locked.then(|| phi + (w / kr).clamp(-1.0, 1.0).asin()));
    }
    Ok(LockReport {
        locked_mask,
        predicted_phase,
        winding: winding_of(&field.phi),
    })
}

/// `(2π)⁻¹ Σ wrap(a_{i+1} - a_i)` around the closed cycle.
pub fn winding_of(angles: &[f64]) -> i64 {
    let n = angles.len();
    if n == 0 {
        return 0;
    }
    let total: f64 = (0..n).map(|i| wrap_signed(angles[(i + 1) % n] - angles[i])).sum();
    (total / TAU).round() as i64
}

/// Winding number of the phases, oscillators ordered by grid position.
pub fn winding_number(ensemble: &OscillatorEnsemble) -> i64 {
    winding_of(&ensemble.theta)
}

/// Effective frequencies `(θ_end - θ_start) / window` from unwrapped phases.
pub fn effective_frequencies(start: &[f64], end: &[f64], window: f64) -> Vec<f64> {
    start.iter().zip(end).map(|(a, b)| (b - a) / window).collect()
}

/// Fraction of oscillators whose effective frequency is within `tol` of the
/// median effective frequency.
pub fn frequency_locked_fraction(effective: &[f64], tol: f64) -> f64 {
    if effective.is_empty() {
        return 0.0;
    }
    let mut sorted = effective.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    effective.iter().filter(|w| (*w - median).abs() <= tol).count() as f64 / effective.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{sample_weight_matrix, GraphonKernel, GridScheme};

    fn ensemble(theta: Vec<f64>, omega: Vec<f64>) -> OscillatorEnsemble {
        let grid = GridScheme::Midpoint.points(theta.len());
        OscillatorEnsemble::new(theta, omega, grid).unwrap()
    }

    #[test]
    fn zero_coupling_returns_frequencies() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), 3, GridScheme::Midpoint).unwrap();
        let e = ensemble(vec![0.1, 2.0, 4.0], vec![0.5, -1.0, 2.0]);
        assert_eq!(rhs(&e, 0.0, &Coupling::new(m.clone())).unwrap(), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn two_oscillators() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), 2, GridScheme::Midpoint).unwrap();
        let psi = 0.7;
        let k = 1.3;
        let e = ensemble(vec![0.0, psi], vec![0.0, 0.0]);
        for c in [Coupling::new(m.clone()), Coupling::dense(m.clone())] {
            let v = rhs(&e, k, &c).unwrap();
            assert!((v[0] - k / 2.0 * psi.sin()).abs() < 1e-15);
            assert!((v[1] + k / 2.0 * psi.sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), 3, GridScheme::Midpoint).unwrap();
        let e = ensemble(vec![0.0; 2], vec![0.0; 2]);
        assert!(matches!(
            rhs(&e, 1.0, &Coupling::new(m.clone())),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn circulant_path_matches_dense() {
        let kernel = GraphonKernel::small_world(0.2, 0.3).unwrap();
        let m = sample_weight_matrix(&kernel, 257, GridScheme::Midpoint).unwrap();
        let fast = Coupling::new(m.clone());
        assert!(fast.is_circulant());
        let e = ensemble(uniform_phases(257, 4), vec![0.0; 257]);
        let a = rhs(&e, 2.0, &fast).unwrap();
        let b = rhs(&e, 2.0, &Coupling::dense(m.clone())).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_oscillator_rotates_exactly() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), 1, GridScheme::Midpoint).unwrap();
        let mut e = ensemble(vec![0.3], vec![1.7]);
        integrate(&mut e, 2.0, &Coupling::new(m.clone()), 0.01, 5.0).unwrap();
        assert!((e.theta[0] - (0.3 + 1.7 * 5.0)).abs() < 1e-12);
        assert!((e.t - 5.0).abs() < 1e-12);
    }

    fn pendulum_error(dt: f64) -> f64 {
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), 2, GridScheme::Midpoint).unwrap();
        let psi0: f64 = 1.0;
        let mut e = ensemble(vec![0.0, psi0], vec![0.0, 0.0]);
        integrate(&mut e, 1.0, &Coupling::new(m.clone()), dt, 5.0).unwrap();
        let exact = 2.0 * ((psi0 / 2.0).tan() * (-5.0f64).exp()).atan();
        (e.theta[1] - e.theta[0] - exact).abs()
    }

    #[test]
    fn rk4_pendulum_accuracy_and_order() {
        assert!(pendulum_error(1e-3) < 1e-6);
        let ratio = pendulum_error(0.1) / pendulum_error(0.05);
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn order_parameter_examples() {
        let n = 8;
        let m = sample_weight_matrix(&GraphonKernel::Constant(0.4), n, GridScheme::Midpoint).unwrap();
        let e = ensemble(vec![0.0; n], vec![0.0; n]);
        let f = order_parameter(&e, &Coupling::new(m.clone())).unwrap();
        assert!(f.h.iter().all(|h| (h - 0.4).norm() < 1e-15));

        let m = sample_weight_matrix(&GraphonKernel::cosine(), n, GridScheme::Midpoint).unwrap();
        let grid = GridScheme::Midpoint.points(n);
        let e = ensemble(grid.iter().map(|x| TAU * x).collect(), vec![0.0; n]);
        let f = order_parameter(&e, &Coupling::new(m.clone())).unwrap();
        for (h, x) in f.h.iter().zip(&grid) {
            assert!((h - 0.5 * Complex64::from_polar(1.0, TAU * x)).norm() < 1e-12);
        }
    }

    #[test]
    fn random_phases_have_small_order_parameter() {
        let n = 10_000;
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), n, GridScheme::Midpoint).unwrap();
        let c = Coupling::new(m.clone());
        for seed in 0..20 {
            let e = ensemble(uniform_phases(n, seed), vec![0.0; n]);
            assert!(order_parameter(&e, &c).unwrap().r[0] < 0.05);
        }
    }

    #[test]
    fn lock_classification() {
        let field = OrderField {
            h: vec![],
            r: vec![0.5, 0.5, 0.0, 0.5],
            phi: vec![0.3, 0.3, 0.3, 0.3],
        };
        let k = 2.0;
        let e = ensemble(vec![0.0; 4], vec![0.0, 1.0, 0.0, 1.5]);
        let rep = classify_locked(&e, k, &field).unwrap();
        assert_eq!(rep.locked_mask, vec![true, true, false, false]);
        assert_eq!(rep.predicted_phase[0], Some(0.3));
        assert!((rep.predicted_phase[1].unwrap() - (0.3 + PI / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn winding_examples() {
        let n = 64;
        let grid = GridScheme::Midpoint.points(n);
        let e = ensemble(grid.iter().map(|x| TAU * x).collect(), vec![0.0; n]);
        assert_eq!(winding_number(&e), 1);
        let e = ensemble(vec![1.0; n], vec![0.0; n]);
        assert_eq!(winding_number(&e), 0);
        let noise = uniform_phases(n, 9);
        let theta = grid
            .iter()
            .zip(&noise)
            .map(|(x, u)| -TAU * x + (u / TAU - 0.5) * PI / 2.0)
            .collect();
        assert_eq!(winding_number(&ensemble(theta, vec![0.0; n])), -1);
    }

    #[test]
    fn coherent_seed_aligns_with_mode() {
        let n = 20_000;
        let grid = GridScheme::Midpoint.points(n);
        let mode: Vec<Complex64> = grid.iter().map(|x| Complex64::from_polar(1.0, TAU * x)).collect();
        let theta = coherent_phases(&mode, 0.05, 2);
        // Project e^{iθ} on the mode: expected overlap ε.
        let overlap: Complex64 = theta
            .iter()
            .zip(&mode)
            .map(|(t, w)| Complex64::from_polar(1.0, *t) * w.conj())
            .sum::<Complex64>()
            / n as f64;
        assert!((overlap - 0.05).norm() < 0.02);
    }

    #[test]
    fn frequency_locking_measure() {
        let eff = [0.0, 0.01, -0.02, 1.0, -3.0];
        assert!((frequency_locked_fraction(&eff, 0.05) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(1.0), 2, GridScheme::Midpoint).unwrap();
        let mut e = ensemble(vec![0.0, 1.0], vec![f64::NAN, 0.0]);
        let err = integrate(&mut e, 1.0, &Coupling::new(m.clone()), 0.1, 1.0);
        assert_eq!(err, Err(Error::NonFinite { last_valid_time: 0.0 }));
    }

    #[test]
    fn wrapped_phases_in_range() {
        let e = ensemble(vec![-0.1, 7.0, TAU, -TAU], vec![0.0; 4]);
        for p in e.wrapped_phases() {
            assert!((0.0..TAU).contains(&p));
        }
    }
}

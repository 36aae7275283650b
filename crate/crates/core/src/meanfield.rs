//! Mean-field engine: the Fourier hierarchy
//! `ż_j = ijω z_j + (jK/2)(h z_{j-1} - h̄ z_{j+1})`, `z_0 = 1`, `z_{J+1} = 0`,
//! with `h = 𝐏 z_1 = ∫∫ W(x,y) z_1(ω,y) g(ω) dω dy`, on an (ω, x) grid.
//!
//! The ω nodes are Gauss–Hermite nodes moved to the line `Im ω = β`. The
//! coefficients `z_j(·, x)` extend analytically to the upper half-plane, so
//! the ω-integral may be taken along that line; the complex weights carry
//! the factor `g(ω + iβ) / g(ω)`. Free streaming then damps each mode at rate
//! `jβ`, which lets a finite node set reproduce phase mixing, and the
//! discrete linear spectrum follows the continued `𝒟(λ)` for `Re λ > -β`.
//! With `β = 0` the rule is the plain real Gauss–Hermite rule.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::Coupling;
use crate::error::{Error, Result};
use crate::freqdist::{FrequencyKind, FrequencyModel};
use crate::graphon::{sample_weight_matrix, GraphonKernel, GridScheme, WeightMatrix};

pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_J: usize = 8;
pub const DEFAULT_X_NODES: usize = 64;
pub const DEFAULT_SEED_AMPLITUDE: f64 = 1e-3;

/// Quadrature in ω, uniform grid in x, and the kernel contraction.
#[derive(Clone)]
pub struct GalerkinGrid {
    pub j_max: usize,
    pub beta: f64,
    /// Complex ω nodes `ω_m + iβ`.
    pub nodes: Vec<Complex64>,
    /// Weights with `Σ_m weights[m] f(nodes[m]) ≈ ∫ f(ω) g(ω) dω`.
    pub weights: Vec<Complex64>,
    pub x: Vec<f64>,
    coupling: Coupling,
}

impl GalerkinGrid {
    /// Grid on the midpoint x-grid with `n` nodes and the model's ω rule.
    pub fn new(kernel: &GraphonKernel, model: &FrequencyModel, n: usize, j_max: usize, beta: f64) -> Result<Self> {
        let matrix = sample_weight_matrix(kernel, n, GridScheme::Midpoint)?;
        Self::from_matrix(Arc::new(matrix), model, j_max, beta)
    }

    pub fn from_matrix(matrix: Arc<WeightMatrix>, model: &FrequencyModel, j_max: usize, beta: f64) -> Result<Self> {
        if j_max < 1 {
            return Err(Error::Domain("mode truncation J must be at least 1".into()));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("contour shift beta = {beta} must be nonnegative")));
        }
        let rule = &model.quadrature;
        let mut nodes = Vec::with_capacity(rule.len());
        let mut weights = Vec::with_capacity(rule.len());
        for (&w, &q) in rule.nodes.iter().zip(&rule.weights) {
            let node = Complex64::new(w, beta);
            let factor = if beta == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                match &model.kind {
                    FrequencyKind::StandardNormal => Complex64::from_polar((beta * beta / 2.0).exp(), -beta * w),
                    FrequencyKind::Normal(s) => {
                        let s2 = s * s;
                        Complex64::from_polar((beta * beta / (2.0 * s2)).exp(), -beta * w / s2)
                    }
                    FrequencyKind::Custom(_) => model.density_complex(node)? / model.density(w),
                }
            };
            nodes.push(node);
            weights.push(factor * q);
        }
        let x = matrix.grid().to_vec();
        Ok(Self {
            j_max,
            beta,
            nodes,
            weights,
            x,
            coupling: Coupling::new(matrix),
        })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn matrix(&self) -> &WeightMatrix {
        self.coupling.matrix()
    }

    /// Largest step keeping RK4 stable on the free-streaming part.
    pub fn stable_dt(&self) -> f64 {
        let wmax = self.nodes.iter().fold(0.0f64, |m, w| m.max(w.norm()));
        (2.0 / (self.j_max as f64 * wmax.max(1e-12))).min(0.05)
    }

    /// `𝐏 f`: ω-quadrature then `n⁻¹ Σ_y W(x, y)` on the grid. `f` is laid out
    /// `[m * n + i]`.
    pub fn apply_p(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        let (m, n) = (self.m(), self.n());
        if f.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                got: f.len(),
            });
        }
        Ok(self.coupling.apply(&self.omega_average(f)))
    }

    fn omega_average(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        for (m, w) in self.weights.iter().enumerate() {
            for (qi, fi) in q.iter_mut().zip(&f[m * n..(m + 1) * n]) {
                *qi += w * fi;
            }
        }
        q
    }
}

/// Truncated hierarchy `z_j(ω_m, x_i)`, `j = 1..J`, laid out
/// `[((j - 1) * M + m) * n + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub j_max: usize,
    pub m: usize,
    pub n: usize,
    pub z: Vec<Complex64>,
    pub t: f64,
}

impl GalerkinState {
    pub fn zeros(grid: &GalerkinGrid) -> Self {
        let (j, m, n) = (grid.j_max, grid.m(), grid.n());
        Self {
            j_max: j,
            m,
            n,
            z: vec![Complex64::new(0.0, 0.0); j * m * n],
            t: 0.0,
        }
    }

    /// `z_1 = ε·mode(x)` for every ω and `z_j = z_1^j`.
    pub fn coherent_seed(grid: &GalerkinGrid, mode: &[Complex64], eps: f64) -> Result<Self> {
        if mode.len() != grid.n() {
            return Err(Error::DimensionMismatch {
                expected: grid.n(),
                got: mode.len(),
            });
        }
        let mut s = Self::zeros(grid);
        for j in 1..=s.j_max {
            for m in 0..s.m {
                for (i, w) in mode.iter().enumerate() {
                    let idx = s.index(j, m, i);
                    s.z[idx] = (w * eps).powu(j as u32);
                }
            }
        }
        Ok(s)
    }

    /// State with only `z_1` set, from a function of (ω, x).
    pub fn from_z1<F: Fn(Complex64, f64) -> Complex64>(grid: &GalerkinGrid, f: F) -> Self {
        let mut s = Self::zeros(grid);
        for m in 0..s.m {
            for i in 0..s.n {
                let idx = s.index(1, m, i);
                s.z[idx] = f(grid.nodes[m], grid.x[i]);
            }
        }
        s
    }

    pub fn index(&self, j: usize, m: usize, i: usize) -> usize {
        ((j - 1) * self.m + m) * self.n + i
    }

    pub fn get(&self, j: usize, m: usize, i: usize) -> Complex64 {
        self.z[self.index(j, m, i)]
    }

    pub fn mode(&self, j: usize) -> &[Complex64] {
        let len = self.m * self.n;
        &self.z[(j - 1) * len..j * len]
    }

    /// `max_{m,i} |z_j|` for each `j`.
    pub fn mode_sup_norms(&self) -> Vec<f64> {
        (1..=self.j_max)
            .map(|j| self.mode(j).iter().fold(0.0f64, |a, v| a.max(v.norm())))
            .collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.z.iter().fold(0.0f64, |a, v| a.max(v.norm()))
    }

    fn check(&self, grid: &GalerkinGrid) -> Result<()> {
        let expected = grid.j_max * grid.m() * grid.n();
        if self.z.len() != expected || self.j_max != grid.j_max {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.z.len(),
            });
        }
        Ok(())
    }
}

fn hierarchy_rhs(z: &[Complex64], k: f64, grid: &GalerkinGrid, out: &mut [Complex64]) {
    let (jm, m, n) = (grid.j_max, grid.m(), grid.n());
    let plane = m * n;
    let h = grid.coupling.apply(&grid.omega_average(&z[..plane]));
    let hc: Vec<Complex64> = h.iter().map(|v| v.conj()).collect();
    out.par_chunks_mut(plane).enumerate().for_each(|(jj, dz)| {
        let j = jj + 1;
        let jf = j as f64;
        let coef = 0.5 * jf * k;
        let cur = &z[jj * plane..(jj + 1) * plane];
        let below = (j > 1).then(|| &z[(jj - 1) * plane..jj * plane]);
        let above = (j < jm).then(|| &z[(jj + 1) * plane..(jj + 2) * plane]);
        for mm in 0..m {
            let rot = Complex64::new(0.0, jf) * grid.nodes[mm];
            for i in 0..n {
                let idx = mm * n + i;
                let lower = below.map_or(Complex64::new(1.0, 0.0), |b| b[idx]);
                let upper = above.map_or(Complex64::new(0.0, 0.0), |a| a[idx]);
                dz[idx] = rot * cur[idx] + coef * (h[i] * lower - hc[i] * upper);
            }
        }
    });
}

/// Time derivative of the truncated hierarchy.
pub fn nonlinear_rhs(state: &GalerkinState, k: f64, grid: &GalerkinGrid) -> Result<Vec<Complex64>> {
    state.check(grid)?;
    if state.j_max < 2 {
        return Err(Error::Precondition("nonlinear hierarchy needs J >= 2".into()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); state.z.len()];
    hierarchy_rhs(&state.z, k, grid, &mut out);
    Ok(out)
}

fn linear_rhs(z1: &[Complex64], k: f64, grid: &GalerkinGrid, out: &mut [Complex64]) {
    let n = grid.n();
    let h = grid.coupling.apply(&grid.omega_average(z1));
    for (mm, node) in grid.nodes.iter().enumerate() {
        let rot = Complex64::new(0.0, 1.0) * node;
        for i in 0..n {
            let idx = mm * n + i;
            out[idx] = rot * z1[idx] + 0.5 * k * h[i];
        }
    }
}

/// One classical RK4 step for `ẏ = f(y)`.
fn rk4_step<F>(y: &mut Vec<Complex64>, dt: f64, scratch: &mut [Vec<Complex64>; 5], f: F)
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let [k1, k2, k3, k4, tmp] = scratch;
    f(y, k1);
    for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
        *t = a + b * (0.5 * dt);
    }
    f(tmp, k2);
    for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
        *t = a + b * (0.5 * dt);
    }
    f(tmp, k3);
    for ((t, a), b) in tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
        *t = a + b * dt;
    }
    f(tmp, k4);
    for i in 0..y.len() {
        y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
    }
}

fn scratch(len: usize) -> [Vec<Complex64>; 5] {
    std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); len])
}

/// Discrete `L²(I)` norm of a grid function.
pub fn l2_norm(h: &[Complex64]) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    (h.iter().map(|v| v.norm_sqr()).sum::<f64>() / h.len() as f64).sqrt()
}

/// Mean over x of `|h(x)|`.
pub fn mean_modulus(h: &[Complex64]) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    h.iter().map(|v| v.norm()).sum::<f64>() / h.len() as f64
}

/// Integrate the nonlinear hierarchy for time `t_end` with step `dt`,
/// calling `observer(state, h)` every `stride` steps.
pub fn evolve_nonlinear<F>(
    state: &mut GalerkinState,
    k: f64,
    grid: &GalerkinGrid,
    dt: f64,
    t_end: f64,
    stride: usize,
    mut observer: F,
) -> Result<()>
where
    F: FnMut(&GalerkinState, &[Complex64]) -> bool,
{
    state.check(grid)?;
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T >= 0 (dt = {dt}, T = {t_end})")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let start = state.t;
    let mut buffers = scratch(state.z.len());
    for s in 0..steps {
        let h = (t_end - s as f64 * dt).min(dt);
        let previous = state.z.clone();
        rk4_step(&mut state.z, h, &mut buffers, |y, out| hierarchy_rhs(y, k, grid, out));
        if state.z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            state.z = previous;
            state.t = start + s as f64 * dt;
            return Err(Error::NonFinite {
                last_valid_time: state.t,
            });
        }
        state.t = start + ((s + 1) as f64 * dt).min(t_end);
        if stride > 0 && (s + 1) % stride == 0 {
            let hfield = grid.apply_p(state.mode(1))?;
            if !observer(state, &hfield) {
                break;
            }
        }
    }
    Ok(())
}

/// Time series of the linearized evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSeries {
    pub times: Vec<f64>,
    /// `‖𝐏 z_1(t)‖` in discrete `L²(I)`.
    pub norms: Vec<f64>,
    /// Mean over x of `|𝐏 z_1(t)|`.
    pub mean_moduli: Vec<f64>,
    /// `max |z_1(t)|` over the grid.
    pub sup_norms: Vec<f64>,
    pub z1: Vec<Complex64>,
}

/// `∂_t z_1 = iω z_1 + (K/2) 𝐏 z_1`, sampled every `stride` steps
/// (the initial value is always recorded).
pub fn evolve_linearized(
    z1: &[Complex64],
    k: f64,
    grid: &GalerkinGrid,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<LinearSeries> {
    if !(k >= 0.0) {
        return Err(Error::Domain(format!("K = {k} must be nonnegative")));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and T >= 0 (dt = {dt}, T = {t_end})")));
    }
    let mut z = z1.to_vec();
    let sup = |z: &[Complex64]| z.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let h0 = grid.apply_p(&z)?;
    let mut times = vec![0.0];
    let mut norms = vec![l2_norm(&h0)];
    let mut mean_moduli = vec![mean_modulus(&h0)];
    let mut sup_norms = vec![sup(&z)];
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let stride = stride.max(1);
    let mut buffers = scratch(z.len());
    for s in 0..steps {
        let h = (t_end - s as f64 * dt).min(dt);
        rk4_step(&mut z, h, &mut buffers, |y, out| linear_rhs(y, k, grid, out));
        if (s + 1) % stride == 0 || s + 1 == steps {
            let t = ((s + 1) as f64 * dt).min(t_end);
            let h = grid.apply_p(&z)?;
            let norm = l2_norm(&h);
            if !norm.is_finite() {
                return Err(Error::NonFinite {
                    last_valid_time: *times.last().unwrap_or(&0.0),
                });
            }
            times.push(t);
            norms.push(norm);
            mean_moduli.push(mean_modulus(&h));
            sup_norms.push(sup(&z));
        }
    }
    Ok(LinearSeries {
        times,
        norms,
        mean_moduli,
        sup_norms,
        z1: z,
    })
}

/// Least-squares slope of `log y` against `t` over samples with
/// `t ∈ [t_from, t_to]`.
pub fn fitted_rate(times: &[f64], values: &[f64], t_from: f64, t_to: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= t_from && **t <= t_to && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let nf = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Controls for [`stationary_amplitude`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Relative spread of mean `|h|` over the window that counts as stationary.
    pub tol: f64,
    /// Sampling interval of mean `|h|`.
    pub sample_every: f64,
    /// Window length as a fraction of elapsed time.
    pub window_fraction: f64,
    /// Do not declare convergence before this time.
    pub t_min: f64,
}

impl StationaryOptions {
    pub fn for_grid(grid: &GalerkinGrid) -> Self {
        Self {
            dt: grid.stable_dt().min(0.02),
            t_max: 4000.0,
            tol: 1e-6,
            sample_every: 0.5,
            window_fraction: 0.1,
            t_min: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryResult {
    pub h: Vec<Complex64>,
    pub modulus: Vec<f64>,
    pub mean_modulus: f64,
    /// Time average of mean `|h|` over the trailing 20% of the run.
    pub trailing_mean: f64,
    pub converged: bool,
    pub t: f64,
    pub series: Vec<(f64, f64)>,
    pub state: GalerkinState,
}

/// Evolve the nonlinear hierarchy from `initial` until mean `|h|` is
/// stationary or `t_max` elapses (then `converged` is false).
pub fn stationary_amplitude(
    k: f64,
    grid: &GalerkinGrid,
    initial: GalerkinState,
    opts: &StationaryOptions,
) -> Result<StationaryResult> {
    if !(opts.tol > 0.0) || !(opts.window_fraction > 0.0 && opts.window_fraction < 1.0) {
        return Err(Error::Domain("tolerance and window fraction must be positive".into()));
    }
    let mut state = initial;
    state.t = 0.0;
    let stride = ((opts.sample_every / opts.dt).round() as usize).max(1);
    let mut series = vec![(0.0, mean_modulus(&grid.apply_p(state.mode(1))?))];
    let mut converged = false;
    evolve_nonlinear(&mut state, k, grid, opts.dt, opts.t_max, stride, |s, h| {
        series.push((s.t, mean_modulus(h)));
        if s.t < opts.t_min {
            return true;
        }
        let from = s.t * (1.0 - opts.window_fraction);
        let window = series.iter().rev().take_while(|p| p.0 >= from).map(|p| p.1);
        let (lo, hi, sum, count) = window.fold((f64::INFINITY, 0.0f64, 0.0, 0usize), |(lo, hi, sum, c), v| {
            (lo.min(v), hi.max(v), sum + v, c + 1)
        });
        let mean = sum / count.max(1) as f64;
        if count >= 3 && hi - lo <= opts.tol * mean + 1e-14 {
            converged = true;
            return false;
        }
        true
    })?;
    let h = grid.apply_p(state.mode(1))?;
    let modulus: Vec<f64> = h.iter().map(|v| v.norm()).collect();
    let t = state.t;
    let from = 0.8 * t;
    let tail: Vec<f64> = series.iter().filter(|p| p.0 >= from).map(|p| p.1).collect();
    let trailing_mean = if tail.is_empty() {
        mean_modulus(&h)
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    Ok(StationaryResult {
        mean_modulus: mean_modulus(&h),
        h,
        modulus,
        trailing_mean,
        converged,
        t,
        series,
        state,
    })
}

/// `∫ e^{iωt} e^{-ω²} g(ω) dω` for the standard normal `g`.
pub fn free_streaming_reference(t: f64) -> f64 {
    (-t * t / 6.0).exp() / 3f64.sqrt()
}

/// `π g(0)`, the boundary value of the continued Cauchy integral at zero.
pub fn axis_value(model: &FrequencyModel) -> f64 {
    PI * model.g0
}

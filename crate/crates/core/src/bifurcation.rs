//! Amplitude of the bifurcating branch (simple and double `μ_max`), K-sweeps
//! with either engine, and square-root law fits.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::criticality::threshold;
use crate::dynamics::{
    center_frequencies, classify_locked, coherent_phases, integrate_observed, order_parameter, winding_of, Coupling,
    OscillatorEnsemble,
};
use crate::error::{Error, Result};
use crate::freqdist::FrequencyModel;
use crate::graphon::{sample_bernoulli_graph, sample_weight_matrix, GraphonKernel, GridScheme, WeightMatrix};
use crate::meanfield::{stationary_amplitude, GalerkinGrid, GalerkinState, StationaryOptions};
use crate::spectral::{nystrom_eigs, SpectralDecomposition};

/// Eigenfunction magnitude below which `C(x)` is treated as undefined.
pub const ZERO_TOL: f64 = 1e-8;

/// `C(x) = Π(|w|²w)(x) / (|w(x)|² w(x))` with `Π f = ⟨f, w⟩ w / ‖w‖²`.
pub fn compute_c(decomp: &SpectralDecomposition) -> Result<Vec<f64>> {
    match decomp.multiplicity_of_max {
        Some(1) => {}
        Some(m) => {
            return Err(Error::Unsupported(format!(
                "C(x) needs a simple top eigenvalue (multiplicity {m})"
            )))
        }
        None => return Err(Error::NoPositiveEigenvalue("no positive eigenvalue".into())),
    }
    let w = decomp
        .w_max()
        .ok_or_else(|| Error::NoPositiveEigenvalue("no positive eigenvalue".into()))?;
    c_of(w)
}

/// `C(x)` for an arbitrary (not necessarily normalized) eigenfunction sample.
pub fn c_of(w: &[Complex64]) -> Result<Vec<f64>> {
    let n = w.len() as f64;
    let norm2 = w.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let scale = norm2.sqrt();
    let nodes: Vec<usize> = (0..w.len()).filter(|&i| w[i].norm() < ZERO_TOL * scale).collect();
    if !nodes.is_empty() || scale == 0.0 {
        return Err(Error::ZeroCrossing { nodes });
    }
    let quartic = w.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n;
    Ok(w.iter().map(|v| quartic / (norm2 * v.norm_sqr())).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Simple,
    Double,
}

/// Constants entering the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub g0: f64,
    pub gpp0: f64,
    pub g1: f64,
    pub g2: f64,
    pub mu_max: f64,
}

/// Equilibrium of the reduced two-mode amplitude system with `ε = K - K_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    /// Moduli of the `w_+` and `w_-` components.
    pub moduli: (f64, f64),
    /// Eigenvalues of the reduced linearization.
    pub eigenvalues: [f64; 2],
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudePrediction {
    pub kc: f64,
    pub k: f64,
    pub case: Case,
    /// `A(x)` with `|h(x)| = A(x) √(K - K_c)`.
    pub coefficient: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub constants: Constants,
    pub c: Option<Vec<f64>>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    /// Winding numbers of `w_+` and `w_-` (double case).
    pub windings: Option<(i64, i64)>,
    pub fixed_points: Vec<FixedPoint>,
}

impl AmplitudePrediction {
    /// Mean over x of the predicted `|h|`.
    pub fn mean_amplitude(&self) -> f64 {
        self.amplitude.iter().sum::<f64>() / self.amplitude.len().max(1) as f64
    }

    pub fn mean_coefficient(&self) -> f64 {
        self.coefficient.iter().sum::<f64>() / self.coefficient.len().max(1) as f64
    }
}

fn constants(decomp: &SpectralDecomposition, model: &FrequencyModel) -> Result<Constants> {
    let mu_max = decomp
        .mu_max
        .finite()
        .filter(|m| *m > 0.0)
        .ok_or_else(|| Error::NoPositiveEigenvalue("no positive eigenvalue; K_c+ is infinite".into()))?;
    Ok(Constants {
        g0: model.g0,
        gpp0: model.gpp0,
        g1: model.g1(),
        g2: model.g2()?,
        mu_max,
    })
}

fn check_k(k: f64, kc: f64) -> Result<()> {
    if !(k >= kc * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!("K = {k} is below K_c+ = {kc}")));
    }
    Ok(())
}

/// `g(0)² π^{3/2} (−g″(0))^{−1/2} μ^{3/2} C^{−1/2}`.
pub fn pitchfork_coefficient(g0: f64, gpp0: f64, mu: f64, c: f64) -> f64 {
    g0 * g0 * PI.powf(1.5) / (-gpp0).sqrt() * mu.powf(1.5) / c.sqrt()
}

/// The same coefficient written through `K_c`, `g₂` and `μ`:
/// `√(−8 / (K_c⁴ μ g₂ C))`.
pub fn pitchfork_coefficient_from_kc(kc: f64, mu: f64, g2: f64, c: f64) -> f64 {
    (-8.0 / (kc.powi(4) * mu * g2 * c)).sqrt()
}

/// Prediction for a simple top eigenvalue.
pub fn predict_amplitude_1d(decomp: &SpectralDecomposition, model: &FrequencyModel, k: f64) -> Result<AmplitudePrediction> {
    if decomp.multiplicity_of_max == Some(2) {
        return Err(Error::Unsupported(
            "top eigenvalue is double; use the two-dimensional prediction".into(),
        ));
    }
    let c = compute_c(decomp)?;
    let cs = constants(decomp, model)?;
    let kc = threshold(cs.mu_max, model);
    check_k(k, kc)?;
    let coefficient: Vec<f64> = c.iter().map(|&cx| pitchfork_coefficient(cs.g0, cs.gpp0, cs.mu_max, cx)).collect();
    let root = (k - kc).max(0.0).sqrt();
    Ok(AmplitudePrediction {
        kc,
        k,
        case: Case::Simple,
        amplitude: coefficient.iter().map(|a| a * root).collect(),
        coefficient,
        constants: cs,
        c: Some(c),
        p1: None,
        p2: None,
        windings: None,
        fixed_points: Vec::new(),
    })
}

/// `p₁ = 2g₁/(K_c² μ)` and `p₂ = −2g₂ (K_c/2)⁴ μ`.
pub fn reduced_coefficients(kc: f64, mu: f64, g1: f64, g2: f64) -> (f64, f64) {
    (2.0 * g1 / (kc * kc * mu), -2.0 * g2 * (kc / 2.0).powi(4) * mu)
}

/// Prediction for a double top eigenvalue carried by a conjugate Fourier
/// pair `e^{±2πimx}`.
pub fn predict_amplitude_2d(decomp: &SpectralDecomposition, model: &FrequencyModel, k: f64) -> Result<AmplitudePrediction> {
    if decomp.multiplicity_of_max != Some(2) {
        return Err(Error::Unsupported(format!(
            "two-dimensional prediction needs a double top eigenvalue (multiplicity {:?})",
            decomp.multiplicity_of_max
        )));
    }
    let cs = constants(decomp, model)?;
    let kc = threshold(cs.mu_max, model);
    check_k(k, kc)?;
    let idx = decomp.max_index().expect("finite mu_max");
    let (wp, wm) = (&decomp.eigenfunctions[idx], &decomp.eigenfunctions[idx + 1]);
    let winding = |w: &[Complex64]| winding_of(&w.iter().map(|v| v.arg()).collect::<Vec<_>>());
    let windings = (winding(wp), winding(wm));
    let flat = |w: &[Complex64]| {
        let (lo, hi) = w.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.norm()), hi.max(v.norm())));
        hi - lo < 1e-6 * hi
    };
    if windings.0 == 0 || windings.0 != -windings.1 || !flat(wp) || !flat(wm) {
        return Err(Error::Unsupported(
            "double eigenvalue is not carried by a conjugate Fourier pair".into(),
        ));
    }
    let (p1, p2) = reduced_coefficients(kc, cs.mu_max, cs.g1, cs.g2);
    let eps = (k - kc).max(0.0);
    let modulus = (eps / p2).sqrt();
    let coefficient = vec![(1.0 / p2).sqrt(); decomp.n()];
    let pure = (eps / p2).sqrt();
    let mixed = (eps / (3.0 * p2)).sqrt();
    let fixed_points = vec![
        FixedPoint {
            moduli: (0.0, 0.0),
            eigenvalues: [eps * p1, eps * p1],
            stable: eps <= 0.0,
        },
        FixedPoint {
            moduli: (pure, 0.0),
            eigenvalues: [-2.0 * eps * p1, -eps * p1],
            stable: true,
        },
        FixedPoint {
            moduli: (0.0, pure),
            eigenvalues: [-2.0 * eps * p1, -eps * p1],
            stable: true,
        },
        FixedPoint {
            moduli: (mixed, mixed),
            eigenvalues: [-2.0 * eps * p1, 2.0 / 3.0 * eps * p1],
            stable: eps <= 0.0,
        },
    ];
    Ok(AmplitudePrediction {
        kc,
        k,
        case: Case::Double,
        coefficient,
        amplitude: vec![modulus; decomp.n()],
        constants: cs,
        c: None,
        p1: Some(p1),
        p2: Some(p2),
        windings: Some(windings),
        fixed_points,
    })
}

/// Dispatch on the multiplicity of `μ_max`.
pub fn predict_amplitude(decomp: &SpectralDecomposition, model: &FrequencyModel, k: f64) -> Result<AmplitudePrediction> {
    match decomp.multiplicity_of_max {
        Some(2) => predict_amplitude_2d(decomp, model, k),
        _ => predict_amplitude_1d(decomp, model, k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    FiniteN,
    Galerkin,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FiniteN => "finite-n",
            Self::Galerkin => "galerkin",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteNParams {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Seed for frequency sampling when it should differ from `seed`.
    pub frequency_seed: Option<u64>,
    pub scheme: GridScheme,
    /// Sample a 0/1 graph instead of the weighted matrix.
    pub bernoulli: bool,
    pub seed_amplitude: f64,
    /// Order parameter samples per unit time.
    pub sample_every: f64,
}

impl Default for FiniteNParams {
    fn default() -> Self {
        Self {
            n: 2048,
            dt: 0.05,
            t_end: 200.0,
            seed: 1,
            frequency_seed: None,
            scheme: GridScheme::Midpoint,
            bernoulli: false,
            seed_amplitude: 0.05,
            sample_every: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinParams {
    pub n: usize,
    pub j_max: usize,
    pub beta: f64,
    pub seed_amplitude: f64,
    pub t_max: f64,
    pub tol: f64,
    /// Step size; `None` picks the grid's stable step capped at 0.02.
    pub dt: Option<f64>,
}

impl Default for GalerkinParams {
    fn default() -> Self {
        Self {
            n: crate::meanfield::DEFAULT_X_NODES,
            j_max: crate::meanfield::DEFAULT_J,
            beta: crate::meanfield::DEFAULT_BETA,
            seed_amplitude: crate::meanfield::DEFAULT_SEED_AMPLITUDE,
            t_max: 4000.0,
            tol: 1e-6,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    FiniteN(FiniteNParams),
    Galerkin(GalerkinParams),
}

impl Engine {
    pub fn kind(&self) -> EngineKind {
        match self {
            Self::FiniteN(_) => EngineKind::FiniteN,
            Self::Galerkin(_) => EngineKind::Galerkin,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointStatus {
    Converged,
    NotConverged,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub k: f64,
    /// Time average of mean-over-x `|h|` on the trailing 20% of the run.
    pub summary: f64,
    pub status: PointStatus,
    /// `|h(x_i)|` at the end of the run.
    pub field: Vec<f64>,
    /// Winding number of `arg h` at the end of the run.
    pub winding: i64,
    /// Finite-N only: fraction of oscillators with `|ω_i| ≤ K R(x_i)`.
    pub locked_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtFit {
    pub kc: f64,
    pub amplitude: f64,
    pub exponent: f64,
    /// Root-mean-square residual of `log |h|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchData {
    pub engine: EngineKind,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub fit: Option<SqrtFit>,
}

impl BranchData {
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.k, p.summary)).collect()
    }
}

fn check_k_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() {
        return Err(Error::Precondition("empty K grid".into()));
    }
    if k_grid.iter().any(|k| !k.is_finite()) || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("K grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Top eigenfunction of the sampled matrix, used as the seed direction.
fn seed_mode(matrix: &WeightMatrix) -> Result<Vec<Complex64>> {
    let decomp = nystrom_eigs(matrix, 4.min(matrix.n()))?;
    decomp
        .w_max()
        .map(|w| w.to_vec())
        .ok_or_else(|| Error::NoPositiveEigenvalue("no positive eigenvalue to seed along".into()))
}

/// Run the engine at each K in turn, each run starting from the previous
/// final state. Per-point failures are recorded and the sweep continues.
pub fn sweep(kernel: &GraphonKernel, model: &FrequencyModel, k_grid: &[f64], engine: &Engine) -> Result<BranchData> {
    check_k_grid(k_grid)?;
    match engine {
        Engine::Galerkin(p) => sweep_galerkin(kernel, model, k_grid, p),
        Engine::FiniteN(p) => sweep_finite_n(kernel, model, k_grid, p),
    }
}

fn sweep_galerkin(kernel: &GraphonKernel, model: &FrequencyModel, k_grid: &[f64], p: &GalerkinParams) -> Result<BranchData> {
    let matrix = Arc::new(sample_weight_matrix(kernel, p.n, GridScheme::Midpoint)?);
    let mode = seed_mode(&matrix)?;
    let grid = GalerkinGrid::from_matrix(matrix, model, p.j_max, p.beta)?;
    let mut opts = StationaryOptions::for_grid(&grid);
    opts.t_max = p.t_max;
    opts.tol = p.tol;
    if let Some(dt) = p.dt {
        opts.dt = dt;
    }
    let fresh = GalerkinState::coherent_seed(&grid, &mode, p.seed_amplitude)?;
    let mut state = fresh.clone();
    let mut points = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        // A state that decayed below the seed level is reseeded so growth
        // does not start from roundoff.
        let amplitude = state.mode_sup_norms()[0];
        if amplitude < p.seed_amplitude {
            state = fresh.clone();
        }
        match stationary_amplitude(k, &grid, state.clone(), &opts) {
            Ok(res) => {
                points.push(SweepPoint {
                    k,
                    summary: res.trailing_mean,
                    status: if res.converged {
                        PointStatus::Converged
                    } else {
                        PointStatus::NotConverged
                    },
                    winding: winding_of(&res.h.iter().map(|v| v.arg()).collect::<Vec<_>>()),
                    field: res.modulus,
                    locked_fraction: None,
                });
                state = res.state;
            }
            Err(e) => {
                points.push(failed_point(k, grid.n(), e));
                state = fresh.clone();
            }
        }
    }
    Ok(BranchData {
        engine: EngineKind::Galerkin,
        grid: grid.x.clone(),
        points,
        fit: None,
    })
}

fn failed_point(k: f64, n: usize, e: Error) -> SweepPoint {
    SweepPoint {
        k,
        summary: 0.0,
        status: PointStatus::Failed(e.to_string()),
        field: vec![0.0; n],
        winding: 0,
        locked_fraction: None,
    }
}

/// Weight matrix, coupling and initial ensemble for a finite-N run.
pub fn finite_n_setup(
    kernel: &GraphonKernel,
    model: &FrequencyModel,
    p: &FiniteNParams,
) -> Result<(Coupling, OscillatorEnsemble)> {
    let matrix = if p.bernoulli {
        sample_bernoulli_graph(kernel, p.n, p.scheme, p.seed)?
    } else {
        sample_weight_matrix(kernel, p.n, p.scheme)?
    };
    let mode = seed_mode(&matrix)?;
    let mut omega = model.sample_frequencies(p.n, p.frequency_seed.unwrap_or(p.seed));
    center_frequencies(&mut omega);
    let theta = coherent_phases(&mode, p.seed_amplitude, p.seed);
    let grid = matrix.grid().to_vec();
    let ensemble = OscillatorEnsemble::new(theta, omega, grid)?;
    Ok((Coupling::new(matrix), ensemble))
}

/// Run a finite-N ensemble for `p.t_end` at coupling `k`; returns the
/// trailing-20% mean of mean `|h|`.
pub fn run_finite_n(ensemble: &mut OscillatorEnsemble, k: f64, coupling: &Coupling, p: &FiniteNParams) -> Result<f64> {
    let stride = ((p.sample_every / p.dt).round() as usize).max(1);
    let start = ensemble.t;
    let from = start + 0.8 * p.t_end;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut err = None;
    integrate_observed(ensemble, k, coupling, p.dt, p.t_end, stride, |e| {
        if e.t >= from - 1e-9 {
            match order_parameter(e, coupling) {
                Ok(f) => {
                    sum += f.mean_modulus();
                    count += 1;
                }
                Err(x) => err = Some(x),
            }
        }
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    if count == 0 {
        return Ok(order_parameter(ensemble, coupling)?.mean_modulus());
    }
    Ok(sum / count as f64)
}

fn sweep_finite_n(kernel: &GraphonKernel, model: &FrequencyModel, k_grid: &[f64], p: &FiniteNParams) -> Result<BranchData> {
    let (coupling, mut ensemble) = finite_n_setup(kernel, model, p)?;
    let mut points = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let before = ensemble.clone();
        match run_finite_n(&mut ensemble, k, &coupling, p) {
            Ok(summary) => {
                let field = order_parameter(&ensemble, &coupling)?;
                let lock = classify_locked(&ensemble, k, &field)?;
                points.push(SweepPoint {
                    k,
                    summary,
                    status: PointStatus::Converged,
                    field: field.r.clone(),
                    winding: lock.winding,
                    locked_fraction: Some(lock.locked_fraction()),
                });
            }
            Err(e) => {
                points.push(failed_point(k, p.n, e));
                ensemble = before;
            }
        }
    }
    Ok(BranchData {
        engine: EngineKind::FiniteN,
        grid: ensemble.grid.clone(),
        points,
        fit: None,
    })
}

/// Least squares of `log|h| = log A + e log(K - k_c)` for fixed `k_c`:
/// returns `(A, e, sum of squared residuals)`.
fn loglog_fit(points: &[(f64, f64)], kc: f64) -> Option<(f64, f64, f64)> {
    let xy: Vec<(f64, f64)> = points.iter().map(|(k, h)| ((k - kc).ln(), h.ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let e = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let b = my - e * mx;
    let sse = xy.iter().map(|p| (p.1 - b - e * p.0).powi(2)).sum();
    Some((b.exp(), e, sse))
}

/// Fit `|h| = A (K - k_c)^e` to the points with `K` in `window`, profiling
/// `k_c` over `kc_range` (default: three window spans below the first point)
/// on a grid refined by golden-section search.
pub fn fit_sqrt_points(points: &[(f64, f64)], window: (f64, f64), kc_range: Option<(f64, f64)>) -> Result<SqrtFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(k, h)| *k >= window.0 && *k <= window.1 && *h > 0.0 && h.is_finite())
        .collect();
    if pts.len() < 5 {
        return Err(Error::DegenerateWindow(format!(
            "{} usable points in [{}, {}], need at least 5",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let kmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let kmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = kmax - kmin;
    if !(span > 0.0) {
        return Err(Error::DegenerateWindow("all points share one K".into()));
    }
    let gap = 1e-9 * span;
    let (lo, hi) = kc_range.unwrap_or((kmin - 3.0 * span, kmin - gap));
    let hi = hi.min(kmin - gap);
    if !(lo < hi) {
        return Err(Error::DegenerateWindow(format!("empty k_c range [{lo}, {hi}]")));
    }
    let sse = |kc: f64| loglog_fit(&pts, kc).map_or(f64::INFINITY, |f| f.2);
    let steps = 400;
    let at = |i: usize| lo + (hi - lo) * i as f64 / steps as f64;
    let best = (0..=steps).min_by(|&a, &b| sse(at(a)).total_cmp(&sse(at(b)))).unwrap_or(0);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(steps)));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (sse(c), sse(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d);
        }
    }
    let kc = 0.5 * (a + b);
    let (amplitude, exponent, s) =
        loglog_fit(&pts, kc).ok_or_else(|| Error::DegenerateWindow("singular log-log fit".into()))?;
    Ok(SqrtFit {
        kc,
        amplitude,
        exponent,
        residual: (s / pts.len() as f64).sqrt(),
    })
}

/// [`fit_sqrt_points`] on a sweep's summaries, skipping failed points.
pub fn fit_sqrt_law(branch: &BranchData, window: (f64, f64)) -> Result<SqrtFit> {
    let pts: Vec<(f64, f64)> = branch
        .points
        .iter()
        .filter(|p| !matches!(p.status, PointStatus::Failed(_)))
        .map(|p| (p.k, p.summary))
        .collect();
    fit_sqrt_points(&pts, window, None)
}

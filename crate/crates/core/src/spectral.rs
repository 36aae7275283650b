//! Spectrum of the kernel operator `f ↦ ∫ W(·, y) f(y) dy`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::graphon::{GraphonKernel, Profile, WeightMatrix};
use crate::quadrature::{self, Tolerance};

/// Default relative tolerance for eigenvalue clustering.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;
/// Eigenvalues below this fraction of the largest are treated as zero.
const ZERO_FLOOR: f64 = 1e-9;

/// An extreme eigenvalue, or the sentinel used when that side of the
/// spectrum is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuBound {
    NegInf,
    Finite(f64),
    PosInf,
}

impl MuBound {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for MuBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInf => f.write_str("neg_inf"),
            Self::PosInf => f.write_str("pos_inf"),
            Self::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// Leading eigenpairs of the discretized operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Descending by value.
    pub eigenvalues: Vec<f64>,
    /// Grid samples with `n⁻¹ Σ |w|² = 1`.
    pub eigenfunctions: Vec<Vec<Complex64>>,
    pub grid: Vec<f64>,
    pub mu_max: MuBound,
    pub mu_min: MuBound,
    /// `None` when there is no positive eigenvalue.
    pub multiplicity_of_max: Option<usize>,
    /// Smallest and largest eigenvalue among those not returned (zeros when
    /// nothing was discarded); they fix the sign structure of the spectrum.
    pub discarded_range: (f64, f64),
}

impl SpectralDecomposition {
    /// Build from explicit eigenpairs (for instance an analytic spectrum).
    pub fn from_parts(
        grid: Vec<f64>,
        mut pairs: Vec<(f64, Vec<Complex64>)>,
        discarded_range: (f64, f64),
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Precondition("no eigenpairs supplied".into()));
        }
        if let Some((_, w)) = pairs.iter().find(|(_, w)| w.len() != grid.len()) {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: w.len(),
            });
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut decomp = Self {
            eigenvalues: pairs.iter().map(|p| p.0).collect(),
            eigenfunctions: pairs.into_iter().map(|p| p.1).collect(),
            grid,
            mu_max: MuBound::PosInf,
            mu_min: MuBound::NegInf,
            multiplicity_of_max: None,
            discarded_range,
        };
        let (lo, hi, mult) = mu_extremes(&decomp, DEFAULT_GAP_TOL)?;
        decomp.mu_min = lo;
        decomp.mu_max = hi;
        decomp.multiplicity_of_max = mult;
        Ok(decomp)
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// Index of the (first) eigenpair attaining `mu_max`.
    pub fn max_index(&self) -> Option<usize> {
        let mu = self.mu_max.finite()?;
        self.eigenvalues.iter().position(|&v| v == mu)
    }

    /// Eigenfunction for `mu_max`.
    pub fn w_max(&self) -> Option<&[Complex64]> {
        self.max_index().map(|k| self.eigenfunctions[k].as_slice())
    }
}

/// Nyström eigenpairs of `n⁻¹ W_n`: the `k` largest in magnitude, returned in
/// descending order of value. Circulant matrices on a uniform grid are
/// diagonalized by FFT, with eigenfunctions `e^{2πimx}` (and the real
/// alternating mode for `m = n/2`).
pub fn nystrom_eigs(matrix: &WeightMatrix, k: usize) -> Result<SpectralDecomposition> {
    let n = matrix.n();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("need 1 <= k <= n = {n}, got k = {k}")));
    }
    match matrix.circulant_column() {
        Some(column) if is_uniform(matrix.grid()) => circulant_eigs(matrix.grid(), column, k),
        _ => nystrom_eigs_dense(matrix, k),
    }
}

fn circulant_eigs(grid: &[f64], column: &[f64], k: usize) -> Result<SpectralDecomposition> {
    let n = grid.len();
    let mut buf: Vec<Complex64> = column.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // (eigenvalue, signed frequency); both members of a pair share one value.
    let mut modes: Vec<(f64, i64)> = (0..n)
        .map(|m| {
            if 2 * m <= n {
                (buf[m].re / n as f64, m as i64)
            } else {
                (buf[n - m].re / n as f64, m as i64 - n as i64)
            }
        })
        .collect();
    let tie = |a: &(f64, i64), b: &(f64, i64)| a.1.abs().cmp(&b.1.abs()).then(b.1.cmp(&a.1));
    modes.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(tie(a, b)));
    let discarded_range = modes[k..]
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), m| (lo.min(m.0), hi.max(m.0)));
    let mut kept = modes[..k].to_vec();
    kept.sort_by(|a, b| b.0.total_cmp(&a.0).then(tie(a, b)));
    let tau = std::f64::consts::TAU;
    let pairs = kept
        .into_iter()
        .map(|(mu, m)| {
            let w: Vec<Complex64> = if m == 0 {
                vec![Complex64::new(1.0, 0.0); n]
            } else if 2 * m.unsigned_abs() as usize == n {
                (0..n).map(|i| Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect()
            } else {
                grid.iter().map(|&x| Complex64::from_polar(1.0, tau * m as f64 * x)).collect()
            };
            (mu, w)
        })
        .collect();
    SpectralDecomposition::from_parts(grid.to_vec(), pairs, discarded_range)
}

/// [`nystrom_eigs`] through a dense symmetric eigensolver, whatever the
/// structure of the matrix.
pub fn nystrom_eigs_dense(matrix: &WeightMatrix, k: usize) -> Result<SpectralDecomposition> {
    let n = matrix.n();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("need 1 <= k <= n = {n}, got k = {k}")));
    }
    let scaled = DMatrix::from_row_slice(n, n, matrix.entries()) / n as f64;
    let eig = SymmetricEigen::try_new(scaled.clone(), f64::EPSILON, 0)
        .ok_or(Error::EigenNonConvergence { residuals: vec![] })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .abs()
            .total_cmp(&eig.eigenvalues[a].abs())
            .then(a.cmp(&b))
    });
    let discarded_range = order[k..].iter().fold((0.0f64, 0.0f64), |(lo, hi), &i| {
        (lo.min(eig.eigenvalues[i]), hi.max(eig.eigenvalues[i]))
    });
    let mut kept: Vec<usize> = order[..k].to_vec();
    kept.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut residuals = Vec::with_capacity(k);
    let mut pairs = Vec::with_capacity(k);
    let root_n = (n as f64).sqrt();
    for &i in &kept {
        let mu = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        let res = (&scaled * v - v * mu).norm();
        residuals.push(res);
        let pivot = v.iter().enumerate().fold(0, |best, (j, x)| {
            if x.abs() > v[best].abs() {
                j
            } else {
                best
            }
        });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        let w: Vec<Complex64> = v.iter().map(|&x| Complex64::new(sign * root_n * x, 0.0)).collect();
        pairs.push((mu, w));
    }
    if residuals.iter().any(|&r| !(r <= 1e-8 * scale)) {
        return Err(Error::EigenNonConvergence { residuals });
    }

    if is_uniform(matrix.grid()) {
        rotate_fourier_pairs(matrix.grid(), &mut pairs, scale);
    }
    SpectralDecomposition::from_parts(matrix.grid().to_vec(), pairs, discarded_range)
}

fn is_uniform(grid: &[f64]) -> bool {
    let n = grid.len();
    if n < 3 {
        return false;
    }
    let h = 1.0 / n as f64;
    grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() < 1e-12)
}

/// Replace each degenerate pair spanned by `e^{±2πimx}` with exactly those
/// two grid functions, `+m` first.
fn rotate_fourier_pairs(grid: &[f64], pairs: &mut [(f64, Vec<Complex64>)], scale: f64) {
    let n = grid.len();
    let tau = std::f64::consts::TAU;
    let mut a = 0;
    while a + 1 < pairs.len() {
        let b = a + 1;
        let double = (pairs[a].0 - pairs[b].0).abs() <= DEFAULT_GAP_TOL * scale
            && (a + 2 >= pairs.len() || (pairs[b].0 - pairs[a + 2].0).abs() > DEFAULT_GAP_TOL * scale)
            && (a == 0 || (pairs[a - 1].0 - pairs[a].0).abs() > DEFAULT_GAP_TOL * scale);
        if !double || pairs[a].0.abs() <= ZERO_FLOOR * scale {
            a += 1;
            continue;
        }
        let mut best = (0usize, 0.0f64);
        for m in 1..(n + 1) / 2 {
            let mut pa = Complex64::new(0.0, 0.0);
            let mut pb = Complex64::new(0.0, 0.0);
            for (j, &x) in grid.iter().enumerate() {
                let e = Complex64::from_polar(1.0, -tau * m as f64 * x);
                pa += e * pairs[a].1[j];
                pb += e * pairs[b].1[j];
            }
            let weight = (pa.norm_sqr() + pb.norm_sqr()) / (n * n) as f64;
            if weight > best.1 {
                best = (m, weight);
            }
        }
        if best.1 >= 1.0 - 1e-6 {
            let m = best.0 as f64;
            pairs[a].1 = grid.iter().map(|&x| Complex64::from_polar(1.0, tau * m * x)).collect();
            pairs[b].1 = grid.iter().map(|&x| Complex64::from_polar(1.0, -tau * m * x)).collect();
            a += 2;
        } else {
            a += 1;
        }
    }
}

/// Fourier coefficients `c_k`, `k = -kmax..=kmax`, of a circulant kernel.
/// These are the eigenvalues of the operator, with eigenfunctions `e^{2πikx}`.
pub fn fourier_coefficients(kernel: &GraphonKernel, kmax: usize) -> Result<Vec<f64>> {
    let half: Vec<f64> = match kernel {
        GraphonKernel::Constant(p) => (0..=kmax).map(|k| if k == 0 { *p } else { 0.0 }).collect(),
        GraphonKernel::SmallWorld { p, r } => (0..=kmax)
            .map(|k| {
                if k == 0 {
                    2.0 * r + p - 4.0 * p * r
                } else {
                    let kf = k as f64;
                    (1.0 - 2.0 * p) * (std::f64::consts::TAU * kf * r).sin() / (std::f64::consts::PI * kf)
                }
            })
            .collect(),
        GraphonKernel::Circulant(Profile::Coefficients(c)) => {
            (0..=kmax).map(|k| c.get(k).copied().unwrap_or(0.0)).collect()
        }
        GraphonKernel::Circulant(Profile::Function(g)) => {
            let mut out = Vec::with_capacity(kmax + 1);
            for k in 0..=kmax {
                let kf = k as f64;
                let breaks: Vec<f64> = (1..2 * k.max(1)).map(|j| 0.5 * j as f64 / (2 * k.max(1)) as f64).collect();
                let v = quadrature::adaptive_real(
                    |u| g(u) * (std::f64::consts::TAU * kf * u).cos(),
                    0.0,
                    0.5,
                    &breaks,
                    Tolerance::default(),
                )?;
                out.push(2.0 * v);
            }
            out
        }
        _ => {
            return Err(Error::Precondition(format!("{kernel:?} is not circulant")));
        }
    };
    let mut full = Vec::with_capacity(2 * kmax + 1);
    full.extend(half.iter().skip(1).rev());
    full.extend(half.iter());
    Ok(full)
}

/// Extreme eigenvalues with the sentinel convention, plus the multiplicity
/// of the largest positive eigenvalue.
pub fn mu_extremes(decomp: &SpectralDecomposition, gap_tol: f64) -> Result<(MuBound, MuBound, Option<usize>)> {
    let (dlo, dhi) = decomp.discarded_range;
    let scale = decomp
        .eigenvalues
        .iter()
        .fold(dlo.abs().max(dhi.abs()), |m, v| m.max(v.abs()));
    if scale <= 1e-12 {
        return Err(Error::DegenerateKernel(format!(
            "all eigenvalues below numerical floor (max |mu| = {scale:e})"
        )));
    }
    let floor = ZERO_FLOOR * scale;
    let all = || decomp.eigenvalues.iter().copied().chain([dlo, dhi]);
    let max_pos = all().filter(|&v| v > floor).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let min_neg = all().filter(|&v| v < -floor).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    let (hi, mult) = match max_pos {
        Some(m) => {
            let count = decomp.eigenvalues.iter().filter(|&&v| (v - m).abs() <= gap_tol * m).count();
            (MuBound::Finite(m), Some(count.max(1)))
        }
        None => (MuBound::PosInf, None),
    };
    let lo = min_neg.map_or(MuBound::NegInf, MuBound::Finite);
    Ok((lo, hi, mult))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{sample_weight_matrix, GridScheme};

    fn eigs(kernel: &GraphonKernel, n: usize, k: usize) -> SpectralDecomposition {
        let m = sample_weight_matrix(kernel, n, GridScheme::Midpoint).unwrap();
        nystrom_eigs(&m, k).unwrap()
    }

    #[test]
    fn constant_kernel_spectrum() {
        let d = eigs(&GraphonKernel::Constant(0.5), 256, 4);
        assert!((d.mu_max.finite().unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(d.mu_min, MuBound::NegInf);
        assert_eq!(d.multiplicity_of_max, Some(1));
        for w in d.w_max().unwrap() {
            assert!((w - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn cosine_kernel_double_eigenvalue_is_fourier_pair() {
        let d = eigs(&GraphonKernel::cosine(), 256, 256);
        assert!((d.mu_max.finite().unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(d.multiplicity_of_max, Some(2));
        assert_eq!(d.mu_min, MuBound::NegInf);
        for &mu in &d.eigenvalues[2..] {
            assert!(mu.abs() < 1e-8);
        }
        let tau = std::f64::consts::TAU;
        for (j, &x) in d.grid.iter().enumerate() {
            assert!((d.eigenfunctions[0][j] - Complex64::from_polar(1.0, tau * x)).norm() < 1e-15);
            assert!((d.eigenfunctions[1][j] - Complex64::from_polar(1.0, -tau * x)).norm() < 1e-15);
        }
    }

    #[test]
    fn negative_constant_kernel_flips_sentinels() {
        let d = eigs(&GraphonKernel::Constant(-0.5), 64, 3);
        assert_eq!(d.mu_max, MuBound::PosInf);
        assert_eq!(d.multiplicity_of_max, None);
        assert!((d.mu_min.finite().unwrap() + 0.5).abs() < 1e-10);
    }

    #[test]
    fn zero_kernel_is_degenerate() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(0.0), 8, GridScheme::Midpoint).unwrap();
        assert!(matches!(nystrom_eigs(&m, 2), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn small_world_top_eigenvalue_matches_c0() {
        let kernel = GraphonKernel::small_world(0.1, 0.25).unwrap();
        let c = fourier_coefficients(&kernel, 0).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15);
        let d = eigs(&kernel, 512, 8);
        assert!((d.mu_max.finite().unwrap() - c[0]).abs() < 1e-3);
        assert_eq!(d.multiplicity_of_max, Some(1));
    }

    #[test]
    fn normalization_and_orthogonality() {
        let kernel = GraphonKernel::custom("exp", |x, y| (-(x - y).abs()).exp() * 0.9);
        let d = eigs(&kernel, 200, 6);
        let n = 200.0;
        for a in 0..6 {
            let norm: f64 = d.eigenfunctions[a].iter().map(|w| w.norm_sqr()).sum::<f64>() / n;
            assert!((norm - 1.0).abs() < 1e-10);
            for b in 0..a {
                let ip: Complex64 = d.eigenfunctions[a]
                    .iter()
                    .zip(&d.eigenfunctions[b])
                    .map(|(x, y)| x * y.conj())
                    .sum::<Complex64>()
                    / n;
                assert!(ip.norm() < 1e-8);
            }
        }
    }

    #[test]
    fn trace_identity() {
        let kernel = GraphonKernel::custom("smooth", |x, y| 0.5 * (x * y).cos());
        let n = 64;
        let m = sample_weight_matrix(&kernel, n, GridScheme::Midpoint).unwrap();
        let d = nystrom_eigs(&m, n).unwrap();
        let trace: f64 = (0..n).map(|i| m.get(i, i)).sum::<f64>() / n as f64;
        assert!((d.eigenvalues.iter().sum::<f64>() - trace).abs() < 1e-12);
    }

    #[test]
    fn nystrom_converges_for_lipschitz_kernel() {
        let kernel = GraphonKernel::custom("lip", |x, y| 1.0 - (x - y).abs());
        let mu = |n| eigs(&kernel, n, 1).eigenvalues[0];
        let (a, b, c) = (mu(128), mu(256), mu(512));
        assert!((b - c).abs() < (a - b).abs());
    }

    #[test]
    fn cosine_coefficients() {
        let c = fourier_coefficients(&GraphonKernel::cosine(), 3).unwrap();
        assert_eq!(c, vec![0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn small_world_coefficients_match_quadrature() {
        let (p, r) = (0.1, 0.25);
        let kernel = GraphonKernel::small_world(p, r).unwrap();
        let c = fourier_coefficients(&kernel, 6).unwrap();
        for k in 0..=6usize {
            let kf = k as f64;
            // Independent oracle: integrate the profile piecewise.
            let g = |u: f64| if u < r { 1.0 - p } else { p };
            let v = 2.0
                * quadrature::adaptive_real(
                    |u| g(u) * (std::f64::consts::TAU * kf * u).cos(),
                    0.0,
                    0.5,
                    &[r],
                    Tolerance::default(),
                )
                .unwrap();
            assert!((c[6 + k] - v).abs() < 1e-8, "k = {k}");
            assert_eq!(c[6 + k], c[6 - k]);
        }
    }

    #[test]
    fn profile_function_coefficients() {
        let kernel = GraphonKernel::circulant_profile(|u| 0.6 * (std::f64::consts::TAU * u).cos()).unwrap();
        let c = fourier_coefficients(&kernel, 2).unwrap();
        assert!((c[3] - 0.3).abs() < 1e-12);
        assert!(c[2].abs() < 1e-12 && c[4].abs() < 1e-12);
    }

    #[test]
    fn fft_path_matches_dense_solver() {
        for kernel in [
            GraphonKernel::cosine(),
            GraphonKernel::small_world(0.1, 0.2).unwrap(),
            GraphonKernel::circulant(vec![0.1, 0.2, -0.1, 0.05]).unwrap(),
        ] {
            let m = sample_weight_matrix(&kernel, 48, GridScheme::Midpoint).unwrap();
            assert!(m.circulant_column().is_some());
            let fast = nystrom_eigs(&m, 6).unwrap();
            let dense = nystrom_eigs_dense(&m, 6).unwrap();
            let full = nystrom_eigs_dense(&m, 48).unwrap();
            assert_eq!(fast.multiplicity_of_max, dense.multiplicity_of_max);
            for (a, b) in fast.eigenvalues.iter().zip(&dense.eigenvalues) {
                assert!((a - b).abs() < 1e-12, "{kernel:?}: {a} vs {b}");
            }
            // Nonzero eigenspaces agree: each fast mode lies in the span of the
            // dense eigenfunctions with the same eigenvalue.
            for (mu, w) in fast.eigenvalues.iter().zip(&fast.eigenfunctions) {
                if mu.abs() < 1e-8 {
                    continue;
                }
                let weight: f64 = full
                    .eigenvalues
                    .iter()
                    .zip(&full.eigenfunctions)
                    .filter(|(nu, _)| (*nu - mu).abs() < 1e-9)
                    .map(|(_, v)| {
                        let ip: Complex64 = w.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
                        (ip / 48.0).norm_sqr()
                    })
                    .sum();
                assert!((weight - 1.0).abs() < 1e-9, "{kernel:?} mu {mu}: {weight}");
            }
        }
    }

    #[test]
    fn non_circulant_rejected() {
        let k = GraphonKernel::custom("xy", |x, y| x * y);
        assert!(matches!(fourier_coefficients(&k, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn sentinels_serialize_as_words() {
        assert_eq!(MuBound::NegInf.to_string(), "neg_inf");
        assert_eq!(MuBound::PosInf.to_string(), "pos_inf");
    }
}

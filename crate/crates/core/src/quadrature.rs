//! Quadrature rules shared by the frequency and mean-field modules.
//!
//! Two kinds of rule live here:
//! - fixed node/weight rules ([`Rule`]): Gauss–Hermite for Gaussian weights and
//!   truncated tanh-sinh on a symmetric interval;
//! - an adaptive Gauss–Kronrod (7/15) integrator for complex-valued integrands,
//!   used for Cauchy-type integrals whose pole may sit close to the real axis.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A fixed quadrature rule: `∫ f ≈ Σ weights[k] f(nodes[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn integrate_complex<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }

    /// Gauss–Hermite rule for the normal density with standard deviation
    /// `sigma`: weights sum to one and `Σ w f(x) ≈ E[f(ω)]`.
    ///
    /// Built by Golub–Welsch from the Jacobi matrix of the probabilists'
    /// Hermite polynomials.
    pub fn normal_gauss_hermite(m: usize, sigma: f64) -> Self {
        assert!(m >= 1, "need at least one node");
        let jacobi = DMatrix::from_fn(m, m, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k] * sigma, v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        // Symmetrize: the eigen-solver nodes are symmetric only up to rounding.
        let n = pairs.len();
        for k in 0..n / 2 {
            let x = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
            let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
            pairs[k] = (-x, w);
            pairs[n - 1 - k] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Truncated tanh-sinh rule on `[-half_width, half_width]` with step `h`
    /// in the transformed variable and `2*levels+1` nodes.
    pub fn tanh_sinh(half_width: f64, h: f64, levels: usize) -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let mut nodes = Vec::with_capacity(2 * levels + 1);
        let mut weights = Vec::with_capacity(2 * levels + 1);
        for k in -(levels as i64)..=(levels as i64) {
            let t = k as f64 * h;
            let u = half_pi * t.sinh();
            let x = u.tanh();
            let w = h * half_pi * t.cosh() / (u.cosh() * u.cosh());
            if w == 0.0 || x.abs() >= 1.0 {
                continue;
            }
            nodes.push(half_width * x);
            weights.push(half_width * w);
        }
        Self { nodes, weights }
    }
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

struct Segment {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-12,
            max_segments: 4000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration of a complex integrand over
/// `[a, b]`, with optional interior break points where the integrand is
/// sharply peaked.
pub fn adaptive<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Complex64> {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&c| c > a && c < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    while total_err > tol.abs.max(tol.rel * total.norm()) {
        if heap.len() >= tol.max_segments {
            return Err(Error::Quadrature {
                estimate: total_err,
            });
        }
        let worst = heap.pop().expect("non-empty segment heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
    }
    // Re-sum to shed the drift of the running total.
    let total: Complex64 = heap.iter().map(|s| s.value).sum();
    Ok(total)
}

/// Real-valued convenience wrapper around [`adaptive`].
pub fn adaptive_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    adaptive(|x| Complex64::new(f(x), 0.0), a, b, breaks, tol).map(|z| z.re)
}

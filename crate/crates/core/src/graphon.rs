//! Graphon kernels and the weighted graphs sampled from them.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// Distances within this of the small-world band edge count as ties.
const EDGE_TIE_TOL: f64 = 1e-12;
/// Tolerance for recognising a sampled matrix as circulant.
const CIRCULANT_TOL: f64 = 1e-13;

type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Profile of a circulant kernel `W(x, y) = G(x - y)`.
#[derive(Clone)]
pub enum Profile {
    /// Real coefficients `c_0, c_1, ..., c_K`; `G(u) = c_0 + 2 Σ c_k cos(2πku)`.
    Coefficients(Vec<f64>),
    /// `G` given on the circle; only `G(u)` for `u ∈ [0, 1/2]` is consulted,
    /// which makes `G` even by construction.
    Function(ProfileFn),
}

/// A symmetric kernel on the unit square with values in `[-1, 1]`.
#[derive(Clone)]
pub enum GraphonKernel {
    Constant(f64),
    SmallWorld { p: f64, r: f64 },
    Circulant(Profile),
    /// Row-major `n × n` cell values, looked up by nearest cell.
    Grid { n: usize, values: Vec<f64> },
    /// Arbitrary callable; evaluated as `(f(x,y) + f(y,x)) / 2`.
    Custom { name: String, f: KernelFn },
}

impl fmt::Debug for GraphonKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(p) => write!(f, "Constant({p})"),
            Self::SmallWorld { p, r } => write!(f, "SmallWorld {{ p: {p}, r: {r} }}"),
            Self::Circulant(Profile::Coefficients(c)) => write!(f, "Circulant({c:?})"),
            Self::Circulant(Profile::Function(_)) => write!(f, "Circulant(<profile>)"),
            Self::Grid { n, .. } => write!(f, "Grid {{ n: {n} }}"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl GraphonKernel {
    pub fn constant(p: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("constant kernel value {p} outside [-1, 1]")));
        }
        Ok(Self::Constant(p))
    }

    pub fn small_world(p: f64, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("small-world p = {p} outside [0, 1]")));
        }
        if !(0.0..=0.5).contains(&r) {
            return Err(Error::Domain(format!("small-world r = {r} outside [0, 1/2]")));
        }
        Ok(Self::SmallWorld { p, r })
    }

    /// Circulant kernel from cosine coefficients `c_0..c_K`.
    pub fn circulant(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("circulant coefficients must be finite and non-empty".into()));
        }
        let kernel = Self::Circulant(Profile::Coefficients(coeffs));
        kernel.check_profile_bound()?;
        Ok(kernel)
    }

    /// Circulant kernel from a profile function on the circle.
    pub fn circulant_profile<F>(g: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kernel = Self::Circulant(Profile::Function(Arc::new(g)));
        kernel.check_profile_bound()?;
        Ok(kernel)
    }

    /// `W(x, y) = cos(2π(x - y))`.
    pub fn cosine() -> Self {
        Self::Circulant(Profile::Coefficients(vec![0.0, 0.5]))
    }

    pub fn grid(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(Error::Domain(format!("grid value {v} at ({i}, {j}) outside [-1, 1]")));
                }
                if v != values[j * n + i] {
                    return Err(Error::Domain(format!("grid values not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::Grid { n, values })
    }

    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    fn check_profile_bound(&self) -> Result<()> {
        let samples = 4096;
        for k in 0..=samples {
            let v = self.profile_at(0.5 * k as f64 / samples as f64);
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                return Err(Error::Domain(format!("circulant profile value {v} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// True for kernels of the form `G(x - y)`.
    pub fn is_circulant(&self) -> bool {
        matches!(
            self,
            Self::Constant(_) | Self::SmallWorld { .. } | Self::Circulant(_)
        )
    }

    /// `G(u)` for circulant kernels, with `u` a circular distance in `[0, 1/2]`.
    fn profile_at(&self, d: f64) -> f64 {
        match self {
            Self::Constant(p) => *p,
            Self::SmallWorld { p, r } => {
                if (d - r).abs() <= EDGE_TIE_TOL {
                    // Jump midpoint: the value the Fourier series converges to.
                    0.5
                } else if d < *r {
                    1.0 - p
                } else {
                    *p
                }
            }
            Self::Circulant(Profile::Coefficients(c)) => {
                let tau = 2.0 * std::f64::consts::PI;
                c[0] + 2.0
                    * c.iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, ck)| ck * (tau * k as f64 * d).cos())
                        .sum::<f64>()
            }
            Self::Circulant(Profile::Function(g)) => g(d),
            Self::Grid { .. } | Self::Custom { .. } => unreachable!("not circulant"),
        }
    }

    /// Circulant profile `G(u)` at an arbitrary `u`, reduced to `[0, 1/2]`.
    pub fn profile(&self, u: f64) -> Result<f64> {
        if !self.is_circulant() {
            return Err(Error::Precondition(format!("{self:?} is not circulant")));
        }
        let a = u.rem_euclid(1.0);
        Ok(self.profile_at(a.min(1.0 - a)))
    }

    /// Kernel value `W(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!("({x}, {y}) outside the unit square")));
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Grid { n, values } => {
                let cell = |t: f64| ((t * *n as f64) as usize).min(n - 1);
                values[cell(x) * n + cell(y)]
            }
            Self::Custom { f, .. } => 0.5 * (f(x, y) + f(y, x)),
            _ => {
                let a = (x - y).abs();
                self.profile_at(a.min(1.0 - a))
            }
        }
    }
}

/// Placement of the grid points `ξ_ni`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridScheme {
    /// `ξ_i = (2i - 1) / (2n)`.
    Midpoint,
    /// `ξ_i = (i - 1) / n`.
    LeftEndpoint,
    /// Sorted iid uniform points.
    UniformRandom(u64),
}

impl GridScheme {
    pub fn points(&self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        match *self {
            Self::Midpoint => (0..n).map(|i| (2 * i + 1) as f64 / (2.0 * nf)).collect(),
            Self::LeftEndpoint => (0..n).map(|i| i as f64 / nf).collect(),
            Self::UniformRandom(seed) => {
                let mut r = rng::stream(seed, rng::GRID);
                let mut pts: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
                pts.sort_by(|a, b| a.total_cmp(b));
                pts
            }
        }
    }
}

/// Dense symmetric weight matrix on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<f64>,
    grid: Vec<f64>,
    circulant: Option<Vec<f64>>,
}

impl WeightMatrix {
    /// Wrap row-major entries; checks shape, range and exact symmetry.
    pub fn new(grid: Vec<f64>, entries: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for i in 0..n {
            for j in i..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(Error::Domain(format!("weight {v} at ({i}, {j}) outside [-1, 1]")));
                }
                if v != entries[j * n + i] {
                    return Err(Error::Domain(format!("weights not symmetric at ({i}, {j})")));
                }
            }
        }
        let circulant = detect_circulant(n, &entries);
        Ok(Self {
            n,
            entries,
            grid,
            circulant,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// First column `c` with `W_ij = c[(i - j) mod n]`, when the matrix is
    /// circulant.
    pub fn circulant_column(&self) -> Option<&[f64]> {
        self.circulant.as_deref()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn detect_circulant(n: usize, entries: &[f64]) -> Option<Vec<f64>> {
    if n == 0 {
        return None;
    }
    let column: Vec<f64> = (0..n).map(|i| entries[i * n]).collect();
    for i in 0..n {
        for j in 0..n {
            let expected = column[(i + n - j) % n];
            if (entries[i * n + j] - expected).abs() > CIRCULANT_TOL {
                return None;
            }
        }
    }
    Some(column)
}

/// `W_nij = W(ξ_i, ξ_j)` on the chosen grid.
pub fn sample_weight_matrix(kernel: &GraphonKernel, n: usize, scheme: GridScheme) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let grid = scheme.points(n);
    let mut entries = vec![0.0; n * n];
    entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, w) in row.iter_mut().enumerate() {
            *w = kernel.eval_unchecked(grid[i], grid[j]);
        }
    });
    WeightMatrix::new(grid, entries)
}

/// Simple graph with edge `{i, j}` present with probability `W(ξ_i, ξ_j)`.
pub fn sample_bernoulli_graph(
    kernel: &GraphonKernel,
    n: usize,
    scheme: GridScheme,
    seed: u64,
) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::Precondition("n must be at least 1".into()));
    }
    let grid = scheme.points(n);
    let mut r = rng::stream(seed, rng::EDGES);
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let p = kernel.eval_unchecked(grid[i], grid[j]);
            if p < 0.0 {
                return Err(Error::Precondition(format!(
                    "kernel value {p} at ({}, {}) is not a probability",
                    grid[i], grid[j]
                )));
            }
            if r.gen::<f64>() < p {
                entries[i * n + j] = 1.0;
                entries[j * n + i] = 1.0;
            }
        }
    }
    WeightMatrix::new(grid, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(GraphonKernel::constant(0.5).unwrap().eval(0.3, 0.9).unwrap(), 0.5);
        let sw = GraphonKernel::small_world(0.1, 0.3).unwrap();
        assert!((sw.eval(0.0, 0.2).unwrap() - 0.9).abs() < 1e-15);
        assert!((sw.eval(0.0, 0.5).unwrap() - 0.1).abs() < 1e-15);
        // Wrap-around distance min{0.9, 0.1}.
        assert!((sw.eval(0.0, 0.9).unwrap() - 0.9).abs() < 1e-15);
        assert!(GraphonKernel::cosine().eval(0.0, 0.25).unwrap().abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_points_outside_square() {
        let k = GraphonKernel::cosine();
        assert!(matches!(k.eval(1.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(k.eval(0.0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn constructors_validate_ranges() {
        assert!(GraphonKernel::constant(1.5).is_err());
        assert!(GraphonKernel::small_world(0.1, 0.7).is_err());
        assert!(GraphonKernel::circulant(vec![0.5, 0.5]).is_err());
        assert!(GraphonKernel::grid(2, vec![0.0, 0.1, 0.2, 0.0]).is_err());
    }

    #[test]
    fn band_edge_tie_is_jump_midpoint() {
        let sw = GraphonKernel::small_world(0.1, 0.25).unwrap();
        assert_eq!(sw.eval(0.0, 0.25).unwrap(), 0.5);
    }

    #[test]
    fn constant_two_by_two() {
        let m = sample_weight_matrix(&GraphonKernel::Constant(0.3), 2, GridScheme::Midpoint).unwrap();
        assert_eq!(m.entries(), &[0.3; 4]);
        assert_eq!(m.grid(), &[0.25, 0.75]);
    }

    #[test]
    fn cosine_left_endpoint_is_circulant() {
        let m = sample_weight_matrix(&GraphonKernel::cosine(), 4, GridScheme::LeftEndpoint).unwrap();
        let expected = [1.0, 0.0, -1.0, 0.0];
        for (a, b) in m.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let col = m.circulant_column().expect("circulant");
        for (a, b) in col.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_kernel_uses_nearest_cell() {
        let k = GraphonKernel::grid(2, vec![1.0, 0.2, 0.2, -0.5]).unwrap();
        assert_eq!(k.eval(0.1, 0.4).unwrap(), 1.0);
        assert_eq!(k.eval(0.1, 0.6).unwrap(), 0.2);
        assert_eq!(k.eval(1.0, 1.0).unwrap(), -0.5);
    }

    #[test]
    fn bernoulli_extremes() {
        let ones = sample_bernoulli_graph(&GraphonKernel::Constant(1.0), 3, GridScheme::Midpoint, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(ones.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        let zeros = sample_bernoulli_graph(&GraphonKernel::Constant(0.0), 3, GridScheme::Midpoint, 1).unwrap();
        assert!(zeros.entries().iter().all(|&v| v == 0.0));
        let neg = sample_bernoulli_graph(&GraphonKernel::Constant(-0.5), 3, GridScheme::Midpoint, 1);
        assert!(matches!(neg, Err(Error::Precondition(_))));
    }

    #[test]
    fn bernoulli_density_concentrates() {
        let n = 1000;
        let m = sample_bernoulli_graph(&GraphonKernel::Constant(0.5), n, GridScheme::Midpoint, 42).unwrap();
        let pairs = (n * (n - 1) / 2) as f64;
        let edges: f64 = m.entries().iter().sum::<f64>() / 2.0;
        let density = edges / pairs;
        let sd = (0.25 / pairs).sqrt();
        assert!((density - 0.5).abs() < 3.0 * sd);
    }

    #[test]
    fn midpoint_riemann_error_is_second_order() {
        let tests: [(fn(f64) -> f64, f64); 2] = [(|x| x * x, 1.0 / 3.0), (|x| x.powi(3), 0.25)];
        for (f, exact) in tests {
            let err = |n: usize| {
                let pts = GridScheme::Midpoint.points(n);
                (pts.iter().map(|&x| f(x)).sum::<f64>() / n as f64 - exact).abs()
            };
            let (e10, e100, e1000) = (err(10), err(100), err(1000));
            assert!((e10 / e100 - 100.0).abs() < 2.0, "{}", e10 / e100);
            assert!((e100 / e1000 - 100.0).abs() < 2.0, "{}", e100 / e1000);
        }
        // Linear and periodic integrands are integrated exactly by the midpoint sum.
        for n in [10, 100, 1000] {
            let pts = GridScheme::Midpoint.points(n);
            let lin = pts.iter().sum::<f64>() / n as f64;
            let per = pts.iter().map(|x| (std::f64::consts::TAU * x).sin()).sum::<f64>() / n as f64;
            assert!((lin - 0.5).abs() < 1e-14);
            assert!(per.abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_random_grid_is_sorted_and_seeded() {
        let a = GridScheme::UniformRandom(3).points(50);
        assert_eq!(a, GridScheme::UniformRandom(3).points(50));
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.iter().all(|&x| (0.0..1.0).contains(&x)));
    }
}

//! Uniform symmetric grids on the cube [-L, L]^3, nodal fields and the
//! discrete differential operators shared by every other module.
//!
//! Layout is row-major with x fastest: `idx = i + n*(j + n*k)`.

use crate::error::{Error, Result};

/// Uniform grid with an odd number of nodes per axis, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: usize,
    h: f64,
}

impl Grid3 {
    pub fn new(n: usize, h: f64) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::InvalidGrid(format!(
                "node count per axis must be odd and >= 3, got {n}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        Ok(Self { n, h })
    }

    /// Grid with `n` nodes per axis spanning [-l, l].
    pub fn with_half_extent(n: usize, l: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!("node count per axis must be >= 3, got {n}")));
        }
        Self::new(n, 2.0 * l / (n - 1) as f64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_extent(&self) -> f64 {
        self.h * (self.n - 1) as f64 / 2.0
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Coordinate of node `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - ((self.n - 1) / 2) as f64) * self.h
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    #[inline]
    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y, z] = self.position(idx);
        (x * x + y * y + z * z).sqrt()
    }

    /// Index of the node at -x.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        let [i, j, k] = self.ijk(idx);
        let m = self.n - 1;
        self.index(m - i, m - j, m - k)
    }

    pub fn strides(&self) -> [usize; 3] {
        [1, self.n, self.n * self.n]
    }

    pub(crate) fn check_same(&self, other: &Grid3) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: (self.n, self.h),
                found: (other.n, other.h),
            })
        }
    }
}

/// Nodal real values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid3) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid3, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_vec(grid: Grid3, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at every node position.
    pub fn from_fn(grid: Grid3, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.position(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Plain midpoint sum of the values times h^3.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Three nodal components on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid3,
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: Grid3) -> Self {
        let z = vec![0.0; grid.len()];
        Self { grid, comps: [z.clone(), z.clone(), z] }
    }

    pub fn from_components(grid: Grid3, comps: [Vec<f64>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid("component length does not match grid".into()));
        }
        Ok(Self { grid, comps })
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.position(idx));
            for c in 0..3 {
                out.comps[c][idx] = v[c];
            }
        }
        out
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn component_field(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.comps[c].clone() }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    /// Multiplies every component by the scalar field `s` nodewise.
    pub fn scaled_by(&self, s: &ScalarField) -> Self {
        let mut out = self.clone();
        for c in 0..3 {
            for (v, &w) in out.comps[c].iter_mut().zip(s.values()) {
                *v *= w;
            }
        }
        out
    }

    pub fn norm_sq(&self) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| {
                let v = self.at(i);
                v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
            })
            .collect();
        ScalarField { grid: self.grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum over nodes of |F| times h^3.
    pub fn l1_norm(&self) -> f64 {
        let h3 = self.grid.cell_volume();
        (0..self.grid.len())
            .map(|i| {
                let v = self.at(i);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .sum::<f64>()
            * h3
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }
}

/// Spatial weights used by the weighted norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// gamma(x) = 1/(1+|x|)
    Gamma,
    /// 1 + |x|
    GammaInverse,
    /// |x|^2
    SecondMoment,
    Unit,
}

impl Weight {
    #[inline]
    pub fn value(self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        match self {
            Weight::Gamma => 1.0 / (1.0 + r2.sqrt()),
            Weight::GammaInverse => 1.0 + r2.sqrt(),
            Weight::SecondMoment => r2,
            Weight::Unit => 1.0,
        }
    }
}

#[inline]
pub fn gamma(x: [f64; 3]) -> f64 {
    Weight::Gamma.value(x)
}

/// Midpoint rule: sum of f(x_i) w(x_i) h^3.
pub fn weighted_integral(f: &ScalarField, w: Weight) -> f64 {
    let g = f.grid();
    let s: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| v * w.value(g.position(idx)))
        .sum();
    s * g.cell_volume()
}

/// One-dimensional sparse rows of the derivative matrix.
type Rows = Vec<Vec<(usize, f64)>>;

fn derivative_rows(n: usize, h: f64) -> Rows {
    let inv = 1.0 / (2.0 * h);
    (0..n)
        .map(|p| {
            if p == 0 {
                vec![(0, -3.0 * inv), (1, 4.0 * inv), (2, -inv)]
            } else if p == n - 1 {
                vec![(n - 3, inv), (n - 2, -4.0 * inv), (n - 1, 3.0 * inv)]
            } else {
                vec![(p - 1, -inv), (p + 1, inv)]
            }
        })
        .collect()
}

fn transpose_rows(rows: &Rows) -> Rows {
    let mut t: Rows = vec![Vec::new(); rows.len()];
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            t[c].push((r, v));
        }
    }
    t
}

fn apply_axis(grid: &Grid3, values: &[f64], axis: usize, rows: &Rows, out: &mut [f64]) {
    let stride = grid.strides()[axis];
    for (idx, o) in out.iter_mut().enumerate() {
        let p = grid.ijk(idx)[axis];
        let base = idx - p * stride;
        let mut acc = 0.0;
        for &(q, c) in &rows[p] {
            acc += c * values[base + q * stride];
        }
        *o = acc;
    }
}

/// Centred second-order differences inside, one-sided second-order on faces.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    let (n, inv) = (g.n(), 0.5 / g.h());
    let v = f.values();
    let mut out = VectorField::zeros(g);
    // Differences are formed before scaling so constants give exact zeros
    // and the two faces are exact mirror images of each other.
    for axis in 0..3 {
        let stride = g.strides()[axis];
        for (idx, o) in out.comps[axis].iter_mut().enumerate() {
            let p = g.ijk(idx)[axis];
            let at = |q: usize| v[idx - p * stride + q * stride];
            *o = if p == 0 {
                inv * (4.0 * (at(1) - at(0)) - (at(2) - at(0)))
            } else if p == n - 1 {
                -inv * (4.0 * (at(n - 2) - at(n - 1)) - (at(n - 3) - at(n - 1)))
            } else {
                inv * (at(p + 1) - at(p - 1))
            };
        }
    }
    out
}

/// Transpose of [`gradient`]; `-gradient_adjoint` is the no-flux divergence.
pub fn gradient_adjoint(fv: &VectorField) -> ScalarField {
    let g = *fv.grid();
    let rows = transpose_rows(&derivative_rows(g.n(), g.h()));
    let mut out = vec![0.0; g.len()];
    let mut tmp = vec![0.0; g.len()];
    for axis in 0..3 {
        apply_axis(&g, &fv.comps[axis], axis, &rows, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
    ScalarField { grid: g, values: out }
}

/// Discrete divergence.
///
/// With `no_flux` the operator is minus the transpose of [`gradient`], so
/// sum(div F * phi) = -sum(F . grad phi) holds exactly and the discrete
/// integral of div F vanishes. Without it, each component is differentiated
/// with the gradient stencils.
pub fn divergence(fv: &VectorField, no_flux: bool) -> ScalarField {
    if no_flux {
        return gradient_adjoint(fv).map(|v| -v);
    }
    let g = *fv.grid();
    let rows = derivative_rows(g.n(), g.h());
    let mut out = vec![0.0; g.len()];
    let mut tmp = vec![0.0; g.len()];
    for axis in 0..3 {
        apply_axis(&g, &fv.comps[axis], axis, &rows, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += t;
        }
    }
    ScalarField { grid: g, values: out }
}

/// Diagonal of grad^T diag(c) grad, used as a Jacobi preconditioner.
pub(crate) fn weighted_laplacian_diagonal(c: &ScalarField) -> Vec<f64> {
    let g = *c.grid();
    let rows = derivative_rows(g.n(), g.h());
    let mut diag = vec![0.0; g.len()];
    for axis in 0..3 {
        let stride = g.strides()[axis];
        for idx in 0..g.len() {
            let p = g.ijk(idx)[axis];
            let base = idx - p * stride;
            for &(q, coef) in &rows[p] {
                diag[base + q * stride] += c.values()[idx] * coef * coef;
            }
        }
    }
    diag
}

/// g(x) = (f(x) + f(-x))/2, exactly even.
pub fn symmetrize_even(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let v = f.values();
    let values = (0..g.len()).map(|i| 0.5 * (v[i] + v[g.mirror(i)])).collect();
    ScalarField { grid: g, values }
}

/// max over nodes of |f(x) - f(-x)|.
pub fn parity_defect(f: &ScalarField) -> f64 {
    let g = f.grid();
    let v = f.values();
    (0..g.len()).fold(0.0, |m, i| m.max((v[i] - v[g.mirror(i)]).abs()))
}

/// max over nodes of |F(x) + F(-x)|, the defect of F being odd.
pub fn odd_parity_defect(fv: &VectorField) -> f64 {
    let g = fv.grid();
    let mut m: f64 = 0.0;
    for c in 0..3 {
        let v = fv.component(c);
        for i in 0..g.len() {
            m = m.max((v[i] + v[g.mirror(i)]).abs());
        }
    }
    m
}

/// h^3-weighted inner product.
pub(crate) fn dot(a: &[f64], b: &[f64], h3: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * h3
}

//! Periodic m-torus grids, multi-index lattice fields, centered finite
//! differences and deterministic reductions.
//!
//! Fields store one contiguous block of components per node, nodes in
//! lexicographic order with the last axis fastest. Antisymmetric index pairs
//! are stored packed (`i < j` only); the signed accessors return `-v` for the
//! swapped order and `0` on the diagonal.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Minimum number of nodes per axis.
pub const MIN_NODES: usize = 4;

/// Periodic rectangular grid on the m-torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    /// `m` axes with `n` nodes each and the default spacing `2π/n`.
    pub fn cubic(m: usize, n: usize) -> Result<Grid> {
        Grid::new(vec![n; m])
    }

    /// Per-axis node counts, spacing `2π/N_d` on each axis.
    pub fn new(dims: Vec<usize>) -> Result<Grid> {
        let spacing = dims.iter().map(|&n| 2.0 * PI / n as f64).collect();
        Grid::with_spacing(dims, spacing)
    }

    pub fn with_spacing(dims: Vec<usize>, spacing: Vec<f64>) -> Result<Grid> {
        let m = dims.len();
        if !(2..=4).contains(&m) {
            return Err(Error::InvalidGrid(format!("base dimension must be 2..=4, got {m}")));
        }
        if spacing.len() != m {
            return Err(Error::InvalidGrid("one spacing per axis required".into()));
        }
        if let Some(&n) = dims.iter().find(|&&n| n < MIN_NODES) {
            return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes per axis, got {n}")));
        }
        if spacing.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
            return Err(Error::InvalidGrid("spacing must be positive and finite".into()));
        }
        let mut strides = vec![1; m];
        for d in (0..m - 1).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }
        Ok(Grid {
            dims,
            spacing,
            strides,
        })
    }

    /// Base dimension `m`.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Quadrature weight `∏ h_d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Same domain with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::with_spacing(
            self.dims.iter().map(|n| n * factor).collect(),
            self.spacing.iter().map(|h| h / factor as f64).collect(),
        )
    }

    pub fn multi_index(&self, node: usize, out: &mut [usize]) {
        let mut rest = node;
        for d in 0..self.dim() {
            out[d] = rest / self.strides[d];
            rest %= self.strides[d];
        }
    }

    pub fn coords(&self, node: usize, out: &mut [f64]) {
        let mut rest = node;
        for d in 0..self.dim() {
            let i = rest / self.strides[d];
            rest %= self.strides[d];
            out[d] = i as f64 * self.spacing[d];
        }
    }

    /// Neighbour of `node` shifted by `offset` along `axis`, wrapping periodically.
    #[inline]
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let n = self.dims[axis] as isize;
        let stride = self.strides[axis];
        let i = ((node / stride) % self.dims[axis]) as isize;
        let j = (i + offset).rem_euclid(n);
        (node as isize + (j - i) * stride as isize) as usize
    }
}

/// One index slot of a component shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Ordinary index with the given range.
    Index(usize),
    /// Antisymmetric pair over the given range, stored packed `i < j`.
    Pair(usize),
}

impl Slot {
    fn len(self) -> usize {
        match self {
            Slot::Index(n) => n,
            Slot::Pair(n) => n * n.saturating_sub(1) / 2,
        }
    }

    fn arity(self) -> usize {
        match self {
            Slot::Index(_) => 1,
            Slot::Pair(_) => 2,
        }
    }
}

/// Number of packed pairs `i < j` over `n` values.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Packed position of the pair `(i, j)` with `i < j < n`.
#[inline]
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Packed position and sign for an arbitrary ordered pair; `None` on the diagonal.
#[inline]
pub fn signed_pair(i: usize, j: usize, n: usize) -> Option<(usize, f64)> {
    match i.cmp(&j) {
        std::cmp::Ordering::Less => Some((pair_index(i, j, n), 1.0)),
        std::cmp::Ordering::Greater => Some((pair_index(j, i, n), -1.0)),
        std::cmp::Ordering::Equal => None,
    }
}

/// All pairs `i < j` in packed order.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// Ordered list of index slots describing the components stored per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    slots: Vec<Slot>,
    strides: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(slots: Vec<Slot>) -> Shape {
        let mut strides = vec![1; slots.len()];
        for s in (0..slots.len().saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * slots[s + 1].len();
        }
        let len = slots.iter().map(|s| s.len()).product();
        Shape {
            slots,
            strides,
            len,
        }
    }

    pub fn scalar() -> Shape {
        Shape::new(Vec::new())
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Components per node.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of raw indices accepted by [`Shape::offset`].
    pub fn arity(&self) -> usize {
        self.slots.iter().map(|s| s.arity()).sum()
    }

    /// Component offset and sign for a full (unpacked) index tuple.
    pub fn offset(&self, idx: &[usize]) -> Option<(usize, f64)> {
        debug_assert_eq!(idx.len(), self.arity());
        let mut off = 0;
        let mut sign = 1.0;
        let mut k = 0;
        for (s, slot) in self.slots.iter().enumerate() {
            match *slot {
                Slot::Index(n) => {
                    debug_assert!(idx[k] < n);
                    off += idx[k] * self.strides[s];
                    k += 1;
                }
                Slot::Pair(n) => {
                    let (p, sg) = signed_pair(idx[k], idx[k + 1], n)?;
                    off += p * self.strides[s];
                    sign *= sg;
                    k += 2;
                }
            }
        }
        Some((off, sign))
    }
}

/// Real-valued field on a grid with a fixed component shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    grid: Grid,
    shape: Shape,
    data: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(grid: &Grid, shape: Shape) -> LatticeField {
        let data = vec![0.0; grid.node_count() * shape.len()];
        LatticeField {
            grid: grid.clone(),
            shape,
            data,
        }
    }

    pub fn from_data(grid: &Grid, shape: Shape, data: Vec<f64>) -> Result<LatticeField> {
        if data.len() != grid.node_count() * shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.node_count() * shape.len(),
                data.len()
            )));
        }
        Ok(LatticeField {
            grid: grid.clone(),
            shape,
            data,
        })
    }

    /// Fill each node's component block from its index. Evaluated in parallel.
    pub fn from_node_fn<F>(grid: &Grid, shape: Shape, f: F) -> LatticeField
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let mut out = LatticeField::zeros(grid, shape);
        out.fill_nodes(f);
        out
    }

    /// Fill each node's component block from its coordinates.
    pub fn from_coord_fn<F>(grid: &Grid, shape: Shape, f: F) -> LatticeField
    where
        F: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let g = grid.clone();
        LatticeField::from_node_fn(grid, shape, move |node, out| {
            let mut x = [0.0; 4];
            g.coords(node, &mut x[..g.dim()]);
            f(&x[..g.dim()], out)
        })
    }

    pub fn fill_nodes<F>(&mut self, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let ncomp = self.shape.len();
        if ncomp == 0 {
            return;
        }
        self.data
            .par_chunks_mut(ncomp)
            .enumerate()
            .for_each(|(node, block)| f(node, block));
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Component block of one node.
    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[node * n..(node + 1) * n]
    }

    #[inline]
    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        let n = self.shape.len();
        &mut self.data[node * n..(node + 1) * n]
    }

    /// Signed component lookup with unpacked indices.
    pub fn get(&self, node: usize, idx: &[usize]) -> f64 {
        match self.shape.offset(idx) {
            Some((off, sign)) => sign * self.at(node)[off],
            None => 0.0,
        }
    }

    /// Store `value` at unpacked indices; the swapped pair order stores `-value`.
    /// Writes to a diagonal pair are rejected.
    pub fn set(&mut self, node: usize, idx: &[usize], value: f64) -> Result<()> {
        let (off, sign) = self
            .shape
            .offset(idx)
            .ok_or_else(|| Error::InvalidArgument("diagonal slot of an antisymmetric pair".into()))?;
        self.at_mut(node)[off] = sign * value;
        Ok(())
    }

    pub fn same_layout(&self, other: &LatticeField) -> bool {
        self.grid == other.grid && self.shape == other.shape
    }

    fn check_layout(&self, other: &LatticeField) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("fields differ in grid or component shape".into()))
        }
    }

    pub fn add(&self, other: &LatticeField) -> Result<LatticeField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &LatticeField) -> Result<LatticeField> {
        self.axpy(-1.0, other)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &LatticeField) -> Result<LatticeField> {
        self.check_layout(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(LatticeField {
            grid: self.grid.clone(),
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn scale(&self, alpha: f64) -> LatticeField {
        LatticeField {
            grid: self.grid.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// Packed inner product `Σ_nodes Σ_components a b` (no quadrature weight).
    pub fn dot(&self, other: &LatticeField) -> Result<f64> {
        self.check_layout(other)?;
        Ok(ordered_sum(self.data.iter().zip(&other.data).map(|(a, b)| a * b)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Centered finite-difference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Order2,
    Order4,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::Order2 => 2,
            Scheme::Order4 => 4,
        }
    }
}

impl Scheme {
    /// Stencil offsets and weights for unit spacing; divide by `h` to apply.
    pub fn stencil(self) -> &'static [(isize, f64)] {
        match self {
            Scheme::Order2 => &[(-1, -0.5), (1, 0.5)],
            Scheme::Order4 => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        }
    }
}

/// Centered periodic derivative along `axis`, applied componentwise.
pub fn partial(f: &LatticeField, axis: usize, scheme: Scheme) -> LatticeField {
    assert!(axis < f.grid.dim(), "axis {axis} out of range");
    let grid = &f.grid;
    let h = grid.spacing[axis];
    let ncomp = f.shape.len();
    LatticeField::from_node_fn(grid, f.shape.clone(), |node, out| {
        let p1 = f.at(grid.shift(node, axis, 1));
        let m1 = f.at(grid.shift(node, axis, -1));
        match scheme {
            Scheme::Order2 => {
                let w = 1.0 / (2.0 * h);
                for c in 0..ncomp {
                    out[c] = (p1[c] - m1[c]) * w;
                }
            }
            Scheme::Order4 => {
                let p2 = f.at(grid.shift(node, axis, 2));
                let m2 = f.at(grid.shift(node, axis, -2));
                let w = 1.0 / (12.0 * h);
                for c in 0..ncomp {
                    out[c] = (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) * w;
                }
            }
        }
    })
}

/// Derivatives along every axis, `out[k] = ∂_k f`.
pub fn gradient(f: &LatticeField, scheme: Scheme) -> Vec<LatticeField> {
    (0..f.grid.dim()).map(|k| partial(f, k, scheme)).collect()
}

/// Reduction applied over all nodes and components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    MaxAbs,
    /// `sqrt(Σ f² ∏h)`
    L2,
    Mean,
}

/// Deterministic reduction in lexicographic node order.
pub fn reduce(f: &LatticeField, p: Norm) -> f64 {
    match p {
        Norm::MaxAbs => f.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Norm::L2 => (ordered_sum(f.data.iter().map(|v| v * v)) * f.grid.cell_volume()).sqrt(),
        Norm::Mean => {
            if f.data.is_empty() {
                0.0
            } else {
                ordered_sum(f.data.iter().copied()) / f.data.len() as f64
            }
        }
    }
}

/// Compensated (Neumaier) sum in iteration order.
pub fn ordered_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Node-sum quadrature `∏h Σ_nodes f` of a scalar field.
pub fn integrate(f: &LatticeField) -> f64 {
    ordered_sum(f.data.iter().copied()) * f.grid.cell_volume()
}

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    k: Vec<i32>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

/// Real trigonometric polynomial with `ncomp` components on the m-torus,
/// evaluable (with exact derivatives) at arbitrary points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    m: usize,
    ncomp: usize,
    modes: Vec<Mode>,
}

impl TrigPolynomial {
    /// Random band-limited polynomial with modes `max_d |k_d| ≤ kmax`.
    ///
    /// Coefficients are `amplitude · U(-1, 1) / (1 + |k|²)` from a ChaCha8
    /// stream seeded by `seed`, so the result is reproducible across platforms.
    pub fn random(m: usize, ncomp: usize, seed: u64, kmax: u32, amplitude: f64) -> TrigPolynomial {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kmax = kmax as i32;
        let mut modes = Vec::new();
        let mut k = vec![-kmax; m];
        loop {
            // keep one representative of each ±k pair: first nonzero entry positive
            let first = k.iter().find(|&&v| v != 0).copied();
            if first.is_none_or(|v| v > 0) {
                let k2: i32 = k.iter().map(|v| v * v).sum();
                let weight = amplitude / (1.0 + k2 as f64);
                let cos = (0..ncomp).map(|_| weight * rng.gen_range(-1.0..1.0)).collect();
                let sin = (0..ncomp)
                    .map(|_| if first.is_none() { 0.0 } else { weight * rng.gen_range(-1.0..1.0) })
                    .collect();
                modes.push(Mode { k: k.clone(), cos, sin });
            }
            // odometer increment
            let mut d = m;
            loop {
                if d == 0 {
                    return TrigPolynomial { m, ncomp, modes };
                }
                d -= 1;
                if k[d] < kmax {
                    k[d] += 1;
                    break;
                }
                k[d] = -kmax;
            }
        }
    }

    /// Single mode `Σ_c coef[c] sin(k·x + phase)` helper, mostly for tests.
    pub fn single_mode(k: Vec<i32>, cos: Vec<f64>, sin: Vec<f64>) -> TrigPolynomial {
        let ncomp = cos.len();
        assert_eq!(sin.len(), ncomp);
        TrigPolynomial {
            m: k.len(),
            ncomp,
            modes: vec![Mode { k, cos, sin }],
        }
    }

    /// Sum of two polynomials with the same dimensions.
    pub fn plus(&self, other: &TrigPolynomial) -> TrigPolynomial {
        assert_eq!((self.m, self.ncomp), (other.m, other.ncomp));
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        TrigPolynomial {
            m: self.m,
            ncomp: self.ncomp,
            modes,
        }
    }

    pub fn scaled(&self, alpha: f64) -> TrigPolynomial {
        let modes = self
            .modes
            .iter()
            .map(|md| Mode {
                k: md.k.clone(),
                cos: md.cos.iter().map(|v| alpha * v).collect(),
                sin: md.sin.iter().map(|v| alpha * v).collect(),
            })
            .collect();
        TrigPolynomial {
            m: self.m,
            ncomp: self.ncomp,
            modes,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> usize {
        self.ncomp
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[..self.ncomp].iter_mut().for_each(|v| *v = 0.0);
        for md in &self.modes {
            let phase: f64 = md.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
            let (s, c) = phase.sin_cos();
            for comp in 0..self.ncomp {
                out[comp] += md.cos[comp] * c + md.sin[comp] * s;
            }
        }
    }

    /// Exact partial derivatives, `out[j * ncomp + c] = ∂_j f^c`.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[..self.m * self.ncomp].iter_mut().for_each(|v| *v = 0.0);
        for md in &self.modes {
            let phase: f64 = md.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
            let (s, c) = phase.sin_cos();
            for j in 0..self.m {
                let kj = md.k[j] as f64;
                if kj == 0.0 {
                    continue;
                }
                for comp in 0..self.ncomp {
                    out[j * self.ncomp + comp] += kj * (md.sin[comp] * c - md.cos[comp] * s);
                }
            }
        }
    }

    /// Sample on a grid into a field whose shape has exactly `ncomp` components.
    pub fn sample(&self, grid: &Grid, shape: Shape) -> Result<LatticeField> {
        if shape.len() != self.ncomp || grid.dim() != self.m {
            return Err(Error::ShapeMismatch(format!(
                "polynomial has {} components in {} dims; shape needs {} in {}",
                self.ncomp,
                self.m,
                shape.len(),
                grid.dim()
            )));
        }
        Ok(LatticeField::from_coord_fn(grid, shape, |x, out| self.eval(x, out)))
    }
}

/// Seeded band-limited random field; every packed component is independent.
pub fn random_smooth(
    grid: &Grid,
    shape: Shape,
    seed: u64,
    kmax: u32,
    amplitude: f64,
) -> Result<LatticeField> {
    if let Some(&n) = grid.dims().iter().find(|&&n| (kmax as usize) * 4 > n) {
        return Err(Error::InvalidArgument(format!(
            "kmax = {kmax} exceeds N/4 on an axis with N = {n}"
        )));
    }
    TrigPolynomial::random(grid.dim(), shape.len(), seed, kmax, amplitude).sample(grid, shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_from(grid: &Grid, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> LatticeField {
        LatticeField::from_coord_fn(grid, Shape::scalar(), move |x, out| out[0] = f(x))
    }

    #[test]
    fn pair_packing_round_trip() {
        for n in 2..5 {
            let all = pairs(n);
            assert_eq!(all.len(), pair_count(n));
            for (p, &(i, j)) in all.iter().enumerate() {
                assert_eq!(pair_index(i, j, n), p);
                assert_eq!(signed_pair(j, i, n), Some((p, -1.0)));
            }
            assert_eq!(signed_pair(1, 1, n), None);
        }
    }

    #[test]
    fn antisymmetric_accessor_signs() {
        let grid = Grid::cubic(3, 4).unwrap();
        let mut f = LatticeField::zeros(&grid, Shape::new(vec![Slot::Index(2), Slot::Pair(3)]));
        assert_eq!(f.shape().len(), 6);
        f.set(5, &[1, 2, 0], 3.0).unwrap();
        assert_eq!(f.get(5, &[1, 2, 0]), 3.0);
        assert_eq!(f.get(5, &[1, 0, 2]), -3.0);
        assert_eq!(f.get(5, &[1, 1, 1]), 0.0);
        assert!(f.set(5, &[0, 2, 2], 1.0).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::cubic(1, 8).is_err());
        assert!(Grid::cubic(5, 8).is_err());
        assert!(Grid::cubic(3, 3).is_err());
        assert!(Grid::with_spacing(vec![4, 4], vec![1.0, -1.0]).is_err());
        let g = Grid::cubic(3, 8).unwrap();
        assert_eq!(g.node_count(), 512);
        assert!((g.cell_volume() - (2.0 * PI / 8.0).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn shift_wraps() {
        let g = Grid::new(vec![4, 5, 6]).unwrap();
        let mut idx = [0; 3];
        for node in 0..g.node_count() {
            for axis in 0..3 {
                for off in [-2isize, -1, 1, 2] {
                    let s = g.shift(node, axis, off);
                    g.multi_index(node, &mut idx);
                    let mut sidx = [0; 3];
                    g.multi_index(s, &mut sidx);
                    for d in 0..3 {
                        let expect = if d == axis {
                            (idx[d] as isize + off).rem_euclid(g.dims()[d] as isize) as usize
                        } else {
                            idx[d]
                        };
                        assert_eq!(sidx[d], expect);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_field_has_zero_derivative() {
        let g = Grid::cubic(3, 8).unwrap();
        let f = scalar_from(&g, |_| 2.5);
        for scheme in [Scheme::Order2, Scheme::Order4] {
            for axis in 0..3 {
                assert_eq!(reduce(&partial(&f, axis, scheme), Norm::MaxAbs), 0.0);
            }
        }
    }

    #[test]
    fn centered_difference_error_bound() {
        let g = Grid::cubic(3, 32).unwrap();
        let h = g.spacing()[0];
        let f = scalar_from(&g, |x| x[0].sin());
        let exact = scalar_from(&g, |x| x[0].cos());
        let err = reduce(&partial(&f, 0, Scheme::Order2).sub(&exact).unwrap(), Norm::MaxAbs);
        assert!(err <= h * h / 6.0 * 1.01, "err {err}");
    }

    fn slope(e_coarse: f64, e_fine: f64) -> f64 {
        (e_coarse / e_fine).log2()
    }

    #[test]
    fn convergence_orders_on_a_single_mode() {
        for (scheme, expect, tol) in [(Scheme::Order2, 2.0, 0.1), (Scheme::Order4, 4.0, 0.2)] {
            let err = |n: usize| {
                let g = Grid::cubic(3, n).unwrap();
                let f = scalar_from(&g, |x| (2.0 * x[1]).sin());
                let exact = scalar_from(&g, |x| 2.0 * (2.0 * x[1]).cos());
                reduce(&partial(&f, 1, scheme).sub(&exact).unwrap(), Norm::MaxAbs)
            };
            let s = slope(err(16), err(32));
            assert!((s - expect).abs() <= tol, "{scheme:?}: slope {s}");
        }
    }

    #[test]
    fn random_smooth_convergence() {
        let err = |n: usize| {
            let g = Grid::cubic(3, n).unwrap();
            let poly = TrigPolynomial::random(3, 1, 7, 2, 1.0);
            let f = poly.sample(&g, Shape::scalar()).unwrap();
            let exact = LatticeField::from_coord_fn(&g, Shape::scalar(), |x, out| {
                let mut gr = [0.0; 3];
                poly.gradient(x, &mut gr);
                out[0] = gr[0];
            });
            reduce(&partial(&f, 0, Scheme::Order2).sub(&exact).unwrap(), Norm::MaxAbs)
        };
        let s = slope(err(16), err(32));
        assert!((s - 2.0).abs() <= 0.1, "slope {s}");
    }

    #[test]
    fn second_difference_stencil_identity() {
        let g = Grid::new(vec![8, 10, 12]).unwrap();
        let f = random_smooth(&g, Shape::scalar(), 3, 2, 1.0).unwrap();
        for axis in 0..3 {
            let h = g.spacing()[axis];
            let dd = partial(&partial(&f, axis, Scheme::Order2), axis, Scheme::Order2);
            let wide = LatticeField::from_node_fn(&g, Shape::scalar(), |node, out| {
                let p = f.at(g.shift(node, axis, 2))[0];
                let m = f.at(g.shift(node, axis, -2))[0];
                out[0] = (p - 2.0 * f.at(node)[0] + m) / (4.0 * h * h);
            });
            assert!(reduce(&dd.sub(&wide).unwrap(), Norm::MaxAbs) <= 1e-13);
        }
    }

    #[test]
    fn partial_commutes_with_component_permutation() {
        let g = Grid::cubic(2, 8).unwrap();
        let shape = Shape::new(vec![Slot::Index(2), Slot::Index(3)]);
        let f = random_smooth(&g, shape.clone(), 11, 1, 1.0).unwrap();
        // transpose the component block: (a, b) -> (b, a)
        let tshape = Shape::new(vec![Slot::Index(3), Slot::Index(2)]);
        let transpose = |src: &LatticeField| {
            LatticeField::from_node_fn(&g, tshape.clone(), |node, out| {
                for a in 0..2 {
                    for b in 0..3 {
                        out[b * 2 + a] = src.at(node)[a * 3 + b];
                    }
                }
            })
        };
        for scheme in [Scheme::Order2, Scheme::Order4] {
            let lhs = partial(&transpose(&f), 1, scheme);
            let rhs = transpose(&partial(&f, 1, scheme));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn reductions() {
        let g = Grid::cubic(3, 8).unwrap();
        let zero = LatticeField::zeros(&g, Shape::scalar());
        for p in [Norm::MaxAbs, Norm::L2, Norm::Mean] {
            assert_eq!(reduce(&zero, p), 0.0);
        }
        let mut one = zero.clone();
        one.at_mut(17)[0] = -3.0;
        assert_eq!(reduce(&one, Norm::MaxAbs), 3.0);

        let two = scalar_from(&g, |_| 2.0);
        let expect = 2.0 * (2.0 * PI).powf(1.5);
        assert!((reduce(&two, Norm::L2) - expect).abs() <= 1e-12 * expect);
        assert!((reduce(&two, Norm::Mean) - 2.0).abs() <= 1e-15);
    }

    #[test]
    fn reductions_are_order_independent() {
        let g = Grid::cubic(3, 8).unwrap();
        let f = random_smooth(&g, Shape::new(vec![Slot::Index(2)]), 5, 2, 3.0).unwrap();
        let mut reversed = f.data().to_vec();
        reversed.reverse();
        let r = LatticeField::from_data(&g, f.shape().clone(), reversed).unwrap();
        assert_eq!(reduce(&f, Norm::MaxAbs), reduce(&r, Norm::MaxAbs));
        for p in [Norm::L2, Norm::Mean] {
            let (a, b) = (reduce(&f, p), reduce(&r, p));
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn random_smooth_properties() {
        let g = Grid::cubic(3, 8).unwrap();
        let shape = Shape::new(vec![Slot::Index(3)]);
        let z = random_smooth(&g, shape.clone(), 1, 2, 0.0).unwrap();
        assert_eq!(reduce(&z, Norm::MaxAbs), 0.0);
        let a = random_smooth(&g, shape.clone(), 9, 2, 1.0).unwrap();
        let b = random_smooth(&g, shape.clone(), 9, 2, 1.0).unwrap();
        assert_eq!(a, b);
        let c = random_smooth(&g, shape.clone(), 10, 2, 1.0).unwrap();
        assert_ne!(a, c);
        assert!(random_smooth(&g, shape, 1, 3, 1.0).is_err());
    }

    #[test]
    fn trig_gradient_matches_finite_difference() {
        let p = TrigPolynomial::random(3, 2, 4, 2, 1.0);
        let x = [0.3, 1.1, -0.7];
        let mut g = [0.0; 6];
        p.gradient(&x, &mut g);
        let eps = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += eps;
            xm[j] -= eps;
            let (mut fp, mut fm) = ([0.0; 2], [0.0; 2]);
            p.eval(&xp, &mut fp);
            p.eval(&xm, &mut fm);
            for c in 0..2 {
                let fd = (fp[c] - fm[c]) / (2.0 * eps);
                assert!((fd - g[j * 2 + c]).abs() < 1e-8);
            }
        }
    }
}

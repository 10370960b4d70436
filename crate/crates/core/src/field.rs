use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Real-valued samples of a periodic scalar (1-component) or vector
/// (3-component) field on the grid, row-major over (x1, x2, x3) with x3
/// fastest. Component blocks are stored contiguously: all of component 0,
/// then component 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicVectorField {
    grid: GridSpec,
    components: usize,
    data: Vec<f64>,
}

impl PeriodicVectorField {
    /// Zero field with the given number of components (1 or 3).
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        assert!(
            components == 1 || components == 3,
            "fields carry 1 or 3 components, got {components}"
        );
        Self {
            grid,
            components,
            data: vec![0.0; components * grid.len()],
        }
    }

    /// Wraps existing samples, validating shape and finiteness.
    pub fn from_data(grid: GridSpec, components: usize, data: Vec<f64>) -> Result<Self> {
        let expected = components * grid.len();
        if data.len() != expected || !(components == 1 || components == 3) {
            return Err(Error::BadFieldShape {
                got: data.len(),
                expected,
                components,
                n: grid.n(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self {
            grid,
            components,
            data,
        })
    }

    /// Builds a field by evaluating `f(x)` at every sample point; `f` returns
    /// one value per component.
    pub fn from_fn<const C: usize>(grid: GridSpec, f: impl Fn([f64; 3]) -> [f64; C]) -> Self {
        assert!(C == 1 || C == 3);
        let n = grid.n();
        let mut field = Self::zeros(grid, C);
        for i1 in 0..n {
            for i2 in 0..n {
                for i3 in 0..n {
                    let v = f(grid.point(i1, i2, i3));
                    let idx = grid.idx(i1, i2, i3);
                    for (c, val) in v.iter().enumerate() {
                        field.data[c * grid.len() + idx] = *val;
                    }
                }
            }
        }
        field
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    /// All samples of one component.
    #[inline]
    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let len = self.grid.len();
        &mut self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Value of component `c` at integer grid coordinates.
    #[inline]
    pub fn at(&self, c: usize, i1: usize, i2: usize, i3: usize) -> f64 {
        self.data[c * self.grid.len() + self.grid.idx(i1, i2, i3)]
    }

    /// Grid average per component (equals the k = 0 Fourier coefficient).
    pub fn mean(&self) -> Vec<f64> {
        let len = self.grid.len() as f64;
        (0..self.components)
            .map(|c| self.component(c).iter().sum::<f64>() / len)
            .collect()
    }

    /// Subtracts the mean from every component.
    pub fn remove_mean(&mut self) {
        let means = self.mean();
        for (c, m) in means.iter().enumerate() {
            for v in self.component_mut(c) {
                *v -= m;
            }
        }
    }

    /// Largest absolute sample over all components.
    pub fn sup_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise Euclidean magnitude, as a scalar field.
    pub fn magnitude(&self) -> PeriodicVectorField {
        let len = self.grid.len();
        let mut out = PeriodicVectorField::zeros(self.grid, 1);
        for i in 0..len {
            let mut s = 0.0;
            for c in 0..self.components {
                let v = self.data[c * len + i];
                s += v * v;
            }
            out.data[i] = s.sqrt();
        }
        out
    }

    /// max over points of the pointwise Euclidean norm across components.
    pub fn sup_norm(&self) -> f64 {
        let len = self.grid.len();
        let mut best = 0.0_f64;
        for i in 0..len {
            let mut s = 0.0;
            for c in 0..self.components {
                let v = self.data[c * len + i];
                s += v * v;
            }
            best = best.max(s);
        }
        best.sqrt()
    }

    /// Largest pointwise Euclidean norm of the difference field.
    pub fn sup_norm_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.components, other.components);
        assert_eq!(self.grid, other.grid);
        let len = self.grid.len();
        let mut best = 0.0_f64;
        for i in 0..len {
            let mut s = 0.0;
            for c in 0..self.components {
                let d = self.data[c * len + i] - other.data[c * len + i];
                s += d * d;
            }
            best = best.max(s);
        }
        best.sqrt()
    }

    /// Largest absolute difference with another field of identical shape.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.components, other.components);
        assert_eq!(self.grid, other.grid);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Trilinear interpolation of every component at a point given in torus
    /// coordinates (any real values; wrapped internally).
    pub fn interpolate(&self, x: [f64; 3]) -> [f64; 3] {
        debug_assert!(self.components <= 3);
        let n = self.grid.n();
        let nf = n as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..3 {
            let u = (x[d] - x[d].floor()) * nf;
            // Guard the u == n edge case produced by rounding.
            let i = (u as usize).min(n - 1);
            base[d] = i;
            frac[d] = u - i as f64;
        }
        let nxt = |i: usize| if i + 1 == n { 0 } else { i + 1 };
        let (i1, i2, i3) = (base[0], base[1], base[2]);
        let (j1, j2, j3) = (nxt(i1), nxt(i2), nxt(i3));
        let (f1, f2, f3) = (frac[0], frac[1], frac[2]);
        let corners = [
            (self.grid.idx(i1, i2, i3), (1.0 - f1) * (1.0 - f2) * (1.0 - f3)),
            (self.grid.idx(i1, i2, j3), (1.0 - f1) * (1.0 - f2) * f3),
            (self.grid.idx(i1, j2, i3), (1.0 - f1) * f2 * (1.0 - f3)),
            (self.grid.idx(i1, j2, j3), (1.0 - f1) * f2 * f3),
            (self.grid.idx(j1, i2, i3), f1 * (1.0 - f2) * (1.0 - f3)),
            (self.grid.idx(j1, i2, j3), f1 * (1.0 - f2) * f3),
            (self.grid.idx(j1, j2, i3), f1 * f2 * (1.0 - f3)),
            (self.grid.idx(j1, j2, j3), f1 * f2 * f3),
        ];
        let len = self.grid.len();
        let mut out = [0.0f64; 3];
        for c in 0..self.components {
            let block = &self.data[c * len..(c + 1) * len];
            let mut acc = 0.0;
            for (idx, wgt) in corners {
                acc += wgt * block[idx];
            }
            out[c] = acc;
        }
        out
    }
}

/// 3x3 tensor samples on the grid, stored as 9 component blocks in row-major
/// entry order (0,0), (0,1), ..., (2,2). Entry (i,j) of the total derivative
/// holds d b^i / d x^j.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![0.0; 9 * grid.len()],
        }
    }

    pub fn from_data(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        let expected = 9 * grid.len();
        if data.len() != expected {
            return Err(Error::BadFieldShape {
                got: data.len(),
                expected,
                components: 9,
                n: grid.n(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { grid, data })
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// All samples of entry (i, j).
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        let len = self.grid.len();
        let c = 3 * i + j;
        &self.data[c * len..(c + 1) * len]
    }

    #[inline]
    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let len = self.grid.len();
        let c = 3 * i + j;
        &mut self.data[c * len..(c + 1) * len]
    }

    /// Trace as a scalar field; equals the divergence when the tensor is a
    /// total derivative.
    pub fn trace(&self) -> PeriodicVectorField {
        let mut out = PeriodicVectorField::zeros(self.grid, 1);
        for i in 0..3 {
            let block = self.entry(i, i);
            for (o, v) in out.component_mut(0).iter_mut().zip(block) {
                *o += v;
            }
        }
        out
    }

    /// Largest pointwise Hilbert-Schmidt norm sqrt(sum_ij A_ij^2).
    pub fn sup_hs_norm(&self) -> f64 {
        let len = self.grid.len();
        let mut best = 0.0_f64;
        for p in 0..len {
            let mut s = 0.0;
            for c in 0..9 {
                let v = self.data[c * len + p];
                s += v * v;
            }
            best = best.max(s);
        }
        best.sqrt()
    }

    /// Trilinear interpolation of the full 3x3 matrix at a torus point.
    pub fn interpolate(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let n = self.grid.n();
        let nf = n as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..3 {
            let u = (x[d] - x[d].floor()) * nf;
            let i = (u as usize).min(n - 1);
            base[d] = i;
            frac[d] = u - i as f64;
        }
        let nxt = |i: usize| if i + 1 == n { 0 } else { i + 1 };
        let (i1, i2, i3) = (base[0], base[1], base[2]);
        let (j1, j2, j3) = (nxt(i1), nxt(i2), nxt(i3));
        let (f1, f2, f3) = (frac[0], frac[1], frac[2]);
        let corners = [
            (self.grid.idx(i1, i2, i3), (1.0 - f1) * (1.0 - f2) * (1.0 - f3)),
            (self.grid.idx(i1, i2, j3), (1.0 - f1) * (1.0 - f2) * f3),
            (self.grid.idx(i1, j2, i3), (1.0 - f1) * f2 * (1.0 - f3)),
            (self.grid.idx(i1, j2, j3), (1.0 - f1) * f2 * f3),
            (self.grid.idx(j1, i2, i3), f1 * (1.0 - f2) * (1.0 - f3)),
            (self.grid.idx(j1, i2, j3), f1 * (1.0 - f2) * f3),
            (self.grid.idx(j1, j2, i3), f1 * f2 * (1.0 - f3)),
            (self.grid.idx(j1, j2, j3), f1 * f2 * f3),
        ];
        let len = self.grid.len();
        let mut out = [[0.0f64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let block = &self.data[(3 * i + j) * len..(3 * i + j + 1) * len];
                let mut acc = 0.0;
                for (idx, wgt) in corners {
                    acc += wgt * block[idx];
                }
                out[i][j] = acc;
            }
        }
        out
    }
}

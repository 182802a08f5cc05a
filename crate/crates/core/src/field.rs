//! Field containers: real scalar, real 3-vector, two-component spinor.
//!
//! Every field carries its grid; arithmetic across different grids is a bug
//! on the caller's side and panics loudly. Integrals are plain midpoint sums
//! (exact for band-limited integrands on a periodic grid).

use crate::grid::Grid3;
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid3>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<Grid3>,
    pub comps: [Vec<f64>; 3],
}

/// Two-component Pauli spinor field in the sigma_z eigenbasis.
#[derive(Debug, Clone)]
pub struct SpinorField {
    pub grid: Arc<Grid3>,
    /// [spin up, spin down]
    pub comps: [Vec<Complex64>; 2],
}

fn check_same(a: &Grid3, b: &Grid3, what: &str) {
    if a != b {
        panic!("mixed-grid {what}: {:?} vs {:?}", a.n, b.n);
    }
}

impl ScalarField {
    pub fn zeros(grid: Arc<Grid3>) -> Self {
        let n = grid.len();
        Self { grid, data: vec![0.0; n] }
    }

    pub fn from_fn(grid: Arc<Grid3>, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let mut data = vec![0.0; grid.len()];
        for (ix, iy, iz, idx) in grid.iter_indices() {
            data[idx] = f(grid.position(ix, iy, iz));
        }
        Self { grid, data }
    }

    pub fn integrate(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &ScalarField, s: f64) {
        check_same(&self.grid, &other.grid, "scalar add");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Pointwise product integral \int self * other dV.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        check_same(&self.grid, &other.grid, "scalar dot");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }
}

impl VectorField {
    pub fn zeros(grid: Arc<Grid3>) -> Self {
        let n = grid.len();
        Self { grid, comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn from_fn(grid: Arc<Grid3>, mut f: impl FnMut([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = VectorField::zeros(grid.clone());
        for (ix, iy, iz, idx) in grid.iter_indices() {
            let val = f(grid.position(ix, iy, iz));
            for c in 0..3 {
                v.comps[c][idx] = val[c];
            }
        }
        v
    }

    pub fn uniform(grid: Arc<Grid3>, val: [f64; 3]) -> Self {
        let n = grid.len();
        Self { grid, comps: [vec![val[0]; n], vec![val[1]; n], vec![val[2]; n]] }
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid.clone(), data: self.comps[c].clone() }
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.comps {
            for v in c {
                *v *= s;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &VectorField, s: f64) {
        check_same(&self.grid, &other.grid, "vector add");
        for c in 0..3 {
            for (a, b) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *a += s * b;
            }
        }
    }

    /// \int |v|^2 dV, then sqrt.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.comps.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Componentwise integral.
    pub fn integrate(&self) -> [f64; 3] {
        let dv = self.grid.cell_volume();
        [
            self.comps[0].iter().sum::<f64>() * dv,
            self.comps[1].iter().sum::<f64>() * dv,
            self.comps[2].iter().sum::<f64>() * dv,
        ]
    }

    /// Pointwise cross product self x other.
    pub fn cross(&self, other: &VectorField) -> VectorField {
        check_same(&self.grid, &other.grid, "vector cross");
        let mut out = VectorField::zeros(self.grid.clone());
        for i in 0..self.grid.len() {
            let a = [self.comps[0][i], self.comps[1][i], self.comps[2][i]];
            let b = [other.comps[0][i], other.comps[1][i], other.comps[2][i]];
            out.comps[0][i] = a[1] * b[2] - a[2] * b[1];
            out.comps[1][i] = a[2] * b[0] - a[0] * b[2];
            out.comps[2][i] = a[0] * b[1] - a[1] * b[0];
        }
        out
    }

    /// Pointwise dot product as a scalar field.
    pub fn dot_pointwise(&self, other: &VectorField) -> ScalarField {
        check_same(&self.grid, &other.grid, "vector dot");
        let mut out = ScalarField::zeros(self.grid.clone());
        for i in 0..self.grid.len() {
            out.data[i] = self.comps[0][i] * other.comps[0][i]
                + self.comps[1][i] * other.comps[1][i]
                + self.comps[2][i] * other.comps[2][i];
        }
        out
    }
}

impl SpinorField {
    pub fn zeros(grid: Arc<Grid3>) -> Self {
        let n = grid.len();
        Self { grid, comps: [vec![Complex64::default(); n], vec![Complex64::default(); n]] }
    }

    /// phi^dagger phi, one real value per point.
    pub fn density(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid.clone());
        for i in 0..self.grid.len() {
            out.data[i] = self.comps[0][i].norm_sqr() + self.comps[1][i].norm_sqr();
        }
        out
    }

    /// phi^dagger sigma phi with sigma_z diagonal:
    /// S_x = 2 Re(u* d), S_y = 2 Im(u* d), S_z = |u|^2 - |d|^2.
    pub fn spin_density(&self) -> VectorField {
        let mut out = VectorField::zeros(self.grid.clone());
        for i in 0..self.grid.len() {
            let u = self.comps[0][i];
            let d = self.comps[1][i];
            let cross = u.conj() * d;
            out.comps[0][i] = 2.0 * cross.re;
            out.comps[1][i] = 2.0 * cross.im;
            out.comps[2][i] = u.norm_sqr() - d.norm_sqr();
        }
        out
    }

    pub fn norm_sq(&self) -> f64 {
        let s: f64 = self.comps.iter().map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>()).sum();
        s * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// <self|other> over both components.
    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        check_same(&self.grid, &other.grid, "spinor inner");
        let mut acc = Complex64::default();
        for c in 0..2 {
            for (a, b) in self.comps[c].iter().zip(&other.comps[c]) {
                acc += a.conj() * b;
            }
        }
        acc * self.grid.cell_volume()
    }

    pub fn scale(&mut self, s: Complex64) {
        for c in &mut self.comps {
            for v in c {
                *v *= s;
            }
        }
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
    }

    pub fn add_scaled(&mut self, other: &SpinorField, s: Complex64) {
        check_same(&self.grid, &other.grid, "spinor add");
        for c in 0..2 {
            for (a, b) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *a += s * b;
            }
        }
    }

    /// Apply the pointwise 2x2 Hermitian matrix b . sigma, accumulating
    /// `scale * (b.sigma) self` into `out`. `b` may vary in space.
    pub fn sigma_dot_accumulate(&self, b: &VectorField, scale: f64, out: &mut SpinorField) {
        check_same(&self.grid, &b.grid, "sigma dot");
        check_same(&self.grid, &out.grid, "sigma dot out");
        for i in 0..self.grid.len() {
            let (bx, by, bz) = (b.comps[0][i], b.comps[1][i], b.comps[2][i]);
            let u = self.comps[0][i];
            let d = self.comps[1][i];
            // sigma.b = [[bz, bx - i by], [bx + i by, -bz]]
            out.comps[0][i] += scale * (bz * u + Complex64::new(bx, -by) * d);
            out.comps[1][i] += scale * (Complex64::new(bx, by) * u - bz * d);
        }
    }

    /// Accumulate `scale * v(x) * self` for a real scalar multiplier field.
    pub fn scalar_mul_accumulate(&self, v: &ScalarField, scale: f64, out: &mut SpinorField) {
        check_same(&self.grid, &v.grid, "scalar mul");
        for c in 0..2 {
            for i in 0..self.grid.len() {
                out.comps[c][i] += scale * v.data[i] * self.comps[c][i];
            }
        }
    }
}

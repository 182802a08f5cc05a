//! Spectral differential operators on the periodic grid.
//!
//! Odd-order derivatives use the Nyquist-zeroed wavenumber tables from
//! Grid3 so real fields stay real; the Laplacian keeps the full |k|^2.
//! The Helmholtz projector is built from the same derivative tables, which
//! makes div(transverse) and curl(longitudinal) vanish identically on the
//! grid, not just for resolved modes.

use crate::fft::{fft3, ifft3};
use crate::field::{ScalarField, SpinorField, VectorField};
use crate::grid::Grid3;
use num_complex::Complex64;
use std::sync::Arc;

pub fn to_complex(data: &[f64]) -> Vec<Complex64> {
    data.iter().map(|v| Complex64::new(*v, 0.0)).collect()
}

pub fn real_part(data: &[Complex64]) -> Vec<f64> {
    data.iter().map(|v| v.re).collect()
}

/// Multiply a spectrum in place by i * k_axis (derivative table).
fn mul_ik(grid: &Grid3, hat: &mut [Complex64], axis: usize) {
    let k = grid.deriv_wavenumbers(axis);
    for (ix, iy, iz, idx) in grid.iter_indices() {
        let kk = match axis {
            0 => k[ix],
            1 => k[iy],
            _ => k[iz],
        };
        hat[idx] *= Complex64::new(0.0, kk);
    }
}

/// Multiply a spectrum in place by -|k|^2 (full table, Nyquist included).
fn mul_neg_k2(grid: &Grid3, hat: &mut [Complex64]) {
    let (kx, ky, kz) = (grid.wavenumbers(0), grid.wavenumbers(1), grid.wavenumbers(2));
    for (ix, iy, iz, idx) in grid.iter_indices() {
        let k2 = kx[ix] * kx[ix] + ky[iy] * ky[iy] + kz[iz] * kz[iz];
        hat[idx] *= -k2;
    }
}

pub fn gradient(s: &ScalarField) -> VectorField {
    let grid = &s.grid;
    let mut hat = to_complex(&s.data);
    fft3(grid, &mut hat);
    let mut out = VectorField::zeros(grid.clone());
    for axis in 0..3 {
        let mut h = hat.clone();
        mul_ik(grid, &mut h, axis);
        ifft3(grid, &mut h);
        out.comps[axis] = real_part(&h);
    }
    out
}

pub fn laplacian(s: &ScalarField) -> ScalarField {
    let grid = &s.grid;
    let mut hat = to_complex(&s.data);
    fft3(grid, &mut hat);
    mul_neg_k2(grid, &mut hat);
    ifft3(grid, &mut hat);
    ScalarField { grid: grid.clone(), data: real_part(&hat) }
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = &v.grid;
    let mut acc = vec![Complex64::default(); grid.len()];
    for axis in 0..3 {
        let mut hat = to_complex(&v.comps[axis]);
        fft3(grid, &mut hat);
        mul_ik(grid, &mut hat, axis);
        for (a, b) in acc.iter_mut().zip(&hat) {
            *a += b;
        }
    }
    ifft3(grid, &mut acc);
    ScalarField { grid: grid.clone(), data: real_part(&acc) }
}

pub fn curl(v: &VectorField) -> VectorField {
    let grid = &v.grid;
    let mut hats: Vec<Vec<Complex64>> = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut hat = to_complex(&v.comps[axis]);
        fft3(grid, &mut hat);
        hats.push(hat);
    }
    let kd: [&[f64]; 3] = [grid.deriv_wavenumbers(0), grid.deriv_wavenumbers(1), grid.deriv_wavenumbers(2)];
    let mut out = VectorField::zeros(grid.clone());
    let mut comp_hat = vec![Complex64::default(); grid.len()];
    for c in 0..3 {
        let a = (c + 1) % 3;
        let b = (c + 2) % 3;
        for (ix, iy, iz, idx) in grid.iter_indices() {
            let kidx = [ix, iy, iz];
            let ka = kd[a][kidx[a]];
            let kb = kd[b][kidx[b]];
            comp_hat[idx] = Complex64::new(0.0, 1.0) * (ka * hats[b][idx] - kb * hats[a][idx]);
        }
        let mut h = comp_hat.clone();
        ifft3(grid, &mut h);
        out.comps[c] = real_part(&h);
    }
    out
}

/// Split v = v_T + v_L with div v_T = 0 and curl v_L = 0 on the grid.
pub fn helmholtz_split(v: &VectorField) -> (VectorField, VectorField) {
    let grid = &v.grid;
    let mut hats: Vec<Vec<Complex64>> = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut hat = to_complex(&v.comps[axis]);
        fft3(grid, &mut hat);
        hats.push(hat);
    }
    let kd: [&[f64]; 3] = [grid.deriv_wavenumbers(0), grid.deriv_wavenumbers(1), grid.deriv_wavenumbers(2)];
    let mut long = vec![[Complex64::default(); 3]; grid.len()];
    for (ix, iy, iz, idx) in grid.iter_indices() {
        let k = [kd[0][ix], kd[1][iy], kd[2][iz]];
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 > 0.0 {
            let proj = (k[0] * hats[0][idx] + k[1] * hats[1][idx] + k[2] * hats[2][idx]) / k2;
            for c in 0..3 {
                long[idx][c] = proj * k[c];
            }
        }
    }
    let mut vt = VectorField::zeros(grid.clone());
    let mut vl = VectorField::zeros(grid.clone());
    for c in 0..3 {
        let mut hl: Vec<Complex64> = (0..grid.len()).map(|i| long[i][c]).collect();
        let mut ht: Vec<Complex64> = hats[c].iter().zip(&hl).map(|(a, b)| a - b).collect();
        ifft3(grid, &mut hl);
        ifft3(grid, &mut ht);
        vl.comps[c] = real_part(&hl);
        vt.comps[c] = real_part(&ht);
    }
    (vt, vl)
}

pub fn transverse_part(v: &VectorField) -> VectorField {
    helmholtz_split(v).0
}

/// Spinor spectrum cached once per Hamiltonian application; cheap repeated
/// derivatives afterwards.
pub struct SpinorSpectrum {
    grid: Arc<Grid3>,
    hat: [Vec<Complex64>; 2],
}

impl SpinorSpectrum {
    pub fn of(phi: &SpinorField) -> Self {
        let mut hat0 = phi.comps[0].clone();
        let mut hat1 = phi.comps[1].clone();
        fft3(&phi.grid, &mut hat0);
        fft3(&phi.grid, &mut hat1);
        Self { grid: phi.grid.clone(), hat: [hat0, hat1] }
    }

    /// d phi / d x_axis
    pub fn derivative(&self, axis: usize) -> SpinorField {
        let mut out = SpinorField::zeros(self.grid.clone());
        for c in 0..2 {
            let mut h = self.hat[c].clone();
            mul_ik(&self.grid, &mut h, axis);
            ifft3(&self.grid, &mut h);
            out.comps[c] = h;
        }
        out
    }

    /// Laplacian of phi.
    pub fn laplacian(&self) -> SpinorField {
        let mut out = SpinorField::zeros(self.grid.clone());
        for c in 0..2 {
            let mut h = self.hat[c].clone();
            mul_neg_k2(&self.grid, &mut h);
            ifft3(&self.grid, &mut h);
            out.comps[c] = h;
        }
        out
    }
}

/// All three spatial derivatives of a spinor, one forward transform.
pub fn spinor_gradient(phi: &SpinorField) -> [SpinorField; 3] {
    let spec = SpinorSpectrum::of(phi);
    [spec.derivative(0), spec.derivative(1), spec.derivative(2)]
}

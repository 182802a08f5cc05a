//! Periodic cartesian grid and its Fourier dual.
//!
//! Storage is C order with x slowest: idx = (ix*ny + iy)*nz + iz.
//! Wavevectors use the usual FFT layout per axis, frequencies
//! 0, 1, .., n/2-1, -n/2, .., -1 times 2 pi / L; the zero mode appears
//! exactly once. For odd-order derivatives the Nyquist mode is zeroed so
//! real fields stay real under gradient/curl/divergence.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid3 {
    pub n: [usize; 3],
    /// box edge lengths, atomic units
    pub lengths: [f64; 3],
    #[serde(skip)]
    k: [Vec<f64>; 3],
    #[serde(skip)]
    k_deriv: [Vec<f64>; 3],
}

impl PartialEq for Grid3 {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.lengths == other.lengths
    }
}

fn fft_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let dk = 2.0 * std::f64::consts::PI / length;
    (0..n)
        .map(|i| {
            let f = if i <= (n - 1) / 2 { i as isize } else { i as isize - n as isize };
            f as f64 * dk
        })
        .collect()
}

impl Grid3 {
    pub fn new(n: [usize; 3], lengths: [f64; 3]) -> Result<Arc<Self>> {
        for d in 0..3 {
            if n[d] < 4 {
                return Err(CoreError::Config(format!("grid axis {d} needs at least 4 points, got {}", n[d])));
            }
            if !(lengths[d].is_finite() && lengths[d] > 0.0) {
                return Err(CoreError::Config(format!("grid axis {d} has non-positive length {}", lengths[d])));
            }
        }
        let k = [
            fft_wavenumbers(n[0], lengths[0]),
            fft_wavenumbers(n[1], lengths[1]),
            fft_wavenumbers(n[2], lengths[2]),
        ];
        let mut k_deriv = k.clone();
        for d in 0..3 {
            if n[d] % 2 == 0 {
                // the Nyquist sine is invisible on the grid; its first
                // derivative is taken as zero
                k_deriv[d][n[d] / 2] = 0.0;
            }
        }
        Ok(Arc::new(Self { n, lengths, k, k_deriv }))
    }

    /// Rebuild the derived spectral tables (needed after deserialization).
    pub fn rehydrate(&mut self) {
        let g = Grid3::new(self.n, self.lengths).expect("stored grid re-validates");
        self.k = g.k.clone();
        self.k_deriv = g.k_deriv.clone();
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lengths[0] / self.n[0] as f64,
            self.lengths[1] / self.n[1] as f64,
            self.lengths[2] / self.n[2] as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    pub fn volume(&self) -> f64 {
        self.lengths[0] * self.lengths[1] * self.lengths[2]
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n[1] + iy) * self.n[2] + iz
    }

    /// Cartesian position of a grid point, measured from the box corner.
    #[inline]
    pub fn position(&self, ix: usize, iy: usize, iz: usize) -> [f64; 3] {
        let h = self.spacing();
        [ix as f64 * h[0], iy as f64 * h[1], iz as f64 * h[2]]
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    /// Wavenumbers with the Nyquist mode zeroed; used by odd-order derivatives.
    pub fn deriv_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k_deriv[axis]
    }

    /// Iterate (ix, iy, iz, flat_index).
    pub fn iter_indices(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let [nx, ny, nz] = self.n;
        (0..nx).flat_map(move |ix| {
            (0..ny).flat_map(move |iy| (0..nz).map(move |iz| (ix, iy, iz, (ix * ny + iy) * nz + iz)))
        })
    }

    /// Displacement folded to the symmetric interval [-L/2, L/2) per axis.
    #[inline]
    pub fn min_image(&self, dx: [f64; 3]) -> [f64; 3] {
        let mut out = dx;
        for d in 0..3 {
            let l = self.lengths[d];
            out[d] -= l * (out[d] / l).round();
        }
        out
    }

    pub fn same_as(&self, other: &Grid3) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(CoreError::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.n, self.lengths, other.n, other.lengths
            )))
        }
    }
}

//! Synthetic fields: Gaussian wave packets for initial states, band-limited
//! noise for operator tests.

use crate::field::{ScalarField, SpinorField, VectorField};
use crate::fft::ifft3;
use crate::grid::Grid3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A spin-polarized Gaussian packet. `width` is the standard deviation of
/// the *density* |phi|^2, so the free-spreading law reads
/// sigma(t)^2 = width^2 + (hbar t / (2 m width))^2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center: [f64; 3],
    pub width: f64,
    /// carrier wavevector k0 (momentum / hbar)
    #[serde(default)]
    pub momentum: [f64; 3],
    /// spin direction, normalized internally; (0,0,1) is spin up
    pub spin: [f64; 3],
}

/// Sample a normalized packet on the grid. The envelope is summed over the
/// nearest periodic images so the wavefunction is smooth over the box
/// boundary, not just continuous.
pub fn gaussian_packet(grid: &Arc<Grid3>, spec: &GaussianSpec) -> SpinorField {
    let s = spec.spin;
    let norm = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    let n = if norm > 0.0 { [s[0] / norm, s[1] / norm, s[2] / norm] } else { [0.0, 0.0, 1.0] };
    // Bloch state for direction n: (cos(t/2), e^{i p} sin(t/2))
    let theta = n[2].clamp(-1.0, 1.0).acos();
    let phi_az = n[1].atan2(n[0]);
    let up = Complex64::new((theta / 2.0).cos(), 0.0);
    let down = Complex64::new(0.0, phi_az).exp() * (theta / 2.0).sin();

    let four_s2 = 4.0 * spec.width * spec.width;
    let ls = grid.lengths;
    let mut out = SpinorField::zeros(grid.clone());
    for (ix, iy, iz, idx) in grid.iter_indices() {
        let p = grid.position(ix, iy, iz);
        let d = grid.min_image([p[0] - spec.center[0], p[1] - spec.center[1], p[2] - spec.center[2]]);
        let mut env = 0.0;
        for mx in -1..=1i32 {
            for my in -1..=1i32 {
                for mz in -1..=1i32 {
                    let dx = d[0] + mx as f64 * ls[0];
                    let dy = d[1] + my as f64 * ls[1];
                    let dz = d[2] + mz as f64 * ls[2];
                    env += (-(dx * dx + dy * dy + dz * dz) / four_s2).exp();
                }
            }
        }
        let phase = spec.momentum[0] * p[0] + spec.momentum[1] * p[1] + spec.momentum[2] * p[2];
        let amp = env * Complex64::new(0.0, phase).exp();
        out.comps[0][idx] = amp * up;
        out.comps[1][idx] = amp * down;
    }
    out.normalize();
    out
}

fn band_limited_spectrum(grid: &Arc<Grid3>, seed: u64, cutoff_frac: f64) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hat = vec![Complex64::default(); grid.len()];
    let kmax: f64 = (0..3)
        .map(|d| grid.wavenumbers(d).iter().fold(0.0f64, |m, k| m.max(k.abs())))
        .fold(0.0, f64::max);
    let kc = cutoff_frac * kmax;
    for (ix, iy, iz, idx) in grid.iter_indices() {
        let k2 = grid.wavenumbers(0)[ix].powi(2)
            + grid.wavenumbers(1)[iy].powi(2)
            + grid.wavenumbers(2)[iz].powi(2);
        let damp = (-k2 / (kc * kc)).exp();
        hat[idx] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * damp;
    }
    hat
}

/// Smooth random real scalar field with spectrum damped as exp(-(k/k_c)^2),
/// k_c = cutoff_frac * k_Nyquist. Peak amplitude rescaled to about 1.
pub fn smooth_noise_scalar(grid: &Arc<Grid3>, seed: u64, cutoff_frac: f64) -> ScalarField {
    let mut hat = band_limited_spectrum(grid, seed, cutoff_frac);
    ifft3(grid, &mut hat);
    let mut data: Vec<f64> = hat.iter().map(|v| v.re).collect();
    let peak = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for v in &mut data {
        *v /= peak;
    }
    ScalarField { grid: grid.clone(), data }
}

pub fn smooth_noise_vector(grid: &Arc<Grid3>, seed: u64, cutoff_frac: f64) -> VectorField {
    let mut out = VectorField::zeros(grid.clone());
    for c in 0..3 {
        out.comps[c] = smooth_noise_scalar(grid, seed.wrapping_add(c as u64 * 7919), cutoff_frac).data;
    }
    out
}

/// Smooth random spinor, normalized. Complex per component.
pub fn smooth_noise_spinor(grid: &Arc<Grid3>, seed: u64, cutoff_frac: f64) -> SpinorField {
    let mut out = SpinorField::zeros(grid.clone());
    for c in 0..2 {
        let mut hat = band_limited_spectrum(grid, seed.wrapping_add(c as u64 * 104729), cutoff_frac);
        ifft3(grid, &mut hat);
        out.comps[c] = hat;
    }
    out.normalize();
    out
}

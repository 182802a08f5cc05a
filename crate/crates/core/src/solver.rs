//! Quasi-static field solves: every source density feeds a Poisson-like
//! equation, scalar or vector, under periodic or isolated boundary handling.
//!
//! Derived fields (gradients, Laplacians, curls) are always taken on the
//! grid the solve ran on. For isolated solves that is the padded grid,
//! where the potential is smooth and periodic; differentiating the
//! extracted box instead would smear the boundary mismatch everywhere.

use crate::constants::PhysicalConstants;
use crate::error::{CoreError, Result};
use crate::fft::{fft3, ifft3};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid3;
use crate::kernels::{IsolatedConvolver, Route};
use crate::laser::ExternalSample;
use crate::ops;
use crate::sources::SourceSet;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Fourier inversion of the Laplacian; periodic at padding 1, truncated
    /// free-space multipliers beyond
    SpectralPoisson,
    /// discrete convolution with the sampled real-space kernels
    GreenKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroModePolicy {
    /// neutralizing background: the k = 0 mode is dropped
    Drop,
    /// refuse non-neutral sources outright
    Reject,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolveMethod,
    pub zero_mode_policy: ZeroModePolicy,
    /// 1 = periodic production solve; 2 or 3 = isolated (free-space) solve
    pub padding_factor: usize,
    /// Plummer regularization of sampled kernels, length units; 0 = none
    pub softening: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolveMethod::SpectralPoisson,
            zero_mode_policy: ZeroModePolicy::Drop,
            padding_factor: 1,
            softening: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.padding_factor) {
            return Err(CoreError::Config(format!(
                "padding_factor {} outside 1..=3",
                self.padding_factor
            )));
        }
        if self.softening < 0.0 {
            return Err(CoreError::Config("softening must be >= 0".into()));
        }
        if self.method == SolveMethod::SpectralPoisson
            && self.padding_factor == 1
            && self.softening > 0.0
        {
            return Err(CoreError::Config(
                "softening applies to sampled kernels; the periodic spectral solve has none".into(),
            ));
        }
        Ok(())
    }

    fn engine(&self, grid: &Arc<Grid3>) -> Result<Engine> {
        self.validate()?;
        match (self.method, self.padding_factor) {
            (SolveMethod::SpectralPoisson, 1) => Ok(Engine::Periodic(self.zero_mode_policy)),
            (SolveMethod::SpectralPoisson, p) => Ok(Engine::Isolated(
                IsolatedConvolver::new(grid.clone(), p, self.softening)?,
                Route::Spectral,
            )),
            (SolveMethod::GreenKernel, p) => Ok(Engine::Isolated(
                IsolatedConvolver::new(grid.clone(), p, self.softening)?,
                Route::Lattice,
            )),
        }
    }
}

enum Engine {
    Periodic(ZeroModePolicy),
    Isolated(IsolatedConvolver, Route),
}

/// All mean-field potentials of one state, with the operator-ready derived
/// fields evaluated on the solve grid.
#[derive(Debug, Clone)]
pub struct PotentialSet {
    pub phi0: ScalarField,
    pub grad_phi0: VectorField,
    pub lap_phi0: ScalarField,
    pub phi2_orb: ScalarField,
    pub phi2_spin: ScalarField,
    pub phi2_field: ScalarField,
    pub a2_orb: VectorField,
    pub a2_spin: VectorField,
    pub a2_field: VectorField,
    pub b2_orb: VectorField,
    pub b2_spin: VectorField,
    pub b2_field: VectorField,
}

impl PotentialSet {
    pub fn zeros(grid: Arc<Grid3>) -> Self {
        Self {
            phi0: ScalarField::zeros(grid.clone()),
            grad_phi0: VectorField::zeros(grid.clone()),
            lap_phi0: ScalarField::zeros(grid.clone()),
            phi2_orb: ScalarField::zeros(grid.clone()),
            phi2_spin: ScalarField::zeros(grid.clone()),
            phi2_field: ScalarField::zeros(grid.clone()),
            a2_orb: VectorField::zeros(grid.clone()),
            a2_spin: VectorField::zeros(grid.clone()),
            a2_field: VectorField::zeros(grid.clone()),
            b2_orb: VectorField::zeros(grid.clone()),
            b2_spin: VectorField::zeros(grid.clone()),
            b2_field: VectorField::zeros(grid),
        }
    }

    pub fn add(&mut self, other: &Self) {
        self.phi0.add_scaled(&other.phi0, 1.0);
        self.grad_phi0.add_scaled(&other.grad_phi0, 1.0);
        self.lap_phi0.add_scaled(&other.lap_phi0, 1.0);
        self.phi2_orb.add_scaled(&other.phi2_orb, 1.0);
        self.phi2_spin.add_scaled(&other.phi2_spin, 1.0);
        self.phi2_field.add_scaled(&other.phi2_field, 1.0);
        self.a2_orb.add_scaled(&other.a2_orb, 1.0);
        self.a2_spin.add_scaled(&other.a2_spin, 1.0);
        self.a2_field.add_scaled(&other.a2_field, 1.0);
        self.b2_orb.add_scaled(&other.b2_orb, 1.0);
        self.b2_spin.add_scaled(&other.b2_spin, 1.0);
        self.b2_field.add_scaled(&other.b2_field, 1.0);
    }

    /// total internal scalar potential correction
    pub fn phi2_total(&self) -> ScalarField {
        let mut t = self.phi2_orb.clone();
        t.add_scaled(&self.phi2_spin, 1.0);
        t.add_scaled(&self.phi2_field, 1.0);
        t
    }
}

fn check_neutrality(src: &ScalarField, policy: ZeroModePolicy) -> Result<()> {
    if let ZeroModePolicy::Reject = policy {
        let total = src.integrate();
        let scale: f64 = src.data.iter().map(|v| v.abs()).sum::<f64>() * src.grid.cell_volume();
        if total.abs() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(CoreError::Solver(format!(
                "non-neutral source (net {total:.3e}) rejected by zero-mode policy"
            )));
        }
    }
    Ok(())
}

/// Phi with -lap(Phi) = (q/eps0) * source. Periodic solves drop the k = 0
/// mode per the policy; isolated solves convolve the truncated 1/r kernel.
pub fn solve_scalar_poisson(
    src: &ScalarField,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
) -> Result<ScalarField> {
    let (phi, _, _) = scalar_with_derivatives(src, cfg, k, false)?;
    Ok(phi)
}

/// Potential plus its gradient and Laplacian, all consistently
/// differentiated on the solve grid.
pub fn scalar_with_derivatives(
    src: &ScalarField,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
    derived: bool,
) -> Result<(ScalarField, VectorField, ScalarField)> {
    let grid = &src.grid;
    let scale = k.q / k.eps0;
    match cfg.engine(grid)? {
        Engine::Periodic(policy) => {
            check_neutrality(src, policy)?;
            let mut shat: Vec<Complex64> =
                src.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft3(grid, &mut shat);
            for (ix, iy, iz, idx) in grid.iter_indices() {
                let kx = grid.wavenumbers(0)[ix];
                let ky = grid.wavenumbers(1)[iy];
                let kz = grid.wavenumbers(2)[iz];
                let k2 = kx * kx + ky * ky + kz * kz;
                shat[idx] = if k2 == 0.0 { Complex64::ZERO } else { shat[idx] * (scale / k2) };
            }
            finish_scalar(grid, shat, derived)
        }
        Engine::Isolated(conv, route) => {
            let phi_pad = {
                let mut p = conv.coulomb_padded(src, route)?;
                p.scale(scale / (4.0 * std::f64::consts::PI));
                p
            };
            let phi = conv.extract_scalar(&phi_pad)?;
            if !derived {
                return Ok((
                    phi,
                    VectorField::zeros(grid.clone()),
                    ScalarField::zeros(grid.clone()),
                ));
            }
            let grad = conv.extract_vector(&ops::gradient(&phi_pad))?;
            let lap = conv.extract_scalar(&ops::laplacian(&phi_pad))?;
            Ok((phi, grad, lap))
        }
    }
}

fn finish_scalar(
    grid: &Arc<Grid3>,
    phi_hat: Vec<Complex64>,
    derived: bool,
) -> Result<(ScalarField, VectorField, ScalarField)> {
    let mut phi_data = phi_hat.clone();
    ifft3(grid, &mut phi_data);
    let phi = ScalarField { grid: grid.clone(), data: phi_data.iter().map(|v| v.re).collect() };
    if !derived {
        return Ok((phi, VectorField::zeros(grid.clone()), ScalarField::zeros(grid.clone())));
    }
    let mut grad = VectorField::zeros(grid.clone());
    let mut lap_hat = phi_hat.clone();
    for a in 0..3 {
        let mut comp = phi_hat.clone();
        for (ix, iy, iz, idx) in grid.iter_indices() {
            let kd = [
                grid.deriv_wavenumbers(0)[ix],
                grid.deriv_wavenumbers(1)[iy],
                grid.deriv_wavenumbers(2)[iz],
            ];
            comp[idx] *= Complex64::new(0.0, kd[a]);
            if a == 0 {
                let kx = grid.wavenumbers(0)[ix];
                let ky = grid.wavenumbers(1)[iy];
                let kz = grid.wavenumbers(2)[iz];
                lap_hat[idx] *= -(kx * kx + ky * ky + kz * kz);
            }
        }
        ifft3(grid, &mut comp);
        grad.comps[a] = comp.iter().map(|v| v.re).collect();
    }
    ifft3(grid, &mut lap_hat);
    let lap = ScalarField { grid: grid.clone(), data: lap_hat.iter().map(|v| v.re).collect() };
    Ok((phi, grad, lap))
}

/// Transverse/longitudinal split, re-exported at the solver surface.
pub fn transverse_project(j: &VectorField) -> (VectorField, VectorField) {
    ops::helmholtz_split(j)
}

/// A with -lap(A) = (q/(eps0 c^2)) * j_T; the projection is applied
/// internally on the solve grid.
pub fn solve_vector_potential(
    j: &VectorField,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
) -> Result<VectorField> {
    let (a, _) = vector_with_curl(j, cfg, k, false)?;
    Ok(a)
}

pub fn vector_with_curl(
    j: &VectorField,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
    derived: bool,
) -> Result<(VectorField, VectorField)> {
    let grid = &j.grid;
    let scale = k.q / (k.eps0 * k.c * k.c);
    match cfg.engine(grid)? {
        Engine::Periodic(_) => {
            let mut jhat: [Vec<Complex64>; 3] = std::array::from_fn(|a| {
                let mut c: Vec<Complex64> =
                    j.comps[a].iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft3(grid, &mut c);
                c
            });
            for (ix, iy, iz, idx) in grid.iter_indices() {
                let kx = grid.wavenumbers(0)[ix];
                let ky = grid.wavenumbers(1)[iy];
                let kz = grid.wavenumbers(2)[iz];
                let k2 = kx * kx + ky * ky + kz * kz;
                if k2 == 0.0 {
                    for a in 0..3 {
                        jhat[a][idx] = Complex64::ZERO;
                    }
                    continue;
                }
                // project with the derivative wavenumbers so the returned
                // divergence vanishes identically under ops::divergence
                let kd = [
                    grid.deriv_wavenumbers(0)[ix],
                    grid.deriv_wavenumbers(1)[iy],
                    grid.deriv_wavenumbers(2)[iz],
                ];
                let kd2 = kd[0] * kd[0] + kd[1] * kd[1] + kd[2] * kd[2];
                let jv = [jhat[0][idx], jhat[1][idx], jhat[2][idx]];
                let kj = if kd2 == 0.0 {
                    Complex64::ZERO
                } else {
                    (jv[0] * kd[0] + jv[1] * kd[1] + jv[2] * kd[2]) / kd2
                };
                for a in 0..3 {
                    jhat[a][idx] = (jv[a] - kj * kd[a]) * (scale / k2);
                }
            }
            let mut a_out = VectorField::zeros(grid.clone());
            let mut b_out = VectorField::zeros(grid.clone());
            if derived {
                b_out = curl_from_spectra(grid, &jhat);
            }
            for a in 0..3 {
                ifft3(grid, &mut jhat[a]);
                a_out.comps[a] = jhat[a].iter().map(|v| v.re).collect();
            }
            Ok((a_out, b_out))
        }
        Engine::Isolated(conv, route) => {
            let mut a_pad = conv.tensor_padded(j, route)?;
            a_pad.scale(scale / (4.0 * std::f64::consts::PI));
            let a = conv.extract_vector(&a_pad)?;
            let b = if derived {
                conv.extract_vector(&ops::curl(&a_pad))?
            } else {
                VectorField::zeros(grid.clone())
            };
            Ok((a, b))
        }
    }
}

fn curl_from_spectra(grid: &Arc<Grid3>, vhat: &[Vec<Complex64>; 3]) -> VectorField {
    let mut out = VectorField::zeros(grid.clone());
    let mut comps: [Vec<Complex64>; 3] =
        std::array::from_fn(|_| vec![Complex64::ZERO; grid.len()]);
    for (ix, iy, iz, idx) in grid.iter_indices() {
        let kd = [
            grid.deriv_wavenumbers(0)[ix],
            grid.deriv_wavenumbers(1)[iy],
            grid.deriv_wavenumbers(2)[iz],
        ];
        for a in 0..3 {
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            comps[a][idx] = Complex64::new(0.0, 1.0) * (kd[b] * vhat[c][idx] - kd[c] * vhat[b][idx]);
        }
    }
    for a in 0..3 {
        ifft3(grid, &mut comps[a]);
        out.comps[a] = comps[a].iter().map(|v| v.re).collect();
    }
    out
}

/// Direct kernel evaluation of the scalar potential, 1/(4 pi eps0) ... /r
/// form; the validation counterpart of solve_scalar_poisson.
pub fn greens_kernel_scalar(
    src: &ScalarField,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
) -> Result<ScalarField> {
    let conv = IsolatedConvolver::new(src.grid.clone(), cfg.padding_factor, cfg.softening)?;
    let mut phi = conv.coulomb(src, Route::Lattice)?;
    phi.scale(k.q / (4.0 * std::f64::consts::PI * k.eps0));
    Ok(phi)
}

/// Direct kernel evaluation of the quasi-static vector potential with the
/// two-term kernel [j/2r + r (r.j)/2r^3].
pub fn greens_kernel_vector(
    j: &VectorField,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
) -> Result<VectorField> {
    let conv = IsolatedConvolver::new(j.grid.clone(), cfg.padding_factor, cfg.softening)?;
    let mut a = conv.tensor(j, Route::Lattice)?;
    a.scale(k.q / (4.0 * std::f64::consts::PI * k.eps0 * k.c * k.c));
    Ok(a)
}

/// Solve every potential of the mean field from its own source. The
/// field-dressed entries are forced to zero when the external vector
/// potential vanishes, which is their defining property.
pub fn assemble_potentials(
    srcs: &SourceSet,
    ext: &ExternalSample,
    cfg: &SolverConfig,
    k: &PhysicalConstants,
) -> Result<PotentialSet> {
    let grid = &srcs.rho0.grid;
    let (phi0, grad_phi0, lap_phi0) = scalar_with_derivatives(&srcs.rho0, cfg, k, true)?;
    let (phi2_orb, _, _) = scalar_with_derivatives(&srcs.rho2_orb, cfg, k, false)?;
    let (phi2_spin, _, _) = scalar_with_derivatives(&srcs.rho2_spin, cfg, k, false)?;
    let (a2_orb, b2_orb) = vector_with_curl(&srcs.j_orb, cfg, k, true)?;
    let (a2_spin, b2_spin) = vector_with_curl(&srcs.j_spin, cfg, k, true)?;
    let (phi2_field, a2_field, b2_field) = if ext.a_is_zero() {
        (
            ScalarField::zeros(grid.clone()),
            VectorField::zeros(grid.clone()),
            VectorField::zeros(grid.clone()),
        )
    } else {
        let (p, _, _) = scalar_with_derivatives(&srcs.rho2_field, cfg, k, false)?;
        let (a, b) = vector_with_curl(&srcs.j_field, cfg, k, true)?;
        (p, a, b)
    };
    Ok(PotentialSet {
        phi0,
        grad_phi0,
        lap_phi0,
        phi2_orb,
        phi2_spin,
        phi2_field,
        a2_orb,
        a2_spin,
        a2_field,
        b2_orb,
        b2_spin,
        b2_field,
    })
}

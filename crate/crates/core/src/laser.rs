//! External laser field: envelope carrier pulses sampled as uniform (dipole
//! approximation) or spatially resolved (plane wave) A, E, B triples.
//!
//! The pulse is specified by the vector potential; E = -dA/dt analytically,
//! envelope derivative included, so no finite-difference residue enters the
//! driving field. B is zero in dipole mode and the analytic curl in
//! plane-wave mode.

use crate::analysis::fluence_to_field;
use crate::constants::PhysicalConstants;
use crate::error::{CoreError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid3;
use crate::units::{atomic_unit_in_si, Dimension};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    Gaussian,
    Sin2,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialProfile {
    /// uniform A(t) over the box, B = 0
    Dipole,
    /// cos(w t - k.x) with k = (w/c) k_hat
    PlaneWave,
}

/// All inputs in atomic units; the CLI converts lab units before building
/// one of these.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LaserPulse {
    /// peak vector potential
    pub a0: f64,
    pub wavelength: f64,
    pub envelope: Envelope,
    /// gaussian: FWHM of the field envelope; sin2: full base width
    pub duration: f64,
    #[serde(default)]
    pub t_center: f64,
    #[serde(default)]
    pub carrier_phase: f64,
    pub polarization: [f64; 3],
    #[serde(default = "default_spatial")]
    pub spatial: SpatialProfile,
    /// propagation direction, plane-wave mode only
    #[serde(default = "default_propagation")]
    pub propagation: [f64; 3],
}

fn default_spatial() -> SpatialProfile {
    SpatialProfile::Dipole
}

fn default_propagation() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn normalize(v: [f64; 3]) -> Result<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        return Err(CoreError::Config("zero direction vector".into()));
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

impl LaserPulse {
    pub fn omega(&self, k: &PhysicalConstants) -> f64 {
        2.0 * std::f64::consts::PI * k.c / self.wavelength
    }

    /// Peak A from a fluence (mJ/cm^2) and effective duration (fs) through
    /// the flat-top intensity relation c eps0 E^2/2 = fluence/duration,
    /// then A0 = E_peak/omega.
    pub fn a0_from_fluence(fluence_mj_cm2: f64, duration_fs: f64, wavelength_au: f64, k: &PhysicalConstants) -> f64 {
        let e_si = fluence_to_field(fluence_mj_cm2, duration_fs * 1e-15);
        let e_au = e_si / atomic_unit_in_si(Dimension::ElectricField);
        let omega = 2.0 * std::f64::consts::PI * k.c / wavelength_au;
        e_au / omega
    }

    /// envelope value and its time derivative
    pub fn envelope_at(&self, t: f64) -> (f64, f64) {
        let dt = t - self.t_center;
        match self.envelope {
            Envelope::Flat => (1.0, 0.0),
            Envelope::Gaussian => {
                // duration is the FWHM of the field envelope
                let tau = self.duration / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
                let f = (-dt * dt / (2.0 * tau * tau)).exp();
                (f, -dt / (tau * tau) * f)
            }
            Envelope::Sin2 => {
                if dt.abs() >= self.duration / 2.0 {
                    (0.0, 0.0)
                } else {
                    let x = std::f64::consts::PI * dt / self.duration;
                    (x.cos().powi(2), -std::f64::consts::PI / self.duration * (2.0 * x).sin())
                }
            }
        }
    }

    pub fn sample(&self, t: f64, grid: &Arc<Grid3>, k: &PhysicalConstants) -> Result<ExternalSample> {
        let eps = normalize(self.polarization)?;
        let omega = self.omega(k);
        let (f, dfdt) = self.envelope_at(t);
        match self.spatial {
            SpatialProfile::Dipole => {
                let theta = omega * (t - self.t_center) + self.carrier_phase;
                let (s, c) = theta.sin_cos();
                let a = self.a0 * f * c;
                // E = -dA/dt
                let e = -self.a0 * (dfdt * c - f * omega * s);
                Ok(ExternalSample::uniform(
                    [eps[0] * a, eps[1] * a, eps[2] * a],
                    [eps[0] * e, eps[1] * e, eps[2] * e],
                    [0.0; 3],
                    grid.clone(),
                ))
            }
            SpatialProfile::PlaneWave => {
                let khat = normalize(self.propagation)?;
                let dot = eps[0] * khat[0] + eps[1] * khat[1] + eps[2] * khat[2];
                if dot.abs() > 1e-10 {
                    return Err(CoreError::Config("plane-wave polarization must be transverse to propagation".into()));
                }
                let kvec = [khat[0] * omega / k.c, khat[1] * omega / k.c, khat[2] * omega / k.c];
                let bdir = [
                    kvec[1] * eps[2] - kvec[2] * eps[1],
                    kvec[2] * eps[0] - kvec[0] * eps[2],
                    kvec[0] * eps[1] - kvec[1] * eps[0],
                ];
                let mut a = VectorField::zeros(grid.clone());
                let mut e = VectorField::zeros(grid.clone());
                let mut b = VectorField::zeros(grid.clone());
                for (ix, iy, iz, idx) in grid.iter_indices() {
                    let p = grid.position(ix, iy, iz);
                    let theta = omega * (t - self.t_center) - (kvec[0] * p[0] + kvec[1] * p[1] + kvec[2] * p[2])
                        + self.carrier_phase;
                    let (s, c) = theta.sin_cos();
                    let av = self.a0 * f * c;
                    let ev = -self.a0 * (dfdt * c - f * omega * s);
                    let bv = self.a0 * f * s;
                    for d in 0..3 {
                        a.comps[d][idx] = eps[d] * av;
                        e.comps[d][idx] = eps[d] * ev;
                        b.comps[d][idx] = bdir[d] * bv;
                    }
                }
                Ok(ExternalSample {
                    grid: grid.clone(),
                    a: Sampled::Field(a),
                    e: Sampled::Field(e),
                    b: Sampled::Field(b),
                    phi: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Sampled {
    Uniform([f64; 3]),
    Field(VectorField),
}

/// One time sample of the external electromagnetic field on a grid.
/// Phi_ext defaults to zero (velocity gauge).
#[derive(Debug, Clone)]
pub struct ExternalSample {
    pub grid: Arc<Grid3>,
    pub a: Sampled,
    pub e: Sampled,
    pub b: Sampled,
    pub phi: Option<ScalarField>,
}

impl ExternalSample {
    pub fn uniform(a: [f64; 3], e: [f64; 3], b: [f64; 3], grid: Arc<Grid3>) -> Self {
        Self { grid, a: Sampled::Uniform(a), e: Sampled::Uniform(e), b: Sampled::Uniform(b), phi: None }
    }

    pub fn zero(grid: Arc<Grid3>) -> Self {
        Self::uniform([0.0; 3], [0.0; 3], [0.0; 3], grid)
    }

    fn materialize(s: &Sampled, grid: &Arc<Grid3>) -> VectorField {
        match s {
            Sampled::Uniform(v) => VectorField::uniform(grid.clone(), *v),
            Sampled::Field(f) => {
                f.grid.same_as(grid).expect("external sample grid");
                f.clone()
            }
        }
    }

    pub fn a_at(&self, grid: &Arc<Grid3>) -> VectorField {
        Self::materialize(&self.a, grid)
    }

    pub fn e_at(&self, grid: &Arc<Grid3>) -> VectorField {
        Self::materialize(&self.e, grid)
    }

    pub fn b_at(&self, grid: &Arc<Grid3>) -> VectorField {
        Self::materialize(&self.b, grid)
    }

    pub fn phi_at(&self, grid: &Arc<Grid3>) -> ScalarField {
        match &self.phi {
            Some(p) => {
                p.grid.same_as(grid).expect("external sample grid");
                p.clone()
            }
            None => ScalarField::zeros(grid.clone()),
        }
    }

    pub fn a_uniform(&self) -> Option<[f64; 3]> {
        match &self.a {
            Sampled::Uniform(v) => Some(*v),
            Sampled::Field(_) => None,
        }
    }

    /// True when the vector potential is identically zero (the coherent
    /// sector must then vanish).
    pub fn a_is_zero(&self) -> bool {
        match &self.a {
            Sampled::Uniform(v) => v == &[0.0; 3],
            Sampled::Field(f) => f.max_abs() == 0.0,
        }
    }

    /// Merge static uniform offsets (bias fields, Larmor setups) into this
    /// sample.
    pub fn with_static(mut self, a0: [f64; 3], e0: [f64; 3], b0: [f64; 3]) -> Self {
        let add = |s: &mut Sampled, v: [f64; 3], grid: &Arc<Grid3>| {
            if v == [0.0; 3] {
                return;
            }
            match s {
                Sampled::Uniform(u) => {
                    for d in 0..3 {
                        u[d] += v[d];
                    }
                }
                Sampled::Field(f) => {
                    f.add_scaled(&VectorField::uniform(grid.clone(), v), 1.0);
                }
            }
        };
        let grid = self.grid.clone();
        add(&mut self.a, a0, &grid);
        add(&mut self.e, e0, &grid);
        add(&mut self.b, b0, &grid);
        self
    }
}

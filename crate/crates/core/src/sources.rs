//! Charge and current densities sourced by the spinor orbitals, split by
//! physical origin: convective (orb), magnetization (spin), and the
//! field-induced drift that appears once an external vector potential is on.
//! The rho2 family are the order-1/c^2 density corrections; each integrates
//! to zero because all are total divergences.

use crate::constants::PhysicalConstants;
use crate::field::{ScalarField, SpinorField, VectorField};
use crate::laser::ExternalSample;
use crate::ops::{divergence, gradient, laplacian, spinor_gradient};
use num_complex::Complex64;

/// B_b(x) = phi^dagger sigma_b psi, complex in general.
pub fn sigma_bilinear(phi: &SpinorField, psi: &SpinorField) -> [Vec<Complex64>; 3] {
    phi.grid.same_as(&psi.grid).expect("sigma bilinear grids");
    let n = phi.grid.len();
    let mut out = [vec![Complex64::default(); n], vec![Complex64::default(); n], vec![Complex64::default(); n]];
    for i in 0..n {
        let (u, d) = (phi.comps[0][i].conj(), phi.comps[1][i].conj());
        let (pu, pd) = (psi.comps[0][i], psi.comps[1][i]);
        out[0][i] = u * pd + d * pu;
        out[1][i] = Complex64::new(0.0, 1.0) * (d * pu - u * pd);
        out[2][i] = u * pu - d * pd;
    }
    out
}

/// rho0 = phi^dagger phi
pub fn charge_density(phi: &SpinorField) -> ScalarField {
    phi.density()
}

/// j_orb = (hbar/m) Im(phi^dagger grad phi); the Hermitian convective current.
pub fn orbital_current(phi: &SpinorField, k: &PhysicalConstants) -> VectorField {
    let grads = spinor_gradient(phi);
    let mut out = VectorField::zeros(phi.grid.clone());
    let pref = k.hbar / k.mass;
    for a in 0..3 {
        for i in 0..phi.grid.len() {
            let mut im = 0.0;
            for c in 0..2 {
                im += (phi.comps[c][i].conj() * grads[a].comps[c][i]).im;
            }
            out.comps[a][i] = pref * im;
        }
    }
    out
}

/// Hermitian momentum density Re(phi^dagger p phi) = m * j_orb.
pub fn momentum_density(phi: &SpinorField, k: &PhysicalConstants) -> VectorField {
    let mut out = orbital_current(phi, k);
    out.scale(k.mass);
    out
}

/// j_spin = (hbar/2m) curl(phi^dagger sigma phi); divergence-free on the grid.
pub fn spin_current(phi: &SpinorField, k: &PhysicalConstants) -> VectorField {
    let mut out = crate::ops::curl(&phi.spin_density());
    out.scale(k.hbar / (2.0 * k.mass));
    out
}

/// j_field = -(q/m) rho A_ext
pub fn field_current(phi: &SpinorField, a_ext: &ExternalSample, k: &PhysicalConstants) -> VectorField {
    let rho = phi.density();
    let mut out = VectorField::zeros(phi.grid.clone());
    let pref = -k.q / k.mass;
    let a = a_ext.a_at(&phi.grid);
    for c in 0..3 {
        for i in 0..phi.grid.len() {
            out.comps[c][i] = pref * rho.data[i] * a.comps[c][i];
        }
    }
    out
}

/// rho2_orb = (hbar^2 / 8 m^2 c^2) laplacian(rho0)
pub fn rho2_orb(phi: &SpinorField, k: &PhysicalConstants) -> ScalarField {
    let mut out = laplacian(&phi.density());
    out.scale(k.hbar * k.hbar / (8.0 * k.mass * k.mass * k.c * k.c));
    out
}

/// Im[phi^dagger sigma ^ grad phi], the vector whose divergence carries the
/// spin part of the density correction.
pub fn sigma_cross_gradient(phi: &SpinorField) -> VectorField {
    let grads = spinor_gradient(phi);
    let b: [[Vec<Complex64>; 3]; 3] = [
        sigma_bilinear(phi, &grads[0]),
        sigma_bilinear(phi, &grads[1]),
        sigma_bilinear(phi, &grads[2]),
    ];
    let mut out = VectorField::zeros(phi.grid.clone());
    for a in 0..3 {
        let (b_, c_) = ((a + 1) % 3, (a + 2) % 3);
        for i in 0..phi.grid.len() {
            // eps_{abc} phi^dagger sigma_b d_c phi; b[c][sigma index]
            out.comps[a][i] = (b[c_][b_][i] - b[b_][c_][i]).im;
        }
    }
    out
}

/// rho2_spin = (hbar^2 / 4 m^2 c^2) div Im[phi^dagger sigma ^ grad phi]
pub fn rho2_spin(phi: &SpinorField, k: &PhysicalConstants) -> ScalarField {
    let mut out = divergence(&sigma_cross_gradient(phi));
    out.scale(k.hbar * k.hbar / (4.0 * k.mass * k.mass * k.c * k.c));
    out
}

/// rho2_field = -(q hbar / 4 m^2 c^2) div(S ^ A_ext)
pub fn rho2_field(phi: &SpinorField, a_ext: &ExternalSample, k: &PhysicalConstants) -> ScalarField {
    let s = phi.spin_density();
    let a = a_ext.a_at(&phi.grid);
    let mut out = divergence(&s.cross(&a));
    out.scale(-k.q * k.hbar / (4.0 * k.mass * k.mass * k.c * k.c));
    out
}

/// Everything the field equations consume, for one orbital or one exclusion
/// class. rho2 components kept separate so they can be toggled one by one.
#[derive(Debug, Clone)]
pub struct SourceSet {
    pub rho0: ScalarField,
    pub j_orb: VectorField,
    pub j_spin: VectorField,
    pub j_field: VectorField,
    pub rho2_orb: ScalarField,
    pub rho2_spin: ScalarField,
    pub rho2_field: ScalarField,
}

impl SourceSet {
    pub fn of(phi: &SpinorField, ext: &ExternalSample, k: &PhysicalConstants) -> Self {
        Self {
            rho0: charge_density(phi),
            j_orb: orbital_current(phi, k),
            j_spin: spin_current(phi, k),
            j_field: field_current(phi, ext, k),
            rho2_orb: rho2_orb(phi, k),
            rho2_spin: rho2_spin(phi, k),
            rho2_field: rho2_field(phi, ext, k),
        }
    }

    pub fn zeros(grid: std::sync::Arc<crate::grid::Grid3>) -> Self {
        Self {
            rho0: ScalarField::zeros(grid.clone()),
            j_orb: VectorField::zeros(grid.clone()),
            j_spin: VectorField::zeros(grid.clone()),
            j_field: VectorField::zeros(grid.clone()),
            rho2_orb: ScalarField::zeros(grid.clone()),
            rho2_spin: ScalarField::zeros(grid.clone()),
            rho2_field: ScalarField::zeros(grid),
        }
    }

    pub fn add(&mut self, other: &SourceSet) {
        self.rho0.add_scaled(&other.rho0, 1.0);
        self.j_orb.add_scaled(&other.j_orb, 1.0);
        self.j_spin.add_scaled(&other.j_spin, 1.0);
        self.j_field.add_scaled(&other.j_field, 1.0);
        self.rho2_orb.add_scaled(&other.rho2_orb, 1.0);
        self.rho2_spin.add_scaled(&other.rho2_spin, 1.0);
        self.rho2_field.add_scaled(&other.rho2_field, 1.0);
    }

    pub fn sub(&mut self, other: &SourceSet) {
        self.rho0.add_scaled(&other.rho0, -1.0);
        self.j_orb.add_scaled(&other.j_orb, -1.0);
        self.j_spin.add_scaled(&other.j_spin, -1.0);
        self.j_field.add_scaled(&other.j_field, -1.0);
        self.rho2_orb.add_scaled(&other.rho2_orb, -1.0);
        self.rho2_spin.add_scaled(&other.rho2_spin, -1.0);
        self.rho2_field.add_scaled(&other.rho2_field, -1.0);
    }

    pub fn scale(&mut self, f: f64) {
        self.rho0.scale(f);
        self.j_orb.scale(f);
        self.j_spin.scale(f);
        self.j_field.scale(f);
        self.rho2_orb.scale(f);
        self.rho2_spin.scale(f);
        self.rho2_field.scale(f);
    }

    /// Leading-order current entering the vector-potential solve.
    pub fn j0_total(&self) -> VectorField {
        let mut j = self.j_orb.clone();
        j.add_scaled(&self.j_spin, 1.0);
        j.add_scaled(&self.j_field, 1.0);
        j
    }

    /// Total 1/c^2 density correction entering the Phi2 solve.
    pub fn rho2_total(&self) -> ScalarField {
        let mut r = self.rho2_orb.clone();
        r.add_scaled(&self.rho2_spin, 1.0);
        r.add_scaled(&self.rho2_field, 1.0);
        r
    }
}

/// The order-1/c^2 current, diagnostics only; it never sources a field
/// equation. Time derivatives come from two consecutive snapshots a time
/// `dt` apart (forward difference; feed the midpoint fields for a centered
/// estimate).
pub struct CurrentCorrectionInput<'a> {
    pub phi_before: &'a SpinorField,
    pub phi_after: &'a SpinorField,
    pub dt: f64,
    /// sample at the evaluation time (E and A enter undifferentiated or
    /// under d/dt together with the orbital bilinears)
    pub ext: &'a ExternalSample,
    pub ext_before: &'a ExternalSample,
    pub ext_after: &'a ExternalSample,
}

pub fn j2_diagnostic(inp: &CurrentCorrectionInput, k: &PhysicalConstants) -> VectorField {
    let grid = inp.phi_before.grid.clone();
    inp.phi_after.grid.same_as(&grid).expect("j2 snapshots share a grid");
    let c2 = k.c * k.c;
    let m2 = k.mass * k.mass;

    // instantaneous (midpoint-in-time by averaging the two snapshots)
    let mut s_mid = inp.phi_before.spin_density();
    s_mid.add_scaled(&inp.phi_after.spin_density(), 1.0);
    s_mid.scale(0.5);
    let e = inp.ext.e_at(&grid);
    let mut out = s_mid.cross(&e);
    out.scale(-k.q * k.hbar / (4.0 * m2 * c2));

    // -(hbar^2/8m^2c^2) d/dt grad rho
    let mut drho = inp.phi_after.density();
    drho.add_scaled(&inp.phi_before.density(), -1.0);
    drho.scale(1.0 / inp.dt);
    out.add_scaled(&gradient(&drho), -k.hbar * k.hbar / (8.0 * m2 * c2));

    // -(hbar^2/4m^2c^2) d/dt Im[phi^dagger sigma ^ grad phi]
    let mut dsig = sigma_cross_gradient(inp.phi_after);
    dsig.add_scaled(&sigma_cross_gradient(inp.phi_before), -1.0);
    dsig.scale(1.0 / inp.dt);
    out.add_scaled(&dsig, -k.hbar * k.hbar / (4.0 * m2 * c2));

    // +(q hbar/4m^2c^2) d/dt (S ^ A)
    let sa_b = inp.phi_before.spin_density().cross(&inp.ext_before.a_at(&grid));
    let sa_a = inp.phi_after.spin_density().cross(&inp.ext_after.a_at(&grid));
    let mut dsa = sa_a;
    dsa.add_scaled(&sa_b, -1.0);
    dsa.scale(1.0 / inp.dt);
    out.add_scaled(&dsa, k.q * k.hbar / (4.0 * m2 * c2));

    out
}

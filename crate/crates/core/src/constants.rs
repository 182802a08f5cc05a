//! Physical constants in the two unit systems the code speaks.
//!
//! Everything downstream propagates in Hartree atomic units (hbar = m = e = 1,
//! 4 pi eps0 = 1, c = 1/alpha). SI constants exist for I/O conversion and for
//! the laboratory-facing analysis formulas. CODATA 2018 throughout.

use serde::{Deserialize, Serialize};

/// CODATA 2018 exact/recommended SI values.
pub mod codata {
    /// speed of light, m/s (exact)
    pub const C: f64 = 2.997_924_58e8;
    /// Planck constant, J s (exact)
    pub const H: f64 = 6.626_070_15e-34;
    /// reduced Planck constant, J s
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// elementary charge, C (exact)
    pub const E: f64 = 1.602_176_634e-19;
    /// electron mass, kg
    pub const M_E: f64 = 9.109_383_7015e-31;
    /// vacuum permittivity, F/m
    pub const EPS0: f64 = 8.854_187_8128e-12;
    /// inverse fine-structure constant
    pub const INV_ALPHA: f64 = 137.035_999_084;
    /// Bohr radius, m
    pub const A0: f64 = 5.291_772_109_03e-11;
    /// Hartree energy, J
    pub const E_H: f64 = 4.359_744_722_2071e-18;
    /// atomic unit of time, s
    pub const T_AU: f64 = 2.418_884_326_5857e-17;
    /// atomic unit of electric field, V/m
    pub const EFIELD_AU: f64 = 5.142_206_747_63e11;
}

/// The constants a simulation actually dereferences. `q` is the electron
/// charge including sign; `e` is the positive elementary charge.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub e: f64,
    pub q: f64,
    pub c: f64,
    pub eps0: f64,
    pub mu0: f64,
    /// Compton wavelength h/(m c)
    pub lambda_c: f64,
    /// Compton angular frequency 2 pi c / lambda_c
    pub omega_c: f64,
}

impl PhysicalConstants {
    /// Hartree atomic units. mu0 is derived as 1/(eps0 c^2) so that
    /// mu0 eps0 c^2 == 1 holds to round-off by construction.
    pub fn hartree_atomic() -> Self {
        let c = codata::INV_ALPHA;
        let eps0 = 1.0 / (4.0 * std::f64::consts::PI);
        let hbar = 1.0;
        let mass = 1.0;
        let lambda_c = 2.0 * std::f64::consts::PI * hbar / (mass * c);
        Self {
            hbar,
            mass,
            e: 1.0,
            q: -1.0,
            c,
            eps0,
            mu0: 1.0 / (eps0 * c * c),
            lambda_c,
            omega_c: 2.0 * std::f64::consts::PI * c / lambda_c,
        }
    }

    /// SI values for the electron.
    pub fn si() -> Self {
        let c = codata::C;
        let eps0 = codata::EPS0;
        let lambda_c = codata::H / (codata::M_E * c);
        Self {
            hbar: codata::HBAR,
            mass: codata::M_E,
            e: codata::E,
            q: -codata::E,
            c,
            eps0,
            mu0: 1.0 / (eps0 * c * c),
            lambda_c,
            omega_c: 2.0 * std::f64::consts::PI * c / lambda_c,
        }
    }

    /// e^2/(4 pi eps0), the Coulomb coupling that shows up in every pair kernel.
    pub fn e_bar_sq(&self) -> f64 {
        self.e * self.e / (4.0 * std::f64::consts::PI * self.eps0)
    }

    /// Rest-mass energy per particle. Kept out of the propagated phase and
    /// reported as a separate bookkeeping line.
    pub fn rest_energy(&self) -> f64 {
        self.mass * self.c * self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mu0_eps0_c2_is_one_in_both_systems() {
        for k in [PhysicalConstants::hartree_atomic(), PhysicalConstants::si()] {
            assert_relative_eq!(k.mu0 * k.eps0 * k.c * k.c, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn compton_wavelength_matches_definition() {
        for k in [PhysicalConstants::hartree_atomic(), PhysicalConstants::si()] {
            let h = 2.0 * std::f64::consts::PI * k.hbar;
            assert_relative_eq!(k.lambda_c, h / (k.mass * k.c), max_relative = 1e-12);
            assert_relative_eq!(k.omega_c, 2.0 * std::f64::consts::PI * k.c / k.lambda_c, max_relative = 1e-12);
        }
    }

    #[test]
    fn si_compton_wavelength_value() {
        // 2.42631023867e-12 m (CODATA 2018)
        let k = PhysicalConstants::si();
        assert_relative_eq!(k.lambda_c, 2.426_310_238_67e-12, max_relative = 1e-9);
    }

    #[test]
    fn atomic_units_are_atomic() {
        let k = PhysicalConstants::hartree_atomic();
        assert_eq!(k.hbar, 1.0);
        assert_eq!(k.mass, 1.0);
        assert_eq!(k.e, 1.0);
        assert_eq!(k.q, -1.0);
        assert_relative_eq!(k.c, 137.035_999_084, max_relative = 1e-12);
        // in a.u. the Coulomb coupling is exactly 1
        assert_relative_eq!(k.e_bar_sq(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(k.lambda_c, 2.0 * std::f64::consts::PI / k.c, max_relative = 1e-14);
    }
}

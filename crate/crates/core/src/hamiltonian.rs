//! The interaction part of the one-body Hamiltonian, split into three
//! groups: couplings to the external laser field, couplings to the mean
//! field of the other electrons, and the cross couplings that exist only
//! while the external vector potential is on.
//!
//! Every term is individually addressable, both as an operator on a spinor
//! and as an expectation value, so validation suites and the mechanism
//! decomposition can weigh them one at a time.

use crate::constants::PhysicalConstants;
use crate::error::{CoreError, Result};
use crate::field::{SpinorField, VectorField};
use crate::laser::ExternalSample;
use crate::ops::{spinor_gradient, SpinorSpectrum};
use crate::solver::PotentialSet;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermGroup {
    External,
    Internal,
    Coherent,
}

/// The four coherent channels singled out by the yield analysis. A-type
/// channels act on the spin, B-type on the charge motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    A1,
    A2,
    B1,
    B2,
}

impl Mechanism {
    pub fn label(self) -> &'static str {
        match self {
            Mechanism::A1 => "A1",
            Mechanism::A2 => "A2",
            Mechanism::B1 => "B1",
            Mechanism::B2 => "B2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TermId {
    // external field on a single electron
    ExtScalar,
    ExtDipole,
    ExtDiamagnetic,
    ExtZeeman,
    ExtDarwin,
    ExtSoc,
    // mean field of the other electrons
    Hartree,
    ContactOrb,
    ContactDarwin,
    DipolarOrb,
    SooZeemanOrb,
    SooPaSpin,
    SpinSpin,
    SocInt,
    SocPhi2Spin,
    // light-dressed cross terms
    Phi2Field,
    PaField,
    AaOrb,
    AaField,
    AaSpin,
    ZeemanField,
    SocExtInt,
}

impl TermId {
    pub const COUNT: usize = 22;

    pub const ALL: [TermId; Self::COUNT] = [
        TermId::ExtScalar,
        TermId::ExtDipole,
        TermId::ExtDiamagnetic,
        TermId::ExtZeeman,
        TermId::ExtDarwin,
        TermId::ExtSoc,
        TermId::Hartree,
        TermId::ContactOrb,
        TermId::ContactDarwin,
        TermId::DipolarOrb,
        TermId::SooZeemanOrb,
        TermId::SooPaSpin,
        TermId::SpinSpin,
        TermId::SocInt,
        TermId::SocPhi2Spin,
        TermId::Phi2Field,
        TermId::PaField,
        TermId::AaOrb,
        TermId::AaField,
        TermId::AaSpin,
        TermId::ZeemanField,
        TermId::SocExtInt,
    ];

    /// Stable config key; also the column name in observable output.
    pub fn key(self) -> &'static str {
        match self {
            TermId::ExtScalar => "scalar",
            TermId::ExtDipole => "dipole-pa",
            TermId::ExtDiamagnetic => "diamagnetic-a2",
            TermId::ExtZeeman => "zeeman-ext",
            TermId::ExtDarwin => "darwin-ext",
            TermId::ExtSoc => "soc-ext",
            TermId::Hartree => "hartree",
            TermId::ContactOrb => "contact-orb",
            TermId::ContactDarwin => "contact-darwin",
            TermId::DipolarOrb => "dipolar-orb",
            TermId::SooZeemanOrb => "soo-zeeman-orb",
            TermId::SooPaSpin => "soo-pa-spin",
            TermId::SpinSpin => "spin-spin",
            TermId::SocInt => "soc-int",
            TermId::SocPhi2Spin => "soc-phi2-spin",
            TermId::Phi2Field => "phi2-field",
            TermId::PaField => "pa-field",
            TermId::AaOrb => "aa-orb",
            TermId::AaField => "aa-field",
            TermId::AaSpin => "aa-spin",
            TermId::ZeemanField => "zeeman-field",
            TermId::SocExtInt => "soc-ext-int",
        }
    }

    pub fn from_key(key: &str) -> Result<TermId> {
        TermId::ALL
            .into_iter()
            .find(|t| t.key() == key)
            .ok_or_else(|| CoreError::UnknownTerm(key.to_string()))
    }

    pub fn group(self) -> TermGroup {
        use TermId::*;
        match self {
            ExtScalar | ExtDipole | ExtDiamagnetic | ExtZeeman | ExtDarwin | ExtSoc => {
                TermGroup::External
            }
            Hartree | ContactOrb | ContactDarwin | DipolarOrb | SooZeemanOrb | SooPaSpin
            | SpinSpin | SocInt | SocPhi2Spin => TermGroup::Internal,
            Phi2Field | PaField | AaOrb | AaField | AaSpin | ZeemanField | SocExtInt => {
                TermGroup::Coherent
            }
        }
    }

    pub fn mechanism(self) -> Option<Mechanism> {
        match self {
            TermId::ZeemanField => Some(Mechanism::A1),
            TermId::SocExtInt => Some(Mechanism::A2),
            TermId::AaSpin => Some(Mechanism::B1),
            TermId::Phi2Field => Some(Mechanism::B2),
            _ => None,
        }
    }

    fn index(self) -> usize {
        TermId::ALL.iter().position(|t| *t == self).unwrap()
    }

    fn needs_gradient(self) -> bool {
        use TermId::*;
        matches!(self, ExtDipole | ExtSoc | DipolarOrb | SooPaSpin | SocInt | PaField)
    }
}

/// One switch per Hamiltonian term, all on by default. Scenario files list
/// only the switches they flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermToggles {
    on: [bool; TermId::COUNT],
}

impl Default for TermToggles {
    fn default() -> Self {
        Self::all_on()
    }
}

impl TermToggles {
    pub fn all_on() -> Self {
        Self { on: [true; TermId::COUNT] }
    }

    pub fn all_off() -> Self {
        Self { on: [false; TermId::COUNT] }
    }

    pub fn only(ids: impl IntoIterator<Item = TermId>) -> Self {
        let mut t = Self::all_off();
        for id in ids {
            t.set(id, true);
        }
        t
    }

    pub fn without(ids: impl IntoIterator<Item = TermId>) -> Self {
        let mut t = Self::all_on();
        for id in ids {
            t.set(id, false);
        }
        t
    }

    pub fn set(&mut self, id: TermId, v: bool) {
        self.on[id.index()] = v;
    }

    pub fn is_on(&self, id: TermId) -> bool {
        self.on[id.index()]
    }

    fn any_on(&self, ids: &[TermId]) -> bool {
        ids.iter().any(|&t| self.is_on(t))
    }
}

impl Serialize for TermToggles {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // only the flipped switches, so round-tripped configs stay short
        let map: BTreeMap<&str, bool> = TermId::ALL
            .into_iter()
            .filter(|t| !self.is_on(*t))
            .map(|t| (t.key(), false))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TermToggles {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = BTreeMap::<String, bool>::deserialize(d)?;
        let mut t = TermToggles::all_on();
        for (key, v) in map {
            let id = TermId::from_key(&key).map_err(D::Error::custom)?;
            t.set(id, v);
        }
        Ok(t)
    }
}

const EXT_TERMS: [TermId; 6] = [
    TermId::ExtScalar,
    TermId::ExtDipole,
    TermId::ExtDiamagnetic,
    TermId::ExtZeeman,
    TermId::ExtDarwin,
    TermId::ExtSoc,
];

const INT_TERMS: [TermId; 9] = [
    TermId::Hartree,
    TermId::ContactOrb,
    TermId::ContactDarwin,
    TermId::DipolarOrb,
    TermId::SooZeemanOrb,
    TermId::SooPaSpin,
    TermId::SpinSpin,
    TermId::SocInt,
    TermId::SocPhi2Spin,
];

const COH_TERMS: [TermId; 7] = [
    TermId::Phi2Field,
    TermId::PaField,
    TermId::AaOrb,
    TermId::AaField,
    TermId::AaSpin,
    TermId::ZeemanField,
    TermId::SocExtInt,
];

pub fn external_terms() -> &'static [TermId] {
    &EXT_TERMS
}

pub fn internal_terms() -> &'static [TermId] {
    &INT_TERMS
}

pub fn coherent_terms() -> &'static [TermId] {
    &COH_TERMS
}

// out += coeff * v . p phi, p = -i hbar grad. Hermitian only for
// divergence-free v; every v fed in here is either transverse by
// construction or uniform.
fn accumulate_v_dot_p(
    v: &VectorField,
    grad: &[SpinorField; 3],
    coeff: f64,
    k: &PhysicalConstants,
    out: &mut SpinorField,
) {
    let s = Complex64::new(0.0, -k.hbar * coeff);
    for c in 0..2 {
        for i in 0..out.grid.len() {
            let g = v.comps[0][i] * grad[0].comps[c][i]
                + v.comps[1][i] * grad[1].comps[c][i]
                + v.comps[2][i] * grad[2].comps[c][i];
            out.comps[c][i] += s * g;
        }
    }
}

// out += coeff * sigma . (v ^ p) phi with v real and pointwise; the spin
// matrices act after the cross product is assembled per point.
fn accumulate_sigma_v_cross_p(
    v: &VectorField,
    grad: &[SpinorField; 3],
    coeff: f64,
    k: &PhysicalConstants,
    out: &mut SpinorField,
) {
    let mih = Complex64::new(0.0, -k.hbar);
    for i in 0..out.grid.len() {
        let e = [v.comps[0][i], v.comps[1][i], v.comps[2][i]];
        for c in 0..2 {
            let g = [grad[0].comps[c][i], grad[1].comps[c][i], grad[2].comps[c][i]];
            let w = [
                mih * (e[1] * g[2] - e[2] * g[1]),
                mih * (e[2] * g[0] - e[0] * g[2]),
                mih * (e[0] * g[1] - e[1] * g[0]),
            ];
            // sigma_x w_x + sigma_y w_y + sigma_z w_z, acting on the spinor index
            if c == 0 {
                out.comps[0][i] += coeff * w[2];
                out.comps[1][i] += coeff * (w[0] + Complex64::new(0.0, 1.0) * w[1]);
            } else {
                out.comps[0][i] += coeff * (w[0] - Complex64::new(0.0, 1.0) * w[1]);
                out.comps[1][i] -= coeff * w[2];
            }
        }
    }
}

// out += coeff * (a . b)(x) phi(x)
fn accumulate_dot_mul(
    a: &VectorField,
    b: &VectorField,
    coeff: f64,
    phi: &SpinorField,
    out: &mut SpinorField,
) {
    for c in 0..2 {
        for i in 0..out.grid.len() {
            let d = a.comps[0][i] * b.comps[0][i]
                + a.comps[1][i] * b.comps[1][i]
                + a.comps[2][i] * b.comps[2][i];
            out.comps[c][i] += coeff * d * phi.comps[c][i];
        }
    }
}

fn accumulate_external(
    phi: &SpinorField,
    grad: Option<&[SpinorField; 3]>,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
    out: &mut SpinorField,
) {
    let grid = &phi.grid;
    let m = k.mass;
    if tog.is_on(TermId::ExtScalar) {
        if let Some(p) = &ext.phi {
            phi.scalar_mul_accumulate(p, k.q, out);
        }
    }
    if tog.is_on(TermId::ExtDipole) {
        let a = ext.a_at(grid);
        accumulate_v_dot_p(&a, grad.expect("gradient"), -k.q / m, k, out);
    }
    if tog.is_on(TermId::ExtDiamagnetic) {
        let a = ext.a_at(grid);
        let a2 = a.dot_pointwise(&a);
        phi.scalar_mul_accumulate(&a2, k.q * k.q / (2.0 * m), out);
    }
    if tog.is_on(TermId::ExtZeeman) {
        let b = ext.b_at(grid);
        phi.sigma_dot_accumulate(&b, -k.q * k.hbar / (2.0 * m), out);
    }
    if tog.is_on(TermId::ExtDarwin) {
        // zero for every uniform or transverse field; wired for arbitrary
        // user-supplied samples
        let dive = crate::ops::divergence(&ext.e_at(grid));
        phi.scalar_mul_accumulate(&dive, -k.q * k.hbar * k.hbar / (8.0 * m * m * k.c * k.c), out);
    }
    if tog.is_on(TermId::ExtSoc) {
        let e = ext.e_at(grid);
        let coeff = -k.q * k.hbar / (4.0 * m * m * k.c * k.c);
        accumulate_sigma_v_cross_p(&e, grad.expect("gradient"), coeff, k, out);
    }
}

fn accumulate_internal(
    phi: &SpinorField,
    grad: Option<&[SpinorField; 3]>,
    pots: &PotentialSet,
    k: &PhysicalConstants,
    tog: &TermToggles,
    out: &mut SpinorField,
) {
    let m = k.mass;
    if tog.is_on(TermId::Hartree) {
        phi.scalar_mul_accumulate(&pots.phi0, k.q, out);
    }
    if tog.is_on(TermId::ContactOrb) {
        phi.scalar_mul_accumulate(&pots.phi2_orb, k.q, out);
    }
    if tog.is_on(TermId::SocPhi2Spin) {
        phi.scalar_mul_accumulate(&pots.phi2_spin, k.q, out);
    }
    if tog.is_on(TermId::DipolarOrb) {
        accumulate_v_dot_p(&pots.a2_orb, grad.expect("gradient"), -k.q / m, k, out);
    }
    if tog.is_on(TermId::SooPaSpin) {
        accumulate_v_dot_p(&pots.a2_spin, grad.expect("gradient"), -k.q / m, k, out);
    }
    if tog.is_on(TermId::SooZeemanOrb) {
        phi.sigma_dot_accumulate(&pots.b2_orb, -k.q * k.hbar / (2.0 * m), out);
    }
    if tog.is_on(TermId::SpinSpin) {
        phi.sigma_dot_accumulate(&pots.b2_spin, -k.q * k.hbar / (2.0 * m), out);
    }
    if tog.is_on(TermId::ContactDarwin) {
        let coeff = k.q * k.hbar * k.hbar / (8.0 * m * m * k.c * k.c);
        phi.scalar_mul_accumulate(&pots.lap_phi0, coeff, out);
    }
    if tog.is_on(TermId::SocInt) {
        let coeff = k.q * k.hbar / (4.0 * m * m * k.c * k.c);
        accumulate_sigma_v_cross_p(&pots.grad_phi0, grad.expect("gradient"), coeff, k, out);
    }
}

fn accumulate_coherent(
    phi: &SpinorField,
    grad: Option<&[SpinorField; 3]>,
    pots: &PotentialSet,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
    out: &mut SpinorField,
) {
    if ext.a_is_zero() {
        // the defining property of this group
        return;
    }
    let grid = &phi.grid;
    let m = k.mass;
    if tog.is_on(TermId::Phi2Field) {
        phi.scalar_mul_accumulate(&pots.phi2_field, k.q, out);
    }
    if tog.is_on(TermId::PaField) {
        accumulate_v_dot_p(&pots.a2_field, grad.expect("gradient"), -k.q / m, k, out);
    }
    let needs_a = tog.any_on(&[TermId::AaOrb, TermId::AaField, TermId::AaSpin, TermId::SocExtInt]);
    if needs_a {
        let a = ext.a_at(grid);
        let qq_m = k.q * k.q / m;
        if tog.is_on(TermId::AaOrb) {
            accumulate_dot_mul(&a, &pots.a2_orb, qq_m, phi, out);
        }
        if tog.is_on(TermId::AaField) {
            accumulate_dot_mul(&a, &pots.a2_field, qq_m, phi, out);
        }
        if tog.is_on(TermId::AaSpin) {
            accumulate_dot_mul(&a, &pots.a2_spin, qq_m, phi, out);
        }
        if tog.is_on(TermId::SocExtInt) {
            let w = pots.grad_phi0.cross(&a);
            let coeff = -k.q * k.q * k.hbar / (4.0 * m * m * k.c * k.c);
            phi.sigma_dot_accumulate(&w, coeff, out);
        }
    }
    if tog.is_on(TermId::ZeemanField) {
        phi.sigma_dot_accumulate(&pots.b2_field, -k.q * k.hbar / (2.0 * m), out);
    }
}

fn gradient_if_needed(phi: &SpinorField, terms: &[TermId], tog: &TermToggles) -> Option<[SpinorField; 3]> {
    terms
        .iter()
        .any(|&t| tog.is_on(t) && t.needs_gradient())
        .then(|| spinor_gradient(phi))
}

/// Couplings of one electron to the external field sample.
pub fn apply_external(
    phi: &SpinorField,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
) -> Result<SpinorField> {
    phi.grid.same_as(&ext.grid)?;
    let grad = gradient_if_needed(phi, &EXT_TERMS, tog);
    let mut out = SpinorField::zeros(phi.grid.clone());
    accumulate_external(phi, grad.as_ref(), ext, k, tog, &mut out);
    Ok(out)
}

/// Couplings of one electron to the mean field of the others.
pub fn apply_internal(
    phi: &SpinorField,
    pots: &PotentialSet,
    k: &PhysicalConstants,
    tog: &TermToggles,
) -> Result<SpinorField> {
    phi.grid.same_as(&pots.phi0.grid)?;
    let grad = gradient_if_needed(phi, &INT_TERMS, tog);
    let mut out = SpinorField::zeros(phi.grid.clone());
    accumulate_internal(phi, grad.as_ref(), pots, k, tog, &mut out);
    Ok(out)
}

/// The cross couplings between external field and mean field; identically
/// zero whenever the external vector potential vanishes.
pub fn apply_coherent(
    phi: &SpinorField,
    pots: &PotentialSet,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
) -> Result<SpinorField> {
    phi.grid.same_as(&pots.phi0.grid)?;
    phi.grid.same_as(&ext.grid)?;
    let grad = gradient_if_needed(phi, &COH_TERMS, tog);
    let mut out = SpinorField::zeros(phi.grid.clone());
    accumulate_coherent(phi, grad.as_ref(), pots, ext, k, tog, &mut out);
    Ok(out)
}

/// All three interaction groups with one shared gradient computation.
pub fn apply_interactions(
    phi: &SpinorField,
    pots: &PotentialSet,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
) -> Result<SpinorField> {
    phi.grid.same_as(&pots.phi0.grid)?;
    phi.grid.same_as(&ext.grid)?;
    let grad = gradient_if_needed(phi, &TermId::ALL, tog);
    let mut out = SpinorField::zeros(phi.grid.clone());
    accumulate_external(phi, grad.as_ref(), ext, k, tog, &mut out);
    accumulate_internal(phi, grad.as_ref(), pots, k, tog, &mut out);
    accumulate_coherent(phi, grad.as_ref(), pots, ext, k, tog, &mut out);
    Ok(out)
}

/// -hbar^2/2m lap phi by spectral differentiation.
pub fn kinetic(phi: &SpinorField, k: &PhysicalConstants) -> SpinorField {
    let mut out = SpinorSpectrum::of(phi).laplacian();
    out.scale(Complex64::new(-k.hbar * k.hbar / (2.0 * k.mass), 0.0));
    out
}

/// Kinetic plus all enabled interaction terms; the generator the
/// propagator integrates (rest energy excluded, tracked separately).
pub fn apply_hamiltonian(
    phi: &SpinorField,
    pots: &PotentialSet,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
) -> Result<SpinorField> {
    phi.grid.same_as(&pots.phi0.grid)?;
    phi.grid.same_as(&ext.grid)?;
    let spec = SpinorSpectrum::of(phi);
    let grad = [spec.derivative(0), spec.derivative(1), spec.derivative(2)];
    let mut out = spec.laplacian();
    out.scale(Complex64::new(-k.hbar * k.hbar / (2.0 * k.mass), 0.0));
    accumulate_external(phi, Some(&grad), ext, k, tog, &mut out);
    accumulate_internal(phi, Some(&grad), pots, k, tog, &mut out);
    accumulate_coherent(phi, Some(&grad), pots, ext, k, tog, &mut out);
    Ok(out)
}

/// <phi| term |phi>. Real for Hermitian terms; the imaginary residue is a
/// discretization diagnostic left to the caller.
pub fn term_energy(
    term: TermId,
    phi: &SpinorField,
    pots: &PotentialSet,
    ext: &ExternalSample,
    k: &PhysicalConstants,
) -> Result<f64> {
    let tog = TermToggles::only([term]);
    let applied = match term.group() {
        TermGroup::External => apply_external(phi, ext, k, &tog)?,
        TermGroup::Internal => apply_internal(phi, pots, k, &tog)?,
        TermGroup::Coherent => apply_coherent(phi, pots, ext, k, &tog)?,
    };
    Ok(phi.inner(&applied).re)
}

/// Every enabled term's expectation value, sharing one gradient pass.
pub fn term_energies(
    phi: &SpinorField,
    pots: &PotentialSet,
    ext: &ExternalSample,
    k: &PhysicalConstants,
    tog: &TermToggles,
) -> Result<Vec<(TermId, f64)>> {
    phi.grid.same_as(&pots.phi0.grid)?;
    phi.grid.same_as(&ext.grid)?;
    let grad = gradient_if_needed(phi, &TermId::ALL, tog);
    let mut out = Vec::new();
    for term in TermId::ALL {
        if !tog.is_on(term) {
            continue;
        }
        let mut applied = SpinorField::zeros(phi.grid.clone());
        let only = TermToggles::only([term]);
        match term.group() {
            TermGroup::External => {
                accumulate_external(phi, grad.as_ref(), ext, k, &only, &mut applied)
            }
            TermGroup::Internal => {
                accumulate_internal(phi, grad.as_ref(), pots, k, &only, &mut applied)
            }
            TermGroup::Coherent => {
                accumulate_coherent(phi, grad.as_ref(), pots, ext, k, &only, &mut applied)
            }
        }
        out.push((term, phi.inner(&applied).re));
    }
    Ok(out)
}

pub fn kinetic_energy(phi: &SpinorField, k: &PhysicalConstants) -> f64 {
    phi.inner(&kinetic(phi, k)).re
}

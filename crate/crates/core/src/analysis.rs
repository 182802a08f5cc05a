//! Dimensionless magnitude analysis of the three Hamiltonian sectors, the
//! laser-fluence front end, and the channel decomposition of a run's energy
//! table.
//!
//! The scale formulas take SI inputs and return SI outputs; they are
//! deliberately independent of the grid machinery and double as oracles for
//! the simulated energy decomposition. The decomposition report is a pure
//! rearrangement of the per-term energies into source-times-operator cells.

use crate::constants::codata;
use crate::error::{CoreError, Result};
use crate::hamiltonian::{Mechanism, TermId};
use crate::propagator::Trajectory;

/// Peak field of a flat-top pulse carrying `fluence_mj_cm2` over
/// `duration_s`: c eps0 E^2 / 2 = 10 * fluence / duration.
pub fn fluence_to_field(fluence_mj_cm2: f64, duration_s: f64) -> f64 {
    let flux = 10.0 * fluence_mj_cm2 / duration_s; // W/m^2
    (2.0 * flux / (codata::C * codata::EPS0)).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct YieldInputs {
    /// characteristic electron separation, m
    pub r_ij: f64,
    /// peak external electric field, V/m
    pub e_field: f64,
    /// laser wavelength, m
    pub wavelength: f64,
}

/// Light-induced mean field measured against the magnetic-ordering energy,
/// eta = (r_ij / lambda_C) * (e E lambda / m c^2). Dimensionless.
pub fn yield_parameter(inp: YieldInputs) -> f64 {
    let lambda_c = codata::H / (codata::M_E * codata::C);
    let mc2 = codata::M_E * codata::C * codata::C;
    (inp.r_ij / lambda_c) * (codata::E * inp.e_field * inp.wavelength / mc2)
}

/// Energy scales of the three sectors for an N-electron system, SI joules.
#[derive(Debug, Clone, Copy)]
pub struct MagnitudeEstimates {
    /// external coupling by order: e Phi * [1, lambda_C/lambda, (lambda_C/lambda)^2]
    pub u_ext: [f64; 3],
    /// internal mean field: Coulomb and its 1/c^2 correction
    pub u_int: [f64; 2],
    /// coherent light-induced sector (purely second order)
    pub u_int_ext: f64,
    /// u_int_ext / u_int[1]
    pub eta: f64,
}

pub fn magnitude_estimates(n_electrons: f64, inp: YieldInputs) -> MagnitudeEstimates {
    let lambda_c = codata::H / (codata::M_E * codata::C);
    let mc2 = codata::M_E * codata::C * codata::C;
    let e_bar_sq = codata::E * codata::E / (4.0 * std::f64::consts::PI * codata::EPS0);
    let phi = inp.e_field * inp.wavelength;
    let x = lambda_c / inp.wavelength;
    let coulomb = n_electrons * e_bar_sq / inp.r_ij;
    let y = lambda_c / inp.r_ij;
    let u_int2 = coulomb * y * y;
    let u_int_ext = coulomb * y * (codata::E * phi / mc2);
    MagnitudeEstimates {
        u_ext: [codata::E * phi, codata::E * phi * x, codata::E * phi * x * x],
        u_int: [coulomb, u_int2],
        u_int_ext,
        eta: u_int_ext / u_int2,
    }
}

/// Orbital reduction that sources an induced potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceLabel {
    Rho0,
    JOrb,
    JSpin,
    JField,
    Rho2Field,
}

impl SourceLabel {
    pub const ALL: [SourceLabel; 5] = [
        SourceLabel::Rho0,
        SourceLabel::JOrb,
        SourceLabel::JSpin,
        SourceLabel::JField,
        SourceLabel::Rho2Field,
    ];

    pub fn key(self) -> &'static str {
        match self {
            SourceLabel::Rho0 => "rho0",
            SourceLabel::JOrb => "j-orb",
            SourceLabel::JSpin => "j-spin",
            SourceLabel::JField => "j-field",
            SourceLabel::Rho2Field => "rho2-field",
        }
    }
}

/// Coupling structure through which an induced potential acts back on the
/// electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorLabel {
    /// scalar potential on the charge
    Coulomb,
    /// induced vector potential against the momentum
    ParamagneticMomentum,
    /// induced vector potential against the drive's vector potential
    ParamagneticDrive,
    /// spin against the curl of the induced vector potential
    Zeeman,
    /// spin against the mean-field gradient crossed with the drive
    SpinOrbit,
}

impl OperatorLabel {
    pub const ALL: [OperatorLabel; 5] = [
        OperatorLabel::Coulomb,
        OperatorLabel::ParamagneticMomentum,
        OperatorLabel::ParamagneticDrive,
        OperatorLabel::Zeeman,
        OperatorLabel::SpinOrbit,
    ];

    pub fn key(self) -> &'static str {
        match self {
            OperatorLabel::Coulomb => "coulomb",
            OperatorLabel::ParamagneticMomentum => "paramagnetic-momentum",
            OperatorLabel::ParamagneticDrive => "paramagnetic-drive",
            OperatorLabel::Zeeman => "zeeman",
            OperatorLabel::SpinOrbit => "spin-orbit",
        }
    }
}

/// Whether and how a coupling channel touches the spin degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinCharacter {
    SpinFree,
    /// own spin against a charge-sourced field
    SpinOrbit,
    /// spin and orbital motion on opposite partners
    SpinOtherOrbit,
}

impl SpinCharacter {
    pub fn label(self) -> &'static str {
        match self {
            SpinCharacter::SpinFree => "spin-free",
            SpinCharacter::SpinOrbit => "spin-orbit",
            SpinCharacter::SpinOtherOrbit => "spin-other-orbit",
        }
    }
}

/// One occupied cell of the source-times-operator table: the energy a drive
/// -mediated coupling channel carries at one instant.
#[derive(Debug, Clone, Copy)]
pub struct MechanismCell {
    pub term: TermId,
    pub source: SourceLabel,
    pub operator: OperatorLabel,
    pub character: SpinCharacter,
    pub mechanism: Option<Mechanism>,
    pub energy: f64,
}

/// Channel decomposition of the drive-coupled energy at one instant: the two
/// couplings of the drive directly to the spin, and the seven channels that
/// run through an induced potential. Cell energies are exact copies of the
/// per-term energy table, only rearranged.
#[derive(Debug, Clone)]
pub struct MechanismReport {
    pub t: f64,
    /// drive on the spin with no induced mediator
    pub direct: Vec<(TermId, f64)>,
    pub cells: Vec<MechanismCell>,
    /// sum of all cells; the whole drive-mediated sector
    pub coherent_total: f64,
}

fn cell_geometry(term: TermId) -> Option<(SourceLabel, OperatorLabel, SpinCharacter)> {
    match term {
        TermId::PaField => Some((
            SourceLabel::JField,
            OperatorLabel::ParamagneticMomentum,
            SpinCharacter::SpinFree,
        )),
        TermId::AaOrb => Some((
            SourceLabel::JOrb,
            OperatorLabel::ParamagneticDrive,
            SpinCharacter::SpinFree,
        )),
        TermId::AaField => Some((
            SourceLabel::JField,
            OperatorLabel::ParamagneticDrive,
            SpinCharacter::SpinFree,
        )),
        TermId::AaSpin => Some((
            SourceLabel::JSpin,
            OperatorLabel::ParamagneticDrive,
            SpinCharacter::SpinOtherOrbit,
        )),
        TermId::ZeemanField => Some((
            SourceLabel::JField,
            OperatorLabel::Zeeman,
            SpinCharacter::SpinOtherOrbit,
        )),
        TermId::SocExtInt => Some((
            SourceLabel::Rho0,
            OperatorLabel::SpinOrbit,
            SpinCharacter::SpinOrbit,
        )),
        TermId::Phi2Field => Some((
            SourceLabel::Rho2Field,
            OperatorLabel::Coulomb,
            SpinCharacter::SpinOrbit,
        )),
        _ => None,
    }
}

/// Rearrange one per-term energy table into the channel report. Every channel
/// must be present in the table (a toggled-off term has no energy to report).
pub fn mechanism_report(t: f64, energies: &[(TermId, f64)]) -> Result<MechanismReport> {
    let energy_of = |term: TermId| {
        energies
            .iter()
            .find(|(id, _)| *id == term)
            .map(|(_, e)| *e)
            .ok_or(CoreError::MissingTermEnergy(term.key()))
    };
    let direct = vec![
        (TermId::ExtZeeman, energy_of(TermId::ExtZeeman)?),
        (TermId::ExtSoc, energy_of(TermId::ExtSoc)?),
    ];
    let cells = TermId::ALL
        .into_iter()
        .filter_map(|term| cell_geometry(term).map(|geo| (term, geo)))
        .map(|(term, (source, operator, character))| {
            Ok(MechanismCell {
                term,
                source,
                operator,
                character,
                mechanism: term.mechanism(),
                energy: energy_of(term)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let coherent_total = cells.iter().map(|c| c.energy).sum();
    Ok(MechanismReport { t, direct, cells, coherent_total })
}

/// The channel report along a whole recorded trajectory.
pub fn mechanism_reports(traj: &Trajectory) -> Result<Vec<MechanismReport>> {
    traj.observables
        .iter()
        .map(|row| mechanism_report(row.t, &row.term_energies))
        .collect()
}

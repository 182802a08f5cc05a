//! Run artifacts: a directory holding a JSON manifest, an observables table
//! in CSV, and flat binary field snapshots.
//!
//! The layout is meant to be read without this crate: snapshots are raw
//! little-endian f64 in z-fastest row-major order (vectors component-major,
//! x block then y then z), and the manifest indexes every file it sits next
//! to. Floats in the CSV print in shortest round-trip form, so reading the
//! table back reproduces the run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::error::{CoreError, Result};
use crate::hamiltonian::TermId;
use crate::propagator::{Observables, Scenario, SnapshotData, Trajectory};
use crate::solver::ZeroModePolicy;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const OBSERVABLES_FILE: &str = "observables.csv";

/// Column names of the observables table for a run with `n_orbitals`
/// orbitals; term-energy columns follow, named by their toggle keys.
pub fn scalar_columns(n_orbitals: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((0..n_orbitals).map(|i| format!("norm-{i}")));
    for i in 0..n_orbitals {
        for ax in ["x", "y", "z"] {
            cols.push(format!("mag-{i}-{ax}"));
        }
    }
    for ax in ["x", "y", "z"] {
        cols.push(format!("mag-{ax}"));
    }
    for ax in ["x", "y", "z"] {
        cols.push(format!("dipole-{ax}"));
    }
    cols.extend(
        ["kinetic", "rest", "total", "continuity", "boundary-density"]
            .map(str::to_string),
    );
    cols
}

fn csv_line(row: &Observables) -> String {
    let mut vals: Vec<String> = vec![row.t.to_string()];
    vals.extend(row.norms.iter().map(f64::to_string));
    for m in &row.magnetizations {
        vals.extend(m.iter().map(f64::to_string));
    }
    vals.extend(row.magnetization_total.iter().map(f64::to_string));
    vals.extend(row.dipole.iter().map(f64::to_string));
    vals.push(row.kinetic_energy.to_string());
    vals.push(row.rest_energy.to_string());
    vals.push(row.total_energy.to_string());
    vals.push(row.continuity_residual.to_string());
    vals.push(row.boundary_density_ratio.to_string());
    vals.extend(row.term_energies.iter().map(|(_, e)| e.to_string()));
    vals.join(",")
}

fn snapshot_bytes(data: &SnapshotData) -> Vec<u8> {
    let slices: Vec<&[f64]> = match data {
        SnapshotData::Scalar(f) => vec![&f.data],
        SnapshotData::Vector(f) => f.comps.iter().map(Vec::as_slice).collect(),
    };
    let n: usize = slices.iter().map(|s| s.len()).sum();
    let mut bytes = Vec::with_capacity(n * 8);
    for s in slices {
        for v in s {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

fn deviation_notes(scenario: &Scenario) -> Vec<serde_json::Value> {
    let mut notes = vec![
        json!({
            "key": "hermitian-current",
            "note": "induced-field sources use the symmetrized orbital current so they stay real",
        }),
        json!({
            "key": "soc-pointwise-ordering",
            "note": "spin-orbit factors apply the field pointwise before the momentum acts; the difference is a field-divergence term",
        }),
    ];
    if matches!(scenario.solver.zero_mode_policy, ZeroModePolicy::Drop) {
        notes.push(json!({
            "key": "uniform-background",
            "note": "the k = 0 mode of periodic potential solves is dropped; charged sources imply a neutralizing background",
        }));
    }
    if scenario.solver.padding_factor > 1 {
        notes.push(json!({
            "key": "kernel-padding",
            "note": "isolated solves embed the box in a grid enlarged by the padding factor and tabulate the open-space kernel there",
        }));
    }
    notes
}

/// Write a finished run into `dir` (created if missing): `manifest.json`,
/// `observables.csv`, and one `.bin` file per snapshot. Returns the manifest
/// path.
pub fn write_run(dir: &Path, scenario: &Scenario, traj: &Trajectory) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;

    let n_orbitals = scenario.orbitals.len();
    let mut columns = scalar_columns(n_orbitals);
    if let Some(first) = traj.observables.first() {
        columns.extend(first.term_energies.iter().map(|(t, _)| t.key().to_string()));
    }
    let mut csv = columns.join(",");
    csv.push('\n');
    for row in &traj.observables {
        csv.push_str(&csv_line(row));
        csv.push('\n');
    }
    fs::write(dir.join(OBSERVABLES_FILE), csv)?;

    let mut counters = std::collections::BTreeMap::new();
    let mut index = Vec::new();
    for snap in &traj.snapshots {
        let seq = counters.entry(snap.kind.key()).or_insert(0usize);
        let file = format!("{}-{:04}.bin", snap.kind.key(), seq);
        *seq += 1;
        fs::write(dir.join(&file), snapshot_bytes(&snap.data))?;
        index.push(json!({
            "file": file,
            "field": snap.kind.key(),
            "t": snap.t,
            "components": match &snap.data {
                SnapshotData::Scalar(_) => 1,
                SnapshotData::Vector(_) => 3,
            },
            "dtype": "f64",
            "byte-order": "little-endian",
            "layout": "z-fastest row-major; vectors component-major",
        }));
    }

    let k = &traj.constants;
    let manifest = json!({
        "grid": {
            "n": traj.grid.n,
            "lengths": traj.grid.lengths,
            "spacing": traj.grid.spacing(),
        },
        "constants": {
            "hbar": k.hbar,
            "mass": k.mass,
            "charge": k.q,
            "c": k.c,
            "eps0": k.eps0,
            "mu0": k.mu0,
        },
        "scenario": serde_json::to_value(scenario)
            .map_err(|e| CoreError::Parse(e.to_string()))?,
        "warnings": traj.warnings,
        "deviations": deviation_notes(scenario),
        "observables": {
            "file": OBSERVABLES_FILE,
            "columns": columns,
            "rows": traj.observables.len(),
        },
        "snapshots": index,
    });
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(path)
}

/// Raw little-endian f64 array, the snapshot wire format.
pub fn read_flat_f64(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(CoreError::Parse(format!(
            "{}: length {} is not a whole number of f64",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn parse_field(cell: &str, col: &str, line: usize) -> Result<f64> {
    cell.parse().map_err(|_| {
        CoreError::Parse(format!("observables row {line}, column {col}: bad float `{cell}`"))
    })
}

/// Read an observables table back into rows. The header fixes the orbital
/// count and the recorded term set; anything malformed is a parse error, not
/// a default.
pub fn load_observables(path: &Path) -> Result<Vec<Observables>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CoreError::Parse("observables table is empty".into()))?
        .split(',')
        .collect();
    let n_orbitals = header.iter().filter(|c| c.starts_with("norm-")).count();
    let scalars = scalar_columns(n_orbitals);
    if header.len() < scalars.len()
        || header[..scalars.len()].iter().zip(&scalars).any(|(a, b)| a != b)
    {
        return Err(CoreError::Parse(
            "observables header does not match the fixed column layout".into(),
        ));
    }
    let terms: Vec<TermId> =
        header[scalars.len()..].iter().map(|c| TermId::from_key(c)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (li, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(CoreError::Parse(format!(
                "observables row {}: {} cells, header has {}",
                li + 1,
                cells.len(),
                header.len()
            )));
        }
        let mut at = 0usize;
        let mut next = |n: usize| {
            let s = at;
            at += n;
            s..at
        };
        let take1 = |r: std::ops::Range<usize>, rows_cells: &[&str], li: usize| -> Result<f64> {
            parse_field(rows_cells[r.start], header[r.start], li)
        };
        let t = take1(next(1), &cells, li + 1)?;
        let norms = next(n_orbitals)
            .map(|i| parse_field(cells[i], header[i], li + 1))
            .collect::<Result<Vec<_>>>()?;
        let mut magnetizations = Vec::with_capacity(n_orbitals);
        for _ in 0..n_orbitals {
            let r = next(3);
            let mut m = [0.0; 3];
            for (slot, i) in m.iter_mut().zip(r) {
                *slot = parse_field(cells[i], header[i], li + 1)?;
            }
            magnetizations.push(m);
        }
        let mut vec3 = |()| -> Result<[f64; 3]> {
            let r = next(3);
            let mut m = [0.0; 3];
            for (slot, i) in m.iter_mut().zip(r) {
                *slot = parse_field(cells[i], header[i], li + 1)?;
            }
            Ok(m)
        };
        let magnetization_total = vec3(())?;
        let dipole = vec3(())?;
        let kinetic_energy = take1(next(1), &cells, li + 1)?;
        let rest_energy = take1(next(1), &cells, li + 1)?;
        let total_energy = take1(next(1), &cells, li + 1)?;
        let continuity_residual = take1(next(1), &cells, li + 1)?;
        let boundary_density_ratio = take1(next(1), &cells, li + 1)?;
        let term_energies = terms
            .iter()
            .zip(next(terms.len()))
            .map(|(term, i)| Ok((*term, parse_field(cells[i], header[i], li + 1)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Observables {
            t,
            norms,
            magnetizations,
            magnetization_total,
            dipole,
            kinetic_energy,
            rest_energy,
            term_energies,
            total_energy,
            continuity_residual,
            boundary_density_ratio,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::{run, Scenario};
    use crate::synth::GaussianSpec;

    fn scenario_toml() -> &'static str {
        r#"
            [grid]
            n = [12, 12, 12]
            lengths = [6.0, 6.0, 6.0]

            [[orbitals]]
            center = [2.6, 3.0, 3.0]
            width = 1.0
            spin = [0.0, 0.0, 1.0]

            [[orbitals]]
            center = [3.4, 3.0, 3.0]
            width = 1.0
            spin = [1.0, 0.0, 0.0]

            [evolution]
            dt = 0.02
            t-end = 0.08

            [output]
            every = 2
            snapshot-every = 4
            fields = ["rho0", "j0"]
        "#
    }

    #[test]
    fn run_directory_round_trips_the_observables_bit_for_bit() {
        let sc = Scenario::from_toml(scenario_toml()).unwrap();
        let traj = run(&sc).unwrap();
        assert!(!traj.snapshots.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = write_run(dir.path(), &sc, &traj).unwrap();

        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
        assert_eq!(manifest["grid"]["n"], json!([12, 12, 12]));
        assert_eq!(manifest["observables"]["rows"], json!(traj.observables.len()));
        let cols = manifest["observables"]["columns"].as_array().unwrap();
        assert_eq!(cols[0], "t");
        assert_eq!(
            cols.len(),
            scalar_columns(2).len() + traj.observables[0].term_energies.len()
        );
        let dev_keys: Vec<_> = manifest["deviations"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d["key"].as_str().unwrap().to_string())
            .collect();
        assert!(dev_keys.contains(&"hermitian-current".to_string()));
        assert!(dev_keys.contains(&"uniform-background".to_string()));
        assert!(!dev_keys.contains(&"kernel-padding".to_string()));

        let rows = load_observables(&dir.path().join(OBSERVABLES_FILE)).unwrap();
        assert_eq!(rows.len(), traj.observables.len());
        for (a, b) in rows.iter().zip(&traj.observables) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.norms.len(), b.norms.len());
            for (x, y) in a.norms.iter().zip(&b.norms) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.total_energy.to_bits(), b.total_energy.to_bits());
            assert_eq!(a.term_energies.len(), b.term_energies.len());
            for ((ta, ea), (tb, eb)) in a.term_energies.iter().zip(&b.term_energies) {
                assert_eq!(ta, tb);
                assert_eq!(ea.to_bits(), eb.to_bits());
            }
        }
    }

    #[test]
    fn snapshot_files_hold_the_fields_verbatim() {
        let sc = Scenario::from_toml(scenario_toml()).unwrap();
        let traj = run(&sc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run(dir.path(), &sc, &traj).unwrap();

        let mut seen_vector = false;
        let mut counters = std::collections::BTreeMap::new();
        for snap in &traj.snapshots {
            let seq = counters.entry(snap.kind.key()).or_insert(0usize);
            let file = dir.path().join(format!("{}-{:04}.bin", snap.kind.key(), seq));
            *seq += 1;
            let vals = read_flat_f64(&file).unwrap();
            match &snap.data {
                SnapshotData::Scalar(f) => {
                    assert_eq!(vals.len(), f.data.len());
                    for (a, b) in vals.iter().zip(&f.data) {
                        assert_eq!(a.to_bits(), b.to_bits());
                    }
                }
                SnapshotData::Vector(f) => {
                    seen_vector = true;
                    let n = f.comps[0].len();
                    assert_eq!(vals.len(), 3 * n);
                    for c in 0..3 {
                        for (a, b) in vals[c * n..(c + 1) * n].iter().zip(&f.comps[c]) {
                            assert_eq!(a.to_bits(), b.to_bits());
                        }
                    }
                }
            }
        }
        assert!(seen_vector, "j0 snapshots should exercise the vector layout");
    }

    #[test]
    fn padded_solver_and_orbital_count_show_up_in_the_manifest() {
        let mut sc = Scenario::from_toml(scenario_toml()).unwrap();
        sc.solver.padding_factor = 2;
        sc.evolution.t_end = 0.0;
        sc.output.snapshot_every = 0;
        sc.orbitals.push(GaussianSpec {
            center: [3.0, 3.6, 3.0],
            width: 1.0,
            momentum: [0.0; 3],
            spin: [0.0, 1.0, 0.0],
        });
        let traj = run(&sc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = write_run(dir.path(), &sc, &traj).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(manifest_path).unwrap()).unwrap();
        let dev_keys: Vec<_> = manifest["deviations"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d["key"].as_str().unwrap().to_string())
            .collect();
        assert!(dev_keys.contains(&"kernel-padding".to_string()));
        assert_eq!(manifest["scenario"]["orbitals"].as_array().unwrap().len(), 3);
        let rows = load_observables(&dir.path().join(OBSERVABLES_FILE)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].norms.len(), 3);
    }
}

//! Grid dumps with columns `t, y, Dy, orbit, k`.
//!
//! Orbit rows carry `orbit = a|b` and `k = 0..N`; `Dy` is the forward
//! difference quotient and is empty at `k = N`. One final row with
//! `orbit = omega0` holds the value at the fixed point. Degenerate orbits
//! are omitted.

use std::collections::HashMap;
use std::path::Path;

use hahn_varcalc::{GridFunction, Lattice, Side};

use crate::error::CliError;
use crate::json::fmt17;

pub const HEADER: [&str; 5] = ["t", "y", "Dy", "orbit", "k"];

pub fn write_grid(path: &Path, gf: &GridFunction) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::input(format!("cannot write `{}`: {e}", path.display())))?;
    w.write_record(HEADER)?;
    let lattice = gf.lattice();
    let n = lattice.depth();
    for side in [Side::A, Side::B] {
        let orbit = lattice.orbit(side);
        if orbit.is_degenerate() {
            continue;
        }
        for (k, (&t, &y)) in orbit.points().iter().zip(gf.values(side)).enumerate() {
            let dy = if k < n {
                fmt17(gf.grid_derivative(side, k)?)
            } else {
                String::new()
            };
            w.write_record([
                fmt17(t),
                fmt17(y),
                dy,
                side.label().to_string(),
                k.to_string(),
            ])?;
        }
    }
    w.write_record([
        fmt17(lattice.omega0()),
        fmt17(gf.value_omega0()),
        String::new(),
        "omega0".into(),
        String::new(),
    ])?;
    w.flush()?;
    Ok(())
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs()))
}

/// Reads a candidate written in the [`write_grid`] layout onto `lattice`.
/// Every orbit point and the `omega0` row must be present exactly once.
pub fn read_grid(path: &Path, lattice: &Lattice) -> Result<GridFunction, CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::input(format!("cannot read candidate `{}`: {e}", path.display())))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::input(format!("candidate is missing column `{name}`")))
    };
    let (ct, cy, co, ck) = (col("t")?, col("y")?, col("orbit")?, col("k")?);
    let n = lattice.depth();
    let mut seen: HashMap<(String, usize), f64> = HashMap::new();
    let mut omega0_value = None;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |c: usize| rec.get(c).unwrap_or("").trim();
        let num = |c: usize| {
            field(c)
                .parse::<f64>()
                .map_err(|_| CliError::at(row, c + 1, format!("`{}` is not a number", field(c))))
        };
        let t = num(ct)?;
        let y = num(cy)?;
        match field(co) {
            "omega0" => {
                if omega0_value.replace(y).is_some() {
                    return Err(CliError::at(row, co + 1, "second omega0 row"));
                }
                if !close(t, lattice.omega0()) {
                    return Err(CliError::at(
                        row,
                        ct + 1,
                        format!(
                            "omega0 row has t = {t}, lattice omega0 is {}",
                            lattice.omega0()
                        ),
                    ));
                }
            }
            label @ ("a" | "b") => {
                let side = if label == "a" { Side::A } else { Side::B };
                let k: usize = field(ck).parse().map_err(|_| {
                    CliError::at(row, ck + 1, format!("`{}` is not an index", field(ck)))
                })?;
                let orbit = lattice.orbit(side);
                if orbit.is_degenerate() {
                    return Err(CliError::at(
                        row,
                        co + 1,
                        format!("orbit {label} is degenerate and takes no rows"),
                    ));
                }
                if k > n {
                    return Err(CliError::at(
                        row,
                        ck + 1,
                        format!("index {k} exceeds the lattice depth {n}"),
                    ));
                }
                if !close(t, orbit.points()[k]) {
                    return Err(CliError::at(
                        row,
                        ct + 1,
                        format!(
                            "t = {t} does not match lattice point {} of orbit {label}",
                            orbit.points()[k]
                        ),
                    ));
                }
                if seen.insert((label.into(), k), y).is_some() {
                    return Err(CliError::at(
                        row,
                        ck + 1,
                        format!("duplicate row for orbit {label}, k = {k}"),
                    ));
                }
            }
            other => {
                return Err(CliError::at(
                    row,
                    co + 1,
                    format!("unknown orbit `{other}`"),
                ))
            }
        }
    }
    let w0 = omega0_value.ok_or_else(|| CliError::input("candidate has no omega0 row"))?;
    let mut values = [Vec::new(), Vec::new()];
    for (slot, side) in [Side::A, Side::B].into_iter().enumerate() {
        let label = side.label();
        values[slot] = if lattice.orbit(side).is_degenerate() {
            vec![w0; n + 1]
        } else {
            (0..=n)
                .map(|k| {
                    seen.get(&(label.to_string(), k)).copied().ok_or_else(|| {
                        CliError::input(format!("candidate does not match the depth-{n} lattice: orbit {label} has no row k = {k}"))
                    })
                })
                .collect::<Result<_, _>>()?
        };
    }
    let [va, vb] = values;
    Ok(GridFunction::new(lattice.clone(), va, vb, w0)?)
}

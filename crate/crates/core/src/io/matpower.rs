//! Reader for the bus, gen and branch tables of MATPOWER case files.
//!
//! Bus numbers are mapped to 0-based positions in file order. Line charging
//! is split as a shunt susceptance `b/2` at each end, bus shunts `Gs + jBs`
//! are given in MW/MVAr at 1 p.u. and divided by the base. `rateA` becomes
//! the per-unit current limit (0 means unlimited). Generators at the same
//! bus are aggregated; out-of-service generators and branches are skipped.
//! Parallel branches are merged into one equivalent branch.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{Branch, Bus, BusKind, NetworkCase, Units};
use crate::operational::Snapshot;

/// A parsed case with the demand of the file as its base snapshot.
#[derive(Clone, Debug)]
pub struct MatpowerCase {
    pub case: NetworkCase,
    pub base_snapshot: Snapshot,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(k) => &line[..k],
        None => line,
    }
}

/// Scalar assignment `mpc.<name> = value;`.
fn scalar(text: &str, name: &str) -> Option<f64> {
    let key = format!("mpc.{name}");
    text.lines().map(strip_comment).find_map(|l| {
        let l = l.trim();
        let rest = l.strip_prefix(&key)?.trim_start();
        let rest = rest.strip_prefix('=')?;
        rest.trim().trim_end_matches(';').trim().parse().ok()
    })
}

/// Matrix assignment `mpc.<name> = [ ... ];` as rows of numbers.
fn matrix(text: &str, name: &str) -> Result<Option<Vec<Vec<f64>>>> {
    let key = format!("mpc.{name}");
    let mut lines = text.lines().enumerate();
    let (start, first) = loop {
        let Some((k, raw)) = lines.next() else {
            return Ok(None);
        };
        let l = strip_comment(raw).trim();
        if let Some(rest) = l.strip_prefix(&key) {
            let rest = rest.trim_start();
            if let Some(rest) = rest.strip_prefix('=') {
                let rest = rest.trim_start();
                let Some(body) = rest.strip_prefix('[') else {
                    return Err(Error::parse(format!("line {}", k + 1), format!("`{key}` is not a matrix")));
                };
                break (k, body.to_string());
            }
        }
    };
    let mut body = String::new();
    let mut chunk = first;
    loop {
        if let Some(end) = chunk.find(']') {
            body.push_str(&chunk[..end]);
            break;
        }
        body.push_str(&chunk);
        body.push('\n');
        match lines.next() {
            Some((_, raw)) => chunk = strip_comment(raw).to_string(),
            None => {
                return Err(Error::parse(
                    format!("line {}", start + 1),
                    format!("unterminated matrix `{key}`"),
                ))
            }
        }
    }
    let mut rows = Vec::new();
    for row in body.split([';', '\n']) {
        let row = row.trim();
        if row.is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = row
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect();
        let vals = vals.map_err(|e| {
            Error::parse(format!("`{key}` near line {}", start + 1), format!("bad number in `{row}`: {e}"))
        })?;
        rows.push(vals);
    }
    Ok(Some(rows))
}

fn need(rows: &[Vec<f64>], table: &str, cols: usize) -> Result<()> {
    for (k, r) in rows.iter().enumerate() {
        if r.len() < cols {
            return Err(Error::parse(
                format!("mpc.{table} row {}", k + 1),
                format!("expected at least {cols} columns, found {}", r.len()),
            ));
        }
    }
    Ok(())
}

#[derive(Default)]
struct GenSum {
    pg: f64,
    qmin: f64,
    qmax: f64,
    pmin: f64,
    pmax: f64,
    vg: Option<f64>,
}

/// Parses MATPOWER case text. Powers in the result are per-unit.
pub fn parse_matpower(text: &str, name: &str) -> Result<MatpowerCase> {
    let base = scalar(text, "baseMVA").ok_or_else(|| Error::parse("mpc.baseMVA", "missing"))?;
    if !(base > 0.0) {
        return Err(Error::parse("mpc.baseMVA", "must be positive"));
    }
    let bus = matrix(text, "bus")?.ok_or_else(|| Error::parse("mpc.bus", "missing"))?;
    let gen = matrix(text, "gen")?.unwrap_or_default();
    let branch = matrix(text, "branch")?.ok_or_else(|| Error::parse("mpc.branch", "missing"))?;
    need(&bus, "bus", 13)?;
    need(&gen, "gen", 10)?;
    need(&branch, "branch", 11)?;

    let mut index = HashMap::new();
    for (k, r) in bus.iter().enumerate() {
        if index.insert(r[0] as i64, k).is_some() {
            return Err(Error::parse(format!("mpc.bus row {}", k + 1), format!("duplicate bus {}", r[0])));
        }
    }
    let lookup = |table: &str, row: usize, id: f64| {
        index
            .get(&(id as i64))
            .copied()
            .ok_or_else(|| Error::parse(format!("mpc.{table} row {}", row + 1), format!("unknown bus {id}")))
    };

    let mut gens: BTreeMap<usize, GenSum> = BTreeMap::new();
    for (k, r) in gen.iter().enumerate() {
        if r[7] <= 0.0 {
            continue;
        }
        let j = lookup("gen", k, r[0])?;
        let g = gens.entry(j).or_default();
        g.pg += r[1] / base;
        g.qmax += r[3] / base;
        g.qmin += r[4] / base;
        g.pmax += r[8] / base;
        g.pmin += r[9] / base;
        g.vg.get_or_insert(r[5]);
    }

    let mut buses = Vec::with_capacity(bus.len());
    let mut loads = Vec::with_capacity(bus.len());
    for (k, r) in bus.iter().enumerate() {
        let (kind_code, pd, qd, gs, bs, vm, vmax, vmin) =
            (r[1] as i64, r[2], r[3], r[4], r[5], r[7], r[11], r[12]);
        let g = gens.get(&k);
        let mut b = Bus::load(k, vmin, vmax);
        b.y_shunt = Complex64::new(gs, bs) / base;
        match (kind_code, g) {
            (3, _) => {
                b = Bus { y_shunt: b.y_shunt, ..Bus::slack(k, vmin, vmax, g.and_then(|g| g.vg).unwrap_or(vm)) };
            }
            (2, Some(g)) => {
                b.kind = BusKind::Generator;
                b.p_min = g.pmin;
                b.p_max = g.pmax;
                b.q_min = g.qmin;
                b.q_max = g.qmax;
                b.v_setpoint = g.vg;
                b.p_setpoint = Some(g.pg);
            }
            (1 | 2, _) => {}
            (4, _) => {
                return Err(Error::parse(format!("mpc.bus row {}", k + 1), "isolated buses are not supported"))
            }
            (t, _) => return Err(Error::parse(format!("mpc.bus row {}", k + 1), format!("unknown bus type {t}"))),
        }
        buses.push(b);
        loads.push((k, Complex64::new(pd, qd) / base));
    }

    let mut merged: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut branches: Vec<Branch> = Vec::new();
    for (k, r) in branch.iter().enumerate() {
        if r[10] <= 0.0 {
            continue;
        }
        let (f, t) = (lookup("branch", k, r[0])?, lookup("branch", k, r[1])?);
        let (res, x, charging, rate, ratio, shift) = (r[2], r[3], r[4], r[5], r[8], r[9]);
        if (ratio != 0.0 && ratio != 1.0) || shift != 0.0 {
            return Err(Error::parse(
                format!("mpc.branch row {}", k + 1),
                "off-nominal taps and phase shifters are not supported",
            ));
        }
        let z = Complex64::new(res, x);
        if z.norm() == 0.0 {
            return Err(Error::parse(format!("mpc.branch row {}", k + 1), "zero impedance"));
        }
        let y = z.inv();
        let i_max = if rate > 0.0 { rate / base } else { f64::INFINITY };
        let half = Complex64::new(0.0, charging / 2.0);
        buses[f].y_shunt += half;
        buses[t].y_shunt += half;
        let key = (f.min(t), f.max(t));
        match merged.get(&key) {
            Some(&m) => {
                branches[m].y += y;
                branches[m].i_max += i_max;
            }
            None => {
                merged.insert(key, branches.len());
                branches.push(Branch::new(f, t, y, i_max));
            }
        }
    }

    let case = NetworkCase {
        name: name.to_string(),
        base_mva: base,
        units: Units::Pu,
        buses,
        branches,
    };
    case.validate()?;
    let base_snapshot = Snapshot::new(&case, format!("{name} base"), &loads, None)?;
    Ok(MatpowerCase { case, base_snapshot })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1.02 0 1 1 1.1 0.9;
    7 1 50 10 0 5 1 1 0 1 1 1.1 0.9; % load
];
mpc.gen = [
    1 0 0 99 -99 1.02 100 1 200 0;
];
mpc.branch = [
    1 7 0.01 0.1 0.02 100 0 0 0 0 1 -360 360;
    7 1 0.01 0.1 0 0 0 0 0 0 1 -360 360;
];
";

    #[test]
    fn parses_and_merges() {
        let m = parse_matpower(TINY, "tiny").unwrap();
        let c = &m.case;
        assert_eq!(c.n_bus(), 2);
        assert_eq!(c.branches.len(), 1);
        let y1 = Complex64::new(0.01, 0.1).inv();
        assert!((c.branches[0].y - 2.0 * y1).norm() < 1e-12);
        assert_eq!(c.branches[0].i_max, f64::INFINITY);
        assert!((c.buses[1].y_shunt - Complex64::new(0.0, 0.05 + 0.01)).norm() < 1e-12);
        assert_eq!(c.buses[0].v_setpoint, Some(1.02));
        assert!((m.base_snapshot.demand[1] - Complex64::new(0.5, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn reports_location() {
        let bad = TINY.replace("7 1 50", "7 1 5x0");
        let err = parse_matpower(&bad, "tiny").unwrap_err().to_string();
        assert!(err.contains("mpc.bus"), "{err}");
        let bad = TINY.replace("7 1 0.01 0.1 0 0", "8 1 0.01 0.1 0 0");
        let err = parse_matpower(&bad, "tiny").unwrap_err().to_string();
        assert!(err.contains("unknown bus 8"), "{err}");
    }
}

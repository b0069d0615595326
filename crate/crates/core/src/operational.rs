//! Operating states, Kirchhoff residuals and the operational constraint set.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AdmittanceMatrix, BusKind, NetworkCase};
use crate::FEAS_TOL;

/// Complex bus voltages and net injections (generation positive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v: Vec<Complex64>,
    pub s: Vec<Complex64>,
}

impl OperatingPoint {
    /// The point whose injections are implied by `v`: `s = diag(v) conj(Y v)`.
    pub fn from_voltages(y: &AdmittanceMatrix, v: Vec<Complex64>) -> Self {
        let s = injections(y, &v);
        OperatingPoint { v, s }
    }

    pub fn flat(n: usize) -> Self {
        OperatingPoint {
            v: vec![Complex64::new(1.0, 0.0); n],
            s: vec![Complex64::new(0.0, 0.0); n],
        }
    }
}

/// `diag(v) conj(Y v)`.
pub fn injections(y: &AdmittanceMatrix, v: &[Complex64]) -> Vec<Complex64> {
    y.mul(v)
        .into_iter()
        .zip(v)
        .map(|(i, vj)| vj * i.conj())
        .collect()
}

/// Kirchhoff residual `diag(v) conj(Y v) - s`.
pub fn kirchhoff_residual(y: &AdmittanceMatrix, point: &OperatingPoint) -> Vec<Complex64> {
    assert_eq!(point.v.len(), y.n(), "voltage dimension");
    assert_eq!(point.s.len(), y.n(), "injection dimension");
    injections(y, &point.v)
        .into_iter()
        .zip(&point.s)
        .map(|(calc, s)| calc - s)
        .collect()
}

/// Largest componentwise modulus of a complex vector.
pub fn max_abs(r: &[Complex64]) -> f64 {
    r.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// A recorded load pattern.
///
/// `demand` holds the consumed power at every bus (positive when drawing
/// power); the net injection at a load bus is `-demand`.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub label: String,
    pub demand: Vec<Complex64>,
    pub v_recorded: Option<Vec<Complex64>>,
}

#[derive(Serialize, Deserialize)]
struct LoadDoc {
    bus: usize,
    p: f64,
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct VoltageDoc {
    bus: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotDoc {
    label: String,
    loads: Vec<LoadDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voltages: Option<Vec<VoltageDoc>>,
}

impl Snapshot {
    /// Builds a snapshot from `(bus, demand)` pairs. Every load bus must be
    /// listed; other buses default to zero demand.
    pub fn new(
        case: &NetworkCase,
        label: impl Into<String>,
        loads: &[(usize, Complex64)],
        v_recorded: Option<Vec<Complex64>>,
    ) -> Result<Self> {
        let label = label.into();
        let bad = |msg: String| Error::InvalidSnapshot {
            label: label.clone(),
            msg,
        };
        let n = case.n_bus();
        let mut demand = vec![Complex64::new(0.0, 0.0); n];
        let mut listed = vec![false; n];
        for &(bus, d) in loads {
            if bus >= n {
                return Err(bad(format!("load references missing bus {bus}")));
            }
            if listed[bus] {
                return Err(bad(format!("bus {bus} listed twice")));
            }
            if !d.re.is_finite() || !d.im.is_finite() {
                return Err(bad(format!("bus {bus}: non-finite load")));
            }
            listed[bus] = true;
            demand[bus] = d;
        }
        if let Some(missing) = case
            .buses
            .iter()
            .find(|b| b.kind == BusKind::Load && !listed[b.id])
        {
            return Err(bad(format!("load bus {} has no entry", missing.id)));
        }
        if let Some(v) = &v_recorded {
            if v.len() != n {
                return Err(bad(format!("{} recorded voltages for {n} buses", v.len())));
            }
        }
        Ok(Snapshot {
            label,
            demand,
            v_recorded,
        })
    }

    /// Checks that recorded voltages are consistent with the fixed load
    /// injections, i.e. satisfy the Kirchhoff equations together with free
    /// injections at dispatchable buses.
    pub fn validate_voltages(&self, case: &NetworkCase, y: &AdmittanceMatrix) -> Result<()> {
        let Some(v) = &self.v_recorded else {
            return Ok(());
        };
        let s = injections(y, v);
        for bus in case.buses.iter().filter(|b| b.kind == BusKind::Load) {
            let r = (s[bus.id] + self.demand[bus.id]).norm();
            if !(r <= FEAS_TOL) {
                return Err(Error::InvalidSnapshot {
                    label: self.label.clone(),
                    msg: format!(
                        "recorded voltages violate Kirchhoff at bus {} (residual {r:.3e})",
                        bus.id
                    ),
                });
            }
        }
        Ok(())
    }

    /// Net injection fixed by the snapshot at bus `j` (meaningful for load
    /// buses).
    pub fn load_injection(&self, j: usize) -> Complex64 {
        -self.demand[j]
    }

    pub fn from_json(case: &NetworkCase, text: &str) -> Result<Self> {
        let doc: SnapshotDoc = serde_json::from_str(text)?;
        let loads: Vec<(usize, Complex64)> = doc
            .loads
            .iter()
            .map(|l| (l.bus, Complex64::new(l.p, l.q)))
            .collect();
        let voltages = match doc.voltages {
            None => None,
            Some(list) => {
                let mut v = vec![None; case.n_bus()];
                for e in &list {
                    if e.bus >= case.n_bus() {
                        return Err(Error::InvalidSnapshot {
                            label: doc.label.clone(),
                            msg: format!("voltage references missing bus {}", e.bus),
                        });
                    }
                    v[e.bus] = Some(Complex64::new(e.re, e.im));
                }
                let v: Option<Vec<Complex64>> = v.into_iter().collect();
                Some(v.ok_or_else(|| Error::InvalidSnapshot {
                    label: doc.label.clone(),
                    msg: "voltages must cover every bus".into(),
                })?)
            }
        };
        let snap = Snapshot::new(case, doc.label, &loads, voltages)?;
        let y = crate::network::build_admittance(case)?;
        snap.validate_voltages(case, &y)?;
        Ok(snap)
    }

    /// Serializes the snapshot; zero-demand entries are kept only at load
    /// buses.
    pub fn to_json(&self, case: &NetworkCase) -> String {
        let loads = self
            .demand
            .iter()
            .enumerate()
            .filter(|&(j, d)| case.buses[j].kind == BusKind::Load || d.norm() != 0.0)
            .map(|(bus, d)| LoadDoc {
                bus,
                p: d.re,
                q: d.im,
            })
            .collect();
        let voltages = self.v_recorded.as_ref().map(|v| {
            v.iter()
                .enumerate()
                .map(|(bus, c)| VoltageDoc {
                    bus,
                    re: c.re,
                    im: c.im,
                })
                .collect()
        });
        let doc = SnapshotDoc {
            label: self.label.clone(),
            loads,
            voltages,
        };
        serde_json::to_string_pretty(&doc).expect("snapshot serializes")
    }
}

/// The `K` snapshots a plan must repair.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    snapshots: Vec<Snapshot>,
}

impl ScenarioSet {
    pub fn new(snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidSnapshot {
                label: String::new(),
                msg: "at least one snapshot is required".into(),
            });
        }
        Ok(ScenarioSet { snapshots })
    }

    pub fn single(snapshot: Snapshot) -> Self {
        ScenarioSet {
            snapshots: vec![snapshot],
        }
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Snapshot> {
        self.snapshots.iter()
    }

    pub fn get(&self, k: usize) -> &Snapshot {
        &self.snapshots[k]
    }
}

/// Optional constraints beyond voltage, current and injection bounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperationalLimits {
    /// Phase-angle limit per branch index, radians, `0 < alpha < pi/2`.
    pub angle: BTreeMap<usize, f64>,
}

impl OperationalLimits {
    pub fn none() -> Self {
        Self::default()
    }

    /// The same angle limit on every branch.
    pub fn uniform_angle(case: &NetworkCase, alpha: f64) -> Result<Self> {
        let mut limits = Self::default();
        for k in 0..case.branches.len() {
            limits.set_angle(k, alpha)?;
        }
        Ok(limits)
    }

    pub fn set_angle(&mut self, branch: usize, alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidCase(format!(
                "angle limit {alpha} on branch {branch} outside (0, pi/2)"
            )));
        }
        self.angle.insert(branch, alpha);
        Ok(())
    }
}

/// Per-constraint slacks of an operating point; entries at or below the
/// feasibility tolerance are reported as exactly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub p_injection: Vec<f64>,
    pub q_injection: Vec<f64>,
    /// Slack of the squared angle constraint, per branch (zero where no
    /// limit applies).
    pub angle: Vec<f64>,
    pub max_slack: f64,
    pub sum_slack: f64,
    pub avg_voltage_slack: f64,
}

/// One positive entry of a [`ViolationReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub index: usize,
    pub slack: f64,
}

impl ViolationReport {
    fn from_raw(
        voltage: Vec<f64>,
        current: Vec<f64>,
        p_injection: Vec<f64>,
        q_injection: Vec<f64>,
        angle: Vec<f64>,
    ) -> Self {
        let clip = |v: Vec<f64>| -> Vec<f64> {
            v.into_iter()
                .map(|x| if x > FEAS_TOL || x.is_nan() { x } else { 0.0 })
                .collect()
        };
        let (voltage, current) = (clip(voltage), clip(current));
        let (p_injection, q_injection, angle) = (clip(p_injection), clip(q_injection), clip(angle));
        let all = || {
            voltage
                .iter()
                .chain(&current)
                .chain(&p_injection)
                .chain(&q_injection)
                .chain(&angle)
        };
        let max_slack = all().copied().fold(0.0, f64::max);
        let sum_slack = all().sum();
        let avg_voltage_slack = if voltage.is_empty() {
            0.0
        } else {
            voltage.iter().sum::<f64>() / voltage.len() as f64
        };
        ViolationReport {
            voltage,
            current,
            p_injection,
            q_injection,
            angle,
            max_slack,
            sum_slack,
            avg_voltage_slack,
        }
    }

    /// A clean report for a case of the given size.
    pub fn clean(n_bus: usize, n_branch: usize) -> Self {
        Self::from_raw(
            vec![0.0; n_bus],
            vec![0.0; n_branch],
            vec![0.0; n_bus],
            vec![0.0; n_bus],
            vec![0.0; n_branch],
        )
    }

    pub fn is_clean(&self) -> bool {
        self.max_slack == 0.0 && !self.sum_slack.is_nan()
    }

    /// Every positive slack with the bus or branch it belongs to.
    pub fn violations(&self) -> Vec<Violation> {
        let groups: [(&str, &Vec<f64>); 5] = [
            ("voltage", &self.voltage),
            ("current", &self.current),
            ("p_injection", &self.p_injection),
            ("q_injection", &self.q_injection),
            ("angle", &self.angle),
        ];
        groups
            .iter()
            .flat_map(|(kind, vals)| {
                vals.iter()
                    .enumerate()
                    .filter(|(_, &s)| s != 0.0)
                    .map(|(index, &slack)| Violation {
                        kind: kind.to_string(),
                        index,
                        slack,
                    })
            })
            .collect()
    }

    /// Buses touched by a violation (branch violations contribute both
    /// endpoints).
    pub fn violated_buses(&self, case: &NetworkCase) -> Vec<usize> {
        let mut hit = vec![false; case.n_bus()];
        for j in 0..case.n_bus() {
            if self.voltage[j] > 0.0 || self.p_injection[j] > 0.0 || self.q_injection[j] > 0.0 {
                hit[j] = true;
            }
        }
        for (k, br) in case.branches.iter().enumerate() {
            if self.current[k] > 0.0 || self.angle[k] > 0.0 {
                hit[br.from] = true;
                hit[br.to] = true;
            }
        }
        (0..case.n_bus()).filter(|&j| hit[j]).collect()
    }
}

/// Slacks of `point` with respect to the operational set of `case` under
/// the loads of `snapshot`.
pub fn check_feasibility(
    case: &NetworkCase,
    snapshot: &Snapshot,
    point: &OperatingPoint,
    limits: &OperationalLimits,
) -> ViolationReport {
    let n = case.n_bus();
    assert_eq!(point.v.len(), n, "voltage dimension");
    assert_eq!(point.s.len(), n, "injection dimension");
    let mut voltage = vec![0.0; n];
    let mut p_inj = vec![0.0; n];
    let mut q_inj = vec![0.0; n];
    for (j, bus) in case.buses.iter().enumerate() {
        let vm = point.v[j].norm();
        voltage[j] = (bus.v_min - vm).max(vm - bus.v_max).max(0.0);
        let gen = point.s[j] + snapshot.demand[j];
        if bus.kind == BusKind::Load {
            p_inj[j] = gen.re.abs();
            q_inj[j] = gen.im.abs();
        } else {
            p_inj[j] = (bus.p_min - gen.re).max(gen.re - bus.p_max).max(0.0);
            q_inj[j] = (bus.q_min - gen.im).max(gen.im - bus.q_max).max(0.0);
        }
    }
    let mut current = vec![0.0; case.branches.len()];
    let mut angle = vec![0.0; case.branches.len()];
    for (k, br) in case.branches.iter().enumerate() {
        let dv = point.v[br.from] - point.v[br.to];
        current[k] = (br.y.norm() * dv.norm() - br.i_max).max(0.0);
        if let Some(&alpha) = limits.angle.get(&k) {
            let rhs = alpha.sin().powi(2) * point.v[br.from].norm_sqr();
            angle[k] = (dv.norm_sqr() - rhs).max(0.0);
        }
    }
    ViolationReport::from_raw(voltage, current, p_inj, q_inj, angle)
}

//! Newton-Raphson AC power flow in polar coordinates.
//!
//! The state holds voltage angles of every non-slack bus followed by the
//! magnitudes of PQ buses. Mismatches are active power at non-slack buses
//! followed by reactive power at PQ buses.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AdmittanceMatrix, BusKind, NetworkCase};
use crate::operational::{OperatingPoint, Snapshot};

/// Bus classification for a power-flow solve. Injections are net
/// (generation minus demand), per-unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PfBus {
    Slack { vm: f64 },
    Pv { p: f64, vm: f64 },
    Pq { s: Complex64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfSpec {
    pub buses: Vec<PfBus>,
    /// Initial voltages; slack and PV magnitudes are overridden by their
    /// setpoints and the slack angle is rotated to zero.
    pub v0: Vec<Complex64>,
}

impl PfSpec {
    /// Classification from the case setpoints and the snapshot loads.
    ///
    /// Generator buses use `p_setpoint` (default 0) and `v_setpoint`; a
    /// missing magnitude setpoint falls back to the recorded magnitude, or
    /// 1.0. The initial point is the recorded voltage vector when present,
    /// otherwise a flat start.
    pub fn from_case(case: &NetworkCase, snapshot: &Snapshot) -> Self {
        let recorded = snapshot.v_recorded.as_ref();
        let vm_fallback = |j: usize| recorded.map(|v| v[j].norm()).unwrap_or(1.0);
        let buses = case
            .buses
            .iter()
            .map(|b| {
                let vm = b.v_setpoint.unwrap_or_else(|| vm_fallback(b.id));
                match b.kind {
                    BusKind::Slack => PfBus::Slack { vm },
                    BusKind::Generator => PfBus::Pv {
                        p: b.p_setpoint.unwrap_or(0.0) - snapshot.demand[b.id].re,
                        vm,
                    },
                    BusKind::Load => PfBus::Pq {
                        s: snapshot.load_injection(b.id),
                    },
                }
            })
            .collect();
        let v0 = recorded
            .cloned()
            .unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); case.n_bus()]);
        PfSpec { buses, v0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidCase(format!("power-flow spec: {m}")));
        if self.buses.len() != n || self.v0.len() != n {
            return bad("dimension mismatch");
        }
        let slacks = self
            .buses
            .iter()
            .filter(|b| matches!(b, PfBus::Slack { .. }))
            .count();
        if slacks != 1 {
            return bad("exactly one slack bus required");
        }
        if self.v0.iter().any(|v| v.norm() == 0.0 || !v.re.is_finite() || !v.im.is_finite()) {
            return bad("initial voltages must be finite and nonzero");
        }
        for b in &self.buses {
            let vm = match *b {
                PfBus::Slack { vm } | PfBus::Pv { vm, .. } => vm,
                PfBus::Pq { .. } => 1.0,
            };
            if !(vm > 0.0) {
                return bad("voltage setpoints must be positive");
            }
        }
        Ok(())
    }
}

/// Mapping between complex voltages and the polar Newton state.
#[derive(Clone, Debug)]
pub struct PolarMap {
    spec: PfSpec,
    slack: usize,
    /// Non-slack buses (angle unknowns, active mismatches).
    angle_buses: Vec<usize>,
    /// PQ buses (magnitude unknowns, reactive mismatches).
    pq_buses: Vec<usize>,
}

impl PolarMap {
    pub fn new(spec: &PfSpec) -> Self {
        let slack = spec
            .buses
            .iter()
            .position(|b| matches!(b, PfBus::Slack { .. }))
            .expect("spec has a slack bus");
        let angle_buses = (0..spec.buses.len()).filter(|&j| j != slack).collect();
        let pq_buses = (0..spec.buses.len())
            .filter(|&j| matches!(spec.buses[j], PfBus::Pq { .. }))
            .collect();
        PolarMap {
            spec: spec.clone(),
            slack,
            angle_buses,
            pq_buses,
        }
    }

    pub fn dim(&self) -> usize {
        self.angle_buses.len() + self.pq_buses.len()
    }

    /// The starting voltages: setpoint magnitudes, slack angle zero.
    pub fn initial_voltages(&self) -> Vec<Complex64> {
        let rot = Complex64::from_polar(1.0, -self.spec.v0[self.slack].arg());
        self.spec
            .v0
            .iter()
            .zip(&self.spec.buses)
            .map(|(&v, b)| {
                let v = v * rot;
                match *b {
                    PfBus::Slack { vm } | PfBus::Pv { vm, .. } => Complex64::from_polar(vm, v.arg()),
                    PfBus::Pq { .. } => v,
                }
            })
            .collect()
    }

    /// State vector of a voltage vector whose fixed components already
    /// match the spec.
    pub fn state(&self, v: &[Complex64]) -> Vec<f64> {
        self.angle_buses
            .iter()
            .map(|&j| v[j].arg())
            .chain(self.pq_buses.iter().map(|&j| v[j].norm()))
            .collect()
    }

    pub fn voltages(&self, x: &[f64]) -> Vec<Complex64> {
        let n = self.spec.buses.len();
        let mut mag: Vec<f64> = self
            .spec
            .buses
            .iter()
            .map(|b| match *b {
                PfBus::Slack { vm } | PfBus::Pv { vm, .. } => vm,
                PfBus::Pq { .. } => 1.0,
            })
            .collect();
        let mut ang = vec![0.0; n];
        for (k, &j) in self.angle_buses.iter().enumerate() {
            ang[j] = x[k];
        }
        let off = self.angle_buses.len();
        for (k, &j) in self.pq_buses.iter().enumerate() {
            mag[j] = x[off + k];
        }
        mag.iter()
            .zip(&ang)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }

    fn targets(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self
            .angle_buses
            .iter()
            .map(|&j| match self.spec.buses[j] {
                PfBus::Pv { p, .. } => p,
                PfBus::Pq { s } => s.re,
                PfBus::Slack { .. } => unreachable!(),
            })
            .collect();
        let q = self
            .pq_buses
            .iter()
            .map(|&j| match self.spec.buses[j] {
                PfBus::Pq { s } => s.im,
                _ => unreachable!(),
            })
            .collect();
        (p, q)
    }

    /// Power mismatch `F(x)`.
    pub fn mismatch(&self, y: &AdmittanceMatrix, x: &[f64]) -> Vec<f64> {
        let v = self.voltages(x);
        let s = crate::operational::injections(y, &v);
        let (p, q) = self.targets();
        self.angle_buses
            .iter()
            .zip(&p)
            .map(|(&j, pt)| s[j].re - pt)
            .chain(self.pq_buses.iter().zip(&q).map(|(&j, qt)| s[j].im - qt))
            .collect()
    }

    /// Analytic Jacobian `dF/dx`.
    pub fn jacobian(&self, y: &AdmittanceMatrix, x: &[f64]) -> DMatrix<f64> {
        let n = self.spec.buses.len();
        let v = self.voltages(x);
        let cur = y.mul(&v);
        let jj = Complex64::new(0.0, 1.0);
        // Column position of each bus in the angle and magnitude blocks.
        let mut col_a = vec![usize::MAX; n];
        let mut col_m = vec![usize::MAX; n];
        for (k, &j) in self.angle_buses.iter().enumerate() {
            col_a[j] = k;
        }
        let off = self.angle_buses.len();
        for (k, &j) in self.pq_buses.iter().enumerate() {
            col_m[j] = off + k;
        }
        let mut row_p = vec![usize::MAX; n];
        let mut row_q = vec![usize::MAX; n];
        for (k, &j) in self.angle_buses.iter().enumerate() {
            row_p[j] = k;
        }
        for (k, &j) in self.pq_buses.iter().enumerate() {
            row_q[j] = off + k;
        }
        let dim = self.dim();
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..n {
            if row_p[j] == usize::MAX && row_q[j] == usize::MAX {
                continue;
            }
            let unit_j = v[j] / v[j].norm();
            for &(k, yjk) in y.row(j) {
                // dS_j/dtheta_k and dS_j/d|V_k|
                let mut ds_da = -jj * v[j] * (yjk * v[k]).conj();
                let mut ds_dm = v[j] * (yjk * v[k] / v[k].norm()).conj();
                if k == j {
                    ds_da += jj * v[j] * cur[j].conj();
                    ds_dm += cur[j].conj() * unit_j;
                }
                for (row, part) in [(row_p[j], 0), (row_q[j], 1)] {
                    if row == usize::MAX {
                        continue;
                    }
                    let pick = |c: Complex64| if part == 0 { c.re } else { c.im };
                    if col_a[k] != usize::MAX {
                        jac[(row, col_a[k])] += pick(ds_da);
                    }
                    if col_m[k] != usize::MAX {
                        jac[(row, col_m[k])] += pick(ds_dm);
                    }
                }
            }
        }
        jac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Halve the step while the mismatch grows.
    pub backtracking: bool,
    pub max_halvings: usize,
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions {
            tol: 1e-8,
            max_iter: 30,
            backtracking: false,
            max_halvings: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PfStatus {
    Converged,
    SingularJacobian,
    IterationLimit,
    Diverged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PfResult {
    pub status: PfStatus,
    pub converged: bool,
    pub iterations: usize,
    pub point: OperatingPoint,
    /// Infinity norm of the mismatch of the free equations at `point`.
    pub residual_inf: f64,
    /// Mismatch norm before every iteration, then at the final point.
    pub trace: Vec<f64>,
}

fn norm_inf(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves the power flow of `case` with the given classification.
pub fn newton_power_flow(case: &NetworkCase, spec: &PfSpec, opts: &PfOptions) -> Result<PfResult> {
    spec.validate(case.n_bus())?;
    let y = crate::network::build_admittance(case)?;
    Ok(solve_with_admittance(&y, spec, opts))
}

/// As [`newton_power_flow`] with a prebuilt admittance matrix.
pub fn solve_with_admittance(y: &AdmittanceMatrix, spec: &PfSpec, opts: &PfOptions) -> PfResult {
    let map = PolarMap::new(spec);
    let mut x = map.state(&map.initial_voltages());
    let mut f = map.mismatch(y, &x);
    let mut norm = norm_inf(&f);
    let mut trace = vec![norm];
    let mut iterations = 0;
    let mut status = PfStatus::IterationLimit;

    while iterations < opts.max_iter || norm <= opts.tol {
        if norm <= opts.tol {
            status = PfStatus::Converged;
            break;
        }
        if !norm.is_finite() {
            status = PfStatus::Diverged;
            break;
        }
        iterations += 1;
        let jac = map.jacobian(y, &x);
        let rhs = DVector::from_iterator(f.len(), f.iter().map(|v| -v));
        let dx = match jac.lu().solve(&rhs) {
            Some(dx) if dx.iter().all(|d| d.is_finite()) => dx,
            _ => {
                status = PfStatus::SingularJacobian;
                break;
            }
        };
        let mut step = 1.0;
        let mut halvings = 0;
        loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
            let f_trial = map.mismatch(y, &trial);
            let n_trial = norm_inf(&f_trial);
            let worse = !(n_trial <= norm);
            if opts.backtracking && worse && halvings < opts.max_halvings {
                step *= 0.5;
                halvings += 1;
                continue;
            }
            x = trial;
            f = f_trial;
            norm = n_trial;
            break;
        }
        trace.push(norm);
    }

    let v = map.voltages(&x);
    let residual_inf = norm_inf(&map.mismatch(y, &map.state(&v)));
    if status == PfStatus::Converged && !(residual_inf <= opts.tol) {
        status = PfStatus::IterationLimit;
    }
    PfResult {
        converged: status == PfStatus::Converged,
        status,
        iterations,
        point: OperatingPoint::from_voltages(y, v),
        residual_inf,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Branch, Bus, Units};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn chain(n: usize) -> NetworkCase {
        let mut buses = vec![Bus::slack(0, 0.9, 1.1, 1.02)];
        buses.extend((1..n).map(|j| Bus::load(j, 0.9, 1.1)));
        NetworkCase {
            name: String::new(),
            base_mva: 100.0,
            units: Units::Pu,
            buses,
            branches: (1..n).map(|j| Branch::new(j - 1, j, c(2.0, -8.0), 5.0)).collect(),
        }
    }

    #[test]
    fn zero_load_is_flat() {
        let mut case = chain(4);
        case.buses[0].v_setpoint = Some(1.0);
        let loads: Vec<_> = (1..4).map(|j| (j, c(0.0, 0.0))).collect();
        let snap = Snapshot::new(&case, "z", &loads, None).unwrap();
        let spec = PfSpec::from_case(&case, &snap);
        let res = newton_power_flow(&case, &spec, &PfOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 1);
        for v in &res.point.v {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_network_reports_status() {
        // A bus isolated by a zero-admittance branch makes the Jacobian singular.
        let mut case = chain(3);
        case.branches[1].y = c(0.0, 0.0);
        let loads = [(1, c(0.1, 0.0)), (2, c(0.1, 0.0))];
        let snap = Snapshot::new(&case, "z", &loads, None).unwrap();
        let spec = PfSpec::from_case(&case, &snap);
        let res = newton_power_flow(&case, &spec, &PfOptions::default()).unwrap();
        assert!(!res.converged);
        assert_eq!(res.status, PfStatus::SingularJacobian);
    }

    #[test]
    fn overload_does_not_converge() {
        let case = chain(2);
        let snap = Snapshot::new(&case, "heavy", &[(1, c(20.0, 10.0))], None).unwrap();
        let spec = PfSpec::from_case(&case, &snap);
        let res = newton_power_flow(&case, &spec, &PfOptions::default()).unwrap();
        assert!(!res.converged);
        let damped = PfOptions {
            backtracking: true,
            ..PfOptions::default()
        };
        let res = newton_power_flow(&case, &spec, &damped).unwrap();
        assert!(!res.converged);
    }

    #[test]
    fn bad_spec_rejected() {
        let case = chain(2);
        let spec = PfSpec {
            buses: vec![PfBus::Pq { s: c(0.0, 0.0) }; 2],
            v0: vec![c(1.0, 0.0); 2],
        };
        assert!(newton_power_flow(&case, &spec, &PfOptions::default()).is_err());
    }
}

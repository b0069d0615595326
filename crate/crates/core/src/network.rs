//! Network data model: buses, branches, the bus admittance matrix and
//! binary line-upgrade decisions.
//!
//! All quantities are per-unit once a case has been loaded. Branch
//! admittances are stored as physical series admittances `y_jl`; the bus
//! admittance matrix uses the usual convention `Y_jl = -y_jl`,
//! `Y_jj = y_sh_j + sum_k y_jk`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::serde_bounds::{lower, upper};

/// Role of a bus in the operating model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
}

impl BusKind {
    /// Slack and generator buses carry a dispatchable injection.
    pub fn is_dispatchable(self) -> bool {
        !matches!(self, BusKind::Load)
    }
}

/// A network bus.
///
/// `p_min..q_max` bound the *generation* at the bus; demand comes from the
/// snapshot and is subtracted to obtain the net injection. The optional
/// setpoints are the operator's voltage magnitude and active dispatch used
/// by the power-flow policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(with = "lower", default)]
    pub p_min: f64,
    #[serde(with = "upper", default)]
    pub p_max: f64,
    #[serde(with = "lower", default)]
    pub q_min: f64,
    #[serde(with = "upper", default)]
    pub q_max: f64,
    #[serde(default)]
    pub y_shunt: Complex64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_setpoint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_setpoint: Option<f64>,
}

impl Bus {
    /// A load bus with the given voltage band and no shunt.
    pub fn load(id: usize, v_min: f64, v_max: f64) -> Self {
        Bus {
            id,
            kind: BusKind::Load,
            v_min,
            v_max,
            p_min: 0.0,
            p_max: 0.0,
            q_min: 0.0,
            q_max: 0.0,
            y_shunt: Complex64::new(0.0, 0.0),
            v_setpoint: None,
            p_setpoint: None,
        }
    }

    /// The slack bus with unbounded injection.
    pub fn slack(id: usize, v_min: f64, v_max: f64, v_setpoint: f64) -> Self {
        Bus {
            kind: BusKind::Slack,
            p_min: f64::NEG_INFINITY,
            p_max: f64::INFINITY,
            q_min: f64::NEG_INFINITY,
            q_max: f64::INFINITY,
            v_setpoint: Some(v_setpoint),
            ..Bus::load(id, v_min, v_max)
        }
    }
}

/// A line between two buses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    /// Series admittance, per-unit.
    pub y: Complex64,
    /// Current-magnitude limit, per-unit; `null` in JSON means unlimited.
    #[serde(with = "upper", default = "unlimited")]
    pub i_max: f64,
}

fn unlimited() -> f64 {
    f64::INFINITY
}

impl Branch {
    pub fn new(from: usize, to: usize, y: Complex64, i_max: f64) -> Self {
        Branch { from, to, y, i_max }
    }

    /// Unordered endpoint pair.
    pub fn key(&self) -> (usize, usize) {
        (self.from.min(self.to), self.from.max(self.to))
    }
}

/// Unit system of a serialized case.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Everything per-unit.
    #[default]
    Pu,
    /// Powers, shunts and current ratings in MW / MVAr / MVA at nominal
    /// voltage; converted to per-unit on load.
    Mva,
}

/// A complete network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    #[serde(default)]
    pub name: String,
    pub base_mva: f64,
    #[serde(default)]
    pub units: Units,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

impl NetworkCase {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    /// Index of the (unique) slack bus.
    pub fn slack(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    /// Reads a JSON case, converting to per-unit when `units` is `mva`.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut case: NetworkCase = serde_json::from_str(text)?;
        if case.units == Units::Mva {
            case.to_per_unit();
        }
        case.validate()?;
        Ok(case)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serializes")
    }

    fn to_per_unit(&mut self) {
        let base = self.base_mva;
        for bus in &mut self.buses {
            bus.p_min /= base;
            bus.p_max /= base;
            bus.q_min /= base;
            bus.q_max /= base;
            bus.y_shunt /= base;
            bus.p_setpoint = bus.p_setpoint.map(|p| p / base);
        }
        for br in &mut self.branches {
            br.i_max /= base;
        }
        self.units = Units::Pu;
    }

    /// Checks the structural invariants of a case.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCase(msg));
        if !(self.base_mva > 0.0) {
            return bad(format!("base_mva must be positive, got {}", self.base_mva));
        }
        if self.buses.is_empty() {
            return bad("case has no buses".into());
        }
        let mut slacks = 0;
        for (idx, bus) in self.buses.iter().enumerate() {
            if bus.id != idx {
                return bad(format!("bus at position {idx} has id {}", bus.id));
            }
            if !(bus.v_min <= bus.v_max) || bus.v_min < 0.0 {
                return bad(format!("bus {idx}: v_min/v_max out of order"));
            }
            if !(bus.p_min <= bus.p_max) {
                return bad(format!("bus {idx}: p_min > p_max"));
            }
            if !(bus.q_min <= bus.q_max) {
                return bad(format!("bus {idx}: q_min > q_max"));
            }
            if bus.kind == BusKind::Slack {
                slacks += 1;
            }
        }
        if slacks != 1 {
            return bad(format!("expected exactly one slack bus, found {slacks}"));
        }
        let n = self.n_bus();
        let mut seen = BTreeSet::new();
        for (k, br) in self.branches.iter().enumerate() {
            if br.from >= n || br.to >= n {
                return bad(format!("branch {k} references a missing bus"));
            }
            if br.from == br.to {
                return bad(format!("branch {k} is a self-loop"));
            }
            if !(br.i_max > 0.0) {
                return bad(format!("branch {k}: i_max must be positive"));
            }
            if !br.y.re.is_finite() || !br.y.im.is_finite() {
                return bad(format!("branch {k}: admittance is not finite"));
            }
            if !seen.insert(br.key()) {
                return bad(format!(
                    "branch {k} duplicates bus pair ({}, {}); merge parallel lines",
                    br.from, br.to
                ));
            }
        }
        if !self.is_connected() {
            return bad("branch graph is not connected".into());
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n_bus()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(j) = queue.pop_front() {
            for &l in &adj[j] {
                if !seen[l] {
                    seen[l] = true;
                    queue.push_back(l);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Neighbouring buses of every bus.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_bus()];
        for br in &self.branches {
            adj[br.from].push(br.to);
            adj[br.to].push(br.from);
        }
        adj
    }

    /// Replaces the voltage band of every bus.
    pub fn with_voltage_band(mut self, v_min: f64, v_max: f64) -> Self {
        for bus in &mut self.buses {
            bus.v_min = v_min;
            bus.v_max = v_max;
        }
        self
    }
}

/// Sparse symmetric bus admittance matrix, stored row-wise with sorted
/// column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl AdmittanceMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, j: usize, l: usize) -> Complex64 {
        let row = &self.rows[j];
        match row.binary_search_by_key(&l, |&(c, _)| c) {
            Ok(pos) => row[pos].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Stored entries of row `j`.
    pub fn row(&self, j: usize) -> &[(usize, Complex64)] {
        &self.rows[j]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `Y v`.
    pub fn mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(l, y)| y * v[l]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (j, row) in self.rows.iter().enumerate() {
            for &(l, y) in row {
                m[(j, l)] = y;
            }
        }
        m
    }
}

/// Assembles the bus admittance matrix of a case.
pub fn build_admittance(case: &NetworkCase) -> Result<AdmittanceMatrix> {
    let n = case.n_bus();
    let mut acc: Vec<BTreeMap<usize, Complex64>> = vec![BTreeMap::new(); n];
    for (j, bus) in case.buses.iter().enumerate() {
        *acc[j].entry(j).or_default() += bus.y_shunt;
    }
    let mut seen = BTreeSet::new();
    for (k, br) in case.branches.iter().enumerate() {
        if br.from >= n || br.to >= n || br.from == br.to {
            return Err(Error::InvalidCase(format!("branch {k} has invalid endpoints")));
        }
        if !seen.insert(br.key()) {
            return Err(Error::InvalidCase(format!(
                "duplicate branch between buses {} and {}",
                br.from, br.to
            )));
        }
        let (j, l) = (br.from, br.to);
        *acc[j].entry(j).or_default() += br.y;
        *acc[l].entry(l).or_default() += br.y;
        *acc[j].entry(l).or_default() -= br.y;
        *acc[l].entry(j).or_default() -= br.y;
    }
    Ok(AdmittanceMatrix {
        rows: acc.into_iter().map(|row| row.into_iter().collect()).collect(),
    })
}

/// One purchasable upgrade of a single branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradeOption {
    pub id: usize,
    pub branch: usize,
    /// Change of the branch series admittance.
    pub delta_y: Complex64,
    /// Increase of the branch current limit.
    #[serde(default)]
    pub delta_i: f64,
    pub cost: f64,
}

impl UpgradeOption {
    /// Entries `(row, col, value)` of the admittance change this option
    /// makes to the bus admittance matrix.
    pub fn delta_entries(&self, case: &NetworkCase) -> [(usize, usize, Complex64); 4] {
        let br = &case.branches[self.branch];
        let d = self.delta_y;
        [
            (br.from, br.from, d),
            (br.to, br.to, d),
            (br.from, br.to, -d),
            (br.to, br.from, -d),
        ]
    }
}

/// A row `sum_i coeffs_i a_i <= rhs` of the combination polyhedron.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl CombinationRow {
    pub fn eval(&self, a: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, c)| c * a[i]).sum()
    }
}

/// The set of candidate upgrades together with their combination
/// constraints `A a <= b`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpgradeCatalog {
    pub options: Vec<UpgradeOption>,
    pub rows: Vec<CombinationRow>,
    /// Branch index to the ids of options acting on it.
    pub per_branch: BTreeMap<usize, Vec<usize>>,
}

impl UpgradeCatalog {
    /// Catalog with no options.
    pub fn empty() -> Self {
        UpgradeCatalog {
            options: Vec::new(),
            rows: Vec::new(),
            per_branch: BTreeMap::new(),
        }
    }

    /// Validates the options against the case and prepends the mandatory
    /// at-most-one-upgrade-per-branch rows to `extra_rows`.
    pub fn new(
        case: &NetworkCase,
        options: Vec<UpgradeOption>,
        extra_rows: Vec<CombinationRow>,
    ) -> Result<Self> {
        let mut cat = Self::without_exclusivity(case, options, Vec::new())?;
        let mut rows: Vec<CombinationRow> = cat
            .per_branch
            .values()
            .map(|ids| CombinationRow {
                coeffs: ids.iter().map(|&i| (i, 1.0)).collect(),
                rhs: 1.0,
            })
            .collect();
        rows.extend(extra_rows);
        cat.check_rows(&rows)?;
        cat.rows = rows;
        Ok(cat)
    }

    /// Builds a catalog with exactly the given rows. Model construction
    /// rejects such a catalog unless the rows include the per-branch
    /// exclusivity constraints.
    pub fn without_exclusivity(
        case: &NetworkCase,
        options: Vec<UpgradeOption>,
        rows: Vec<CombinationRow>,
    ) -> Result<Self> {
        let mut per_branch: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (idx, opt) in options.iter().enumerate() {
            let bad = |msg: &str| Err(Error::InvalidCatalog(format!("option {idx}: {msg}")));
            if opt.id != idx {
                return bad("id must equal its position");
            }
            let Some(br) = case.branches.get(opt.branch) else {
                return bad("references a missing branch");
            };
            if !(opt.delta_i >= 0.0) {
                return bad("delta_i must be nonnegative");
            }
            if !(opt.cost >= 0.0) {
                return bad("cost must be nonnegative");
            }
            if (br.y + opt.delta_y).re < 0.0 {
                return bad("upgraded branch conductance would be negative");
            }
            per_branch.entry(opt.branch).or_default().push(idx);
        }
        let cat = UpgradeCatalog {
            options,
            rows: Vec::new(),
            per_branch,
        };
        cat.check_rows(&rows)?;
        Ok(UpgradeCatalog { rows, ..cat })
    }

    fn check_rows(&self, rows: &[CombinationRow]) -> Result<()> {
        for (r, row) in rows.iter().enumerate() {
            if row.coeffs.iter().any(|&(i, c)| i >= self.n() || !c.is_finite()) {
                return Err(Error::InvalidCatalog(format!(
                    "combination row {r} references an unknown option"
                )));
            }
        }
        Ok(())
    }

    /// Every branch upgraded by a factor in `factors`, each option at the
    /// same `cost`. The conductance/susceptance ratio is preserved and the
    /// current limit scales with the admittance.
    pub fn scaled_lines(case: &NetworkCase, factors: &[f64], cost: f64) -> Result<Self> {
        let mut options = Vec::new();
        for (k, br) in case.branches.iter().enumerate() {
            for &f in factors {
                let delta_i = if br.i_max.is_finite() {
                    (f - 1.0) * br.i_max
                } else {
                    0.0
                };
                options.push(UpgradeOption {
                    id: options.len(),
                    branch: k,
                    delta_y: br.y * (f - 1.0),
                    delta_i,
                    cost,
                });
            }
        }
        Self::new(case, options, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.options.len()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.options.iter().map(|o| o.cost).collect()
    }

    /// Affine cost `sum c_i a_i`.
    pub fn cost_of(&self, a: &[f64]) -> f64 {
        self.options.iter().zip(a).map(|(o, &ai)| o.cost * ai).sum()
    }

    /// True when every cost is integral, so any gap below one closes.
    pub fn has_integer_costs(&self) -> bool {
        self.options.iter().all(|o| o.cost.fract() == 0.0)
    }

    /// Whether `A a <= b` holds (absolute tolerance 1e-9).
    pub fn admits(&self, a: &[f64]) -> bool {
        a.len() == self.n() && self.rows.iter().all(|r| r.eval(a) <= r.rhs + 1e-9)
    }

    /// Whether `rows` contains `sum_{i in U_jl} a_i <= 1` for every branch.
    pub fn has_exclusivity_rows(&self) -> bool {
        self.per_branch.values().all(|ids| {
            let want: BTreeSet<usize> = ids.iter().copied().collect();
            self.rows.iter().any(|row| {
                let got: BTreeSet<usize> = row.coeffs.iter().map(|&(i, _)| i).collect();
                got == want && row.coeffs.iter().all(|&(_, c)| c == 1.0) && row.rhs <= 1.0
            })
        })
    }

    /// Parses the catalog JSON document.
    pub fn from_json(case: &NetworkCase, text: &str) -> Result<Self> {
        let doc: CatalogDoc = serde_json::from_str(text)?;
        let mut rows = Vec::new();
        for row in doc.rows {
            let le = CombinationRow {
                coeffs: row.coeffs.clone(),
                rhs: row.rhs,
            };
            match row.sense {
                Sense::Le => rows.push(le),
                Sense::Ge | Sense::Eq => {
                    let ge = CombinationRow {
                        coeffs: row.coeffs.iter().map(|&(i, c)| (i, -c)).collect(),
                        rhs: -row.rhs,
                    };
                    if row.sense == Sense::Eq {
                        rows.push(le);
                    }
                    rows.push(ge);
                }
            }
        }
        if doc.exclusivity {
            Self::new(case, doc.options, rows)
        } else {
            Self::without_exclusivity(case, doc.options, rows)
        }
    }

    /// Serializes options and the non-exclusivity rows.
    pub fn to_json(&self) -> String {
        let excl: BTreeSet<Vec<usize>> = self.per_branch.values().cloned().collect();
        let rows = self
            .rows
            .iter()
            .filter(|r| {
                let ids: Vec<usize> = r.coeffs.iter().map(|&(i, _)| i).collect();
                !(r.rhs == 1.0 && r.coeffs.iter().all(|&(_, c)| c == 1.0) && excl.contains(&ids))
            })
            .map(|r| RowDoc {
                coeffs: r.coeffs.clone(),
                rhs: r.rhs,
                sense: Sense::Le,
            })
            .collect();
        let doc = CatalogDoc {
            options: self.options.clone(),
            rows,
            exclusivity: true,
        };
        serde_json::to_string_pretty(&doc).expect("catalog serializes")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Sense {
    #[default]
    Le,
    Ge,
    Eq,
}

#[derive(Serialize, Deserialize)]
struct RowDoc {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    #[serde(default)]
    sense: Sense,
}

#[derive(Serialize, Deserialize)]
struct CatalogDoc {
    options: Vec<UpgradeOption>,
    #[serde(default)]
    rows: Vec<RowDoc>,
    #[serde(default = "yes")]
    exclusivity: bool,
}

fn yes() -> bool {
    true
}

/// A binary upgrade decision `a in {0,1}^{n_u}`.
///
/// Ordered lexicographically with `0 < 1`, which is the tie-break order of
/// the enumeration oracle.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Plan(Vec<bool>);

impl Plan {
    pub fn zeros(n: usize) -> Self {
        Plan(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Plan(bits)
    }

    /// Accepts only entries that are exactly 0 or 1.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(Error::InvalidPlan(format!("a[{i}] = {v} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Plan)
    }

    /// The `index`-th point of the hypercube in lexicographic order.
    pub fn from_index(n: usize, index: u64) -> Self {
        Plan((0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Indices of active upgrades.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let active: Vec<String> = self.active().map(|i| i.to_string()).collect();
        if active.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", active.join(","))
        }
    }
}

impl Serialize for Plan {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let ints: Vec<u8> = self.0.iter().map(|&b| b as u8).collect();
        ints.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Plan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ints = Vec::<u8>::deserialize(d)?;
        if ints.iter().any(|&v| v > 1) {
            return Err(serde::de::Error::custom("plan entries must be 0 or 1"));
        }
        Ok(Plan(ints.into_iter().map(|v| v == 1).collect()))
    }
}

/// Applies a concrete plan: adds the admittance and current-limit changes
/// of every active option to its branch.
pub fn apply_upgrades(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    plan: &Plan,
) -> Result<NetworkCase> {
    if plan.len() != catalog.n() {
        return Err(Error::InvalidPlan(format!(
            "plan has {} entries, catalog has {} options",
            plan.len(),
            catalog.n()
        )));
    }
    if !catalog.admits(&plan.values()) {
        return Err(Error::InvalidPlan(format!("plan {plan} violates A a <= b")));
    }
    let mut out = case.clone();
    for i in plan.active() {
        let opt = &catalog.options[i];
        let br = &mut out.branches[opt.branch];
        br.y += opt.delta_y;
        br.i_max += opt.delta_i;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_bus(y: Complex64) -> NetworkCase {
        NetworkCase {
            name: "two".into(),
            base_mva: 100.0,
            units: Units::Pu,
            buses: vec![Bus::slack(0, 0.9, 1.1, 1.0), Bus::load(1, 0.9, 1.1)],
            branches: vec![Branch::new(0, 1, y, 2.0)],
        }
    }

    #[test]
    fn two_bus_admittance() {
        let y = build_admittance(&two_bus(c(1.0, -2.0))).unwrap();
        assert_eq!(y.get(0, 0), c(1.0, -2.0));
        assert_eq!(y.get(1, 1), c(1.0, -2.0));
        assert_eq!(y.get(0, 1), c(-1.0, 2.0));
        assert_eq!(y.get(1, 0), c(-1.0, 2.0));
    }

    #[test]
    fn star_admittance() {
        let mut case = two_bus(c(0.0, -5.0));
        case.buses.push(Bus::load(2, 0.9, 1.1));
        case.buses.push(Bus::load(3, 0.9, 1.1));
        case.branches = (1..4).map(|l| Branch::new(0, l, c(0.0, -5.0), 1.0)).collect();
        let y = build_admittance(&case).unwrap();
        assert_eq!(y.get(0, 0), c(0.0, -15.0));
        assert_eq!(y.get(1, 1), c(0.0, -5.0));
        assert_eq!(y.get(2, 2), c(0.0, -5.0));
        assert_eq!(y.get(0, 1), c(0.0, 5.0));
        assert_eq!(y.get(0, 2), c(0.0, 5.0));
        assert_eq!(y.get(1, 2), c(0.0, 0.0));
        assert_eq!(y.nnz(), 4 + 6);
    }

    #[test]
    fn duplicate_branch_rejected() {
        let mut case = two_bus(c(1.0, -2.0));
        case.branches.push(Branch::new(1, 0, c(1.0, -1.0), 1.0));
        assert!(build_admittance(&case).is_err());
        assert!(case.validate().is_err());
    }

    #[test]
    fn validation_catches_bad_cases() {
        let mut case = two_bus(c(1.0, -2.0));
        case.buses[1].kind = BusKind::Slack;
        assert!(case.validate().is_err());

        let mut case = two_bus(c(1.0, -2.0));
        case.buses.push(Bus::load(2, 0.9, 1.1));
        assert!(case.validate().is_err(), "bus 2 is isolated");

        let mut case = two_bus(c(1.0, -2.0));
        case.branches[0].i_max = 0.0;
        assert!(case.validate().is_err());
    }

    #[test]
    fn zero_plan_is_identity() {
        let case = two_bus(c(1.0, -2.0));
        let cat = UpgradeCatalog::scaled_lines(&case, &[1.5, 3.0], 1.0).unwrap();
        let out = apply_upgrades(&case, &cat, &Plan::zeros(2)).unwrap();
        assert_eq!(out, case);
    }

    #[test]
    fn scaled_option_multiplies_branch() {
        let case = two_bus(c(1.0, -2.0));
        let cat = UpgradeCatalog::scaled_lines(&case, &[1.5, 3.0], 1.0).unwrap();
        let out = apply_upgrades(&case, &cat, &Plan::from_bits(vec![true, false])).unwrap();
        assert!((out.branches[0].y - c(1.5, -3.0)).norm() < 1e-15);
        assert!((out.branches[0].i_max - 3.0).abs() < 1e-15);
    }

    #[test]
    fn exclusivity_enforced_on_plans() {
        let case = two_bus(c(1.0, -2.0));
        let cat = UpgradeCatalog::scaled_lines(&case, &[1.5, 3.0], 1.0).unwrap();
        assert!(cat.has_exclusivity_rows());
        let both = Plan::from_bits(vec![true, true]);
        assert!(apply_upgrades(&case, &cat, &both).is_err());
    }

    #[test]
    fn fractional_plan_rejected() {
        assert!(Plan::from_values(&[0.0, 0.5]).is_err());
        assert_eq!(
            Plan::from_values(&[1.0, 0.0]).unwrap(),
            Plan::from_bits(vec![true, false])
        );
    }

    #[test]
    fn lexicographic_enumeration_order() {
        let plans: Vec<Plan> = (0..8).map(|k| Plan::from_index(3, k)).collect();
        let mut sorted = plans.clone();
        sorted.sort();
        assert_eq!(plans, sorted);
        assert_eq!(plans[1], Plan::from_bits(vec![false, false, true]));
    }

    #[test]
    fn catalog_without_exclusivity_is_detectable() {
        let case = two_bus(c(1.0, -2.0));
        let full = UpgradeCatalog::scaled_lines(&case, &[1.5, 3.0], 1.0).unwrap();
        let raw = UpgradeCatalog::without_exclusivity(&case, full.options.clone(), vec![]).unwrap();
        assert!(!raw.has_exclusivity_rows());
    }

    #[test]
    fn negative_conductance_rejected() {
        let case = two_bus(c(1.0, -2.0));
        let opt = UpgradeOption {
            id: 0,
            branch: 0,
            delta_y: c(-2.0, 0.0),
            delta_i: 0.0,
            cost: 1.0,
        };
        assert!(UpgradeCatalog::new(&case, vec![opt], vec![]).is_err());
    }

    #[test]
    fn catalog_json_equality_rows() {
        let case = two_bus(c(1.0, -2.0));
        let text = r#"{
            "options": [
                {"id": 0, "branch": 0, "delta_y": [0.5, -1.0], "delta_i": 1.0, "cost": 1.0},
                {"id": 1, "branch": 0, "delta_y": [2.0, -4.0], "delta_i": 4.0, "cost": 2.0}
            ],
            "rows": [{"coeffs": [[0, 1.0]], "rhs": 0.0, "sense": "eq"}]
        }"#;
        let cat = UpgradeCatalog::from_json(&case, text).unwrap();
        assert_eq!(cat.rows.len(), 3);
        assert!(cat.admits(&[0.0, 1.0]));
        assert!(!cat.admits(&[1.0, 0.0]));
        let again = UpgradeCatalog::from_json(&case, &cat.to_json()).unwrap();
        assert_eq!(again, cat);
    }

    #[test]
    fn mva_units_convert() {
        let text = r#"{
            "base_mva": 100.0, "units": "mva",
            "buses": [
                {"id": 0, "kind": "slack", "v_min": 0.9, "v_max": 1.1,
                 "p_min": null, "p_max": null, "q_min": null, "q_max": null, "v_setpoint": 1.0},
                {"id": 1, "kind": "generator", "v_min": 0.9, "v_max": 1.1,
                 "p_min": 0.0, "p_max": 50.0, "q_min": -10.0, "q_max": 10.0,
                 "y_shunt": [0.0, 19.0], "p_setpoint": 20.0}
            ],
            "branches": [{"from": 0, "to": 1, "y": [1.0, -3.0], "i_max": 130.0}]
        }"#;
        let case = NetworkCase::from_json(text).unwrap();
        assert_eq!(case.units, Units::Pu);
        assert!((case.buses[1].p_max - 0.5).abs() < 1e-15);
        assert!((case.buses[1].y_shunt.im - 0.19).abs() < 1e-15);
        assert_eq!(case.buses[1].p_setpoint, Some(0.2));
        assert!((case.branches[0].i_max - 1.3).abs() < 1e-15);
        assert_eq!(case.buses[0].p_min, f64::NEG_INFINITY);
    }
}

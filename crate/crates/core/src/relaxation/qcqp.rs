//! Quadratic reformulation of the upgrade problem over `z = [Re v; Im v]`.
//!
//! One [`SnapshotBlock`] is built per snapshot; the upgrade vector `a` is
//! shared. Injections are quadratic forms built from the base admittance
//! matrix plus one auxiliary `t` per (option, role) carrying the option's
//! contribution, linked to `w = a * t` by McCormick rows. Current limits use
//! an auxiliary `u = |v_f - v_t|^2` with big-M rows switched by the options
//! of the branch.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{build_admittance, CombinationRow, NetworkCase, UpgradeCatalog};
use crate::operational::{OperationalLimits, ScenarioSet, Snapshot};

/// A quadratic form `zᵀQz` stored by upper-triangle entries: `(p, q) -> c`
/// with `p <= q` contributes `c * z_p * z_q`, equivalently `c * Z_pq` in
/// the lifted problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadForm {
    entries: BTreeMap<(usize, usize), f64>,
}

impl QuadForm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `c * z_p * z_q`.
    pub fn add(&mut self, p: usize, q: usize, c: f64) {
        if c == 0.0 {
            return;
        }
        let key = (p.min(q), p.max(q));
        let e = self.entries.entry(key).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.entries.remove(&key);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &c)| (k, c))
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.entries.iter().map(|(&(p, q), c)| c * z[p] * z[q]).sum()
    }

    /// `tr(Q Z)` for a symmetric `Z`.
    pub fn trace(&self, z: &nalgebra::DMatrix<f64>) -> f64 {
        self.entries.iter().map(|(&(p, q), c)| c * z[(p, q)]).sum()
    }

    /// Entries of the symmetric matrix `Q` with `zᵀQz` equal to the form.
    pub fn symmetric_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(2 * self.entries.len());
        for (&(p, q), &c) in &self.entries {
            if p == q {
                out.push((p, p, c));
            } else {
                out.push((p, q, c / 2.0));
                out.push((q, p, c / 2.0));
            }
        }
        out
    }

    /// `sum |c_pq| * zmax_p * zmax_q`, a bound on `|zᵀQz|` and on
    /// `|tr(Q Z)|` for any PSD `Z` with `Z_pp <= zmax_p^2`.
    pub fn magnitude_bound(&self, zmax: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|(&(p, q), c)| c.abs() * zmax[p] * zmax[q])
            .sum()
    }
}

/// Active (P) or reactive (Q) power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Part {
    P,
    Q,
}

/// Which injection an option auxiliary contributes to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    FromP,
    FromQ,
    ToP,
    ToQ,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::FromP, Role::FromQ, Role::ToP, Role::ToQ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn part(self) -> Part {
        match self {
            Role::FromP | Role::ToP => Part::P,
            Role::FromQ | Role::ToQ => Part::Q,
        }
    }

    pub fn at_from(self) -> bool {
        matches!(self, Role::FromP | Role::FromQ)
    }
}

/// What a constraint encodes; used for reporting and in tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tag {
    Kirchhoff { bus: usize, part: Part },
    Voltage { bus: usize },
    TraceLink { option: usize, role: Role },
    McCormick { option: usize, role: Role, row: u8 },
    VoltageDifference { branch: usize },
    CurrentBase { branch: usize },
    CurrentOption { option: usize },
    Angle { branch: usize },
    SlackPhase,
}

/// `alpha <= zᵀQz + qᵀy + mᵀa <= beta` within one snapshot block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticConstraint {
    pub tag: Tag,
    pub quad: QuadForm,
    /// `(y index, coefficient)`.
    pub lin_y: Vec<(usize, f64)>,
    /// `(a index, coefficient)`.
    pub lin_a: Vec<(usize, f64)>,
    #[serde(with = "crate::serde_bounds::lower")]
    pub alpha: f64,
    #[serde(with = "crate::serde_bounds::upper")]
    pub beta: f64,
}

impl QuadraticConstraint {
    fn new(tag: Tag, alpha: f64, beta: f64) -> Self {
        QuadraticConstraint {
            tag,
            quad: QuadForm::new(),
            lin_y: Vec::new(),
            lin_a: Vec::new(),
            alpha,
            beta,
        }
    }

    pub fn is_equality(&self) -> bool {
        self.alpha == self.beta
    }

    fn linear_part(&self, y: &[f64], a: &[f64]) -> f64 {
        self.lin_y.iter().map(|&(k, c)| c * y[k]).sum::<f64>()
            + self.lin_a.iter().map(|&(i, c)| c * a[i]).sum::<f64>()
    }

    /// Constraint value at a point `(z, y, a)`.
    pub fn value(&self, z: &[f64], y: &[f64], a: &[f64]) -> f64 {
        self.quad.eval(z) + self.linear_part(y, a)
    }

    /// Constraint value at a lifted point `(Z, y, a)`.
    pub fn lifted_value(&self, zz: &nalgebra::DMatrix<f64>, y: &[f64], a: &[f64]) -> f64 {
        self.quad.trace(zz) + self.linear_part(y, a)
    }

    /// Distance of `value` outside `[alpha, beta]`.
    pub fn violation(&self, value: f64) -> f64 {
        (self.alpha - value).max(value - self.beta).max(0.0)
    }
}

/// Positions of the auxiliary variables inside a block's `y` vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YLayout {
    /// `(bus, p index, q index)` for every dispatchable bus.
    pub generation: Vec<(usize, usize, usize)>,
    /// Per option, `t` indices by role.
    pub t: Vec<[usize; 4]>,
    /// Per option, `w = a * t` indices by role.
    pub w: Vec<[usize; 4]>,
    /// Per branch, `u = |v_f - v_t|^2`.
    pub u: Vec<usize>,
    /// Per bus, voltage-band slacks (lower, upper), when requested.
    pub voltage_slack: Vec<(usize, usize)>,
    /// Per branch with a finite limit, current slack, when requested.
    pub current_slack: Vec<(usize, usize)>,
    pub len: usize,
}

impl YLayout {
    pub fn slacks(&self) -> impl Iterator<Item = usize> + '_ {
        self.voltage_slack
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .chain(self.current_slack.iter().map(|&(_, k)| k))
    }
}

/// The quadratic model of one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotBlock {
    pub label: String,
    pub layout: YLayout,
    /// Box on each `y` entry.
    pub y_bounds: Vec<(f64, f64)>,
    pub constraints: Vec<QuadraticConstraint>,
}

/// Problem data shared by every snapshot block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcqpModel {
    pub n_bus: usize,
    pub slack: usize,
    pub n_u: usize,
    pub cost: Vec<f64>,
    pub combination: Vec<CombinationRow>,
    /// Upper bound on `|z_p|` (the bus voltage maximum), length `2N`.
    pub z_max: Vec<f64>,
    pub blocks: Vec<SnapshotBlock>,
}

impl QcqpModel {
    pub fn z_dim(&self) -> usize {
        2 * self.n_bus
    }

    /// Largest violation over all constraints and `y` boxes of a block at a
    /// rank-1 point.
    pub fn max_violation(&self, k: usize, z: &[f64], y: &[f64], a: &[f64]) -> f64 {
        let b = &self.blocks[k];
        let cons = b
            .constraints
            .iter()
            .map(|c| c.violation(c.value(z, y, a)));
        let boxes = b
            .y_bounds
            .iter()
            .zip(y)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0));
        cons.chain(boxes).fold(0.0, f64::max)
    }
}

/// Options for [`build_qcqp`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QcqpOptions {
    /// Add nonnegative slacks to the voltage bands and current limits.
    pub with_slacks: bool,
}

/// Adds the injection forms of row `j` of a (partial) admittance matrix:
/// for every `(k, Y_jk)` the contributions to `p_j` and `q_j`.
fn add_injection_terms(
    pf: &mut QuadForm,
    qf: &mut QuadForm,
    n: usize,
    j: usize,
    row: impl IntoIterator<Item = (usize, Complex64)>,
) {
    let (ej, fj) = (j, n + j);
    for (k, yjk) in row {
        let (g, b) = (yjk.re, yjk.im);
        let (ek, fk) = (k, n + k);
        // p_j += e_j (g e_k - b f_k) + f_j (g f_k + b e_k)
        pf.add(ej, ek, g);
        pf.add(ej, fk, -b);
        pf.add(fj, fk, g);
        pf.add(fj, ek, b);
        // q_j += f_j (g e_k - b f_k) - e_j (g f_k + b e_k)
        qf.add(fj, ek, g);
        qf.add(fj, fk, -b);
        qf.add(ej, fk, -g);
        qf.add(ej, ek, -b);
    }
}

/// `|v_p - v_q|^2` as a form.
fn difference_form(n: usize, p: usize, q: usize) -> QuadForm {
    let mut d = QuadForm::new();
    for off in [0, n] {
        d.add(p + off, p + off, 1.0);
        d.add(q + off, q + off, 1.0);
        d.add(p + off, q + off, -2.0);
    }
    d
}

/// `|v_j|^2` as a form.
pub fn magnitude_form(n: usize, j: usize) -> QuadForm {
    let mut m = QuadForm::new();
    m.add(j, j, 1.0);
    m.add(n + j, n + j, 1.0);
    m
}

/// Injection forms `(p_j, q_j)` of the base network.
pub fn injection_forms(case: &NetworkCase) -> Result<Vec<(QuadForm, QuadForm)>> {
    let y = build_admittance(case)?;
    let n = case.n_bus();
    Ok((0..n)
        .map(|j| {
            let (mut pf, mut qf) = (QuadForm::new(), QuadForm::new());
            add_injection_terms(&mut pf, &mut qf, n, j, y.row(j).iter().copied());
            (pf, qf)
        })
        .collect())
}

/// Forms of the injection contributions of one option by role.
pub fn option_forms(case: &NetworkCase, catalog: &UpgradeCatalog, i: usize) -> [QuadForm; 4] {
    let n = case.n_bus();
    let opt = &catalog.options[i];
    let br = &case.branches[opt.branch];
    let d = opt.delta_y;
    let mut out: [QuadForm; 4] = Default::default();
    for (bus, other, (rp, rq)) in [
        (br.from, br.to, (Role::FromP, Role::FromQ)),
        (br.to, br.from, (Role::ToP, Role::ToQ)),
    ] {
        let (mut pf, mut qf) = (QuadForm::new(), QuadForm::new());
        add_injection_terms(&mut pf, &mut qf, n, bus, [(bus, d), (other, -d)]);
        out[rp.index()] = pf;
        out[rq.index()] = qf;
    }
    out
}

/// Builds the quadratic model over all snapshots.
pub fn build_qcqp(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    scenarios: &ScenarioSet,
    limits: &OperationalLimits,
    opts: &QcqpOptions,
) -> Result<QcqpModel> {
    case.validate()?;
    if !catalog.has_exclusivity_rows() {
        return Err(Error::InvalidCatalog(
            "the combination rows must allow at most one upgrade per branch".into(),
        ));
    }
    for opt in &catalog.options {
        if opt.branch >= case.branches.len() {
            return Err(Error::InvalidCatalog(format!(
                "option {} references missing branch {}",
                opt.id, opt.branch
            )));
        }
    }
    let n = case.n_bus();
    let z_max: Vec<f64> = (0..2 * n).map(|p| case.buses[p % n].v_max).collect();
    let base = injection_forms(case)?;
    let opt_forms: Vec<[QuadForm; 4]> = (0..catalog.n()).map(|i| option_forms(case, catalog, i)).collect();
    let blocks = scenarios
        .iter()
        .map(|snap| build_block(case, catalog, snap, limits, opts, &base, &opt_forms, &z_max))
        .collect();
    Ok(QcqpModel {
        n_bus: n,
        slack: case.slack(),
        n_u: catalog.n(),
        cost: catalog.costs(),
        combination: catalog.rows.clone(),
        z_max,
        blocks,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_block(
    case: &NetworkCase,
    catalog: &UpgradeCatalog,
    snap: &Snapshot,
    limits: &OperationalLimits,
    opts: &QcqpOptions,
    base: &[(QuadForm, QuadForm)],
    opt_forms: &[[QuadForm; 4]],
    z_max: &[f64],
) -> SnapshotBlock {
    let n = case.n_bus();
    let n_u = catalog.n();
    let mut y_bounds: Vec<(f64, f64)> = Vec::new();
    let mut new_y = |lo: f64, hi: f64| {
        y_bounds.push((lo, hi));
        y_bounds.len() - 1
    };

    let generation: Vec<(usize, usize, usize)> = case
        .buses
        .iter()
        .filter(|b| b.kind.is_dispatchable())
        .map(|b| (b.id, new_y(b.p_min, b.p_max), new_y(b.q_min, b.q_max)))
        .collect();
    let t_bound: Vec<[f64; 4]> = opt_forms
        .iter()
        .map(|f| std::array::from_fn(|r| f[r].magnitude_bound(z_max)))
        .collect();
    let t: Vec<[usize; 4]> = t_bound
        .iter()
        .map(|tb| std::array::from_fn(|r| new_y(-tb[r], tb[r])))
        .collect();
    let w: Vec<[usize; 4]> = t_bound
        .iter()
        .map(|tb| std::array::from_fn(|r| new_y(-tb[r], tb[r])))
        .collect();
    let u: Vec<usize> = case
        .branches
        .iter()
        .map(|br| {
            let m = case.buses[br.from].v_max + case.buses[br.to].v_max;
            new_y(0.0, m * m)
        })
        .collect();
    let voltage_slack: Vec<(usize, usize)> = if opts.with_slacks {
        (0..n)
            .map(|_| (new_y(0.0, f64::INFINITY), new_y(0.0, f64::INFINITY)))
            .collect()
    } else {
        Vec::new()
    };
    let current_slack: Vec<(usize, usize)> = if opts.with_slacks {
        case.branches
            .iter()
            .enumerate()
            .filter(|(_, br)| br.i_max.is_finite())
            .map(|(b, _)| (b, new_y(0.0, f64::INFINITY)))
            .collect()
    } else {
        Vec::new()
    };
    let current_slack_of: BTreeMap<usize, usize> = current_slack.iter().copied().collect();

    let mut cons = Vec::new();

    // Power balance at every bus, both parts.
    let gen_of: BTreeMap<usize, (usize, usize)> =
        generation.iter().map(|&(bus, p, q)| (bus, (p, q))).collect();
    for j in 0..n {
        for part in [Part::P, Part::Q] {
            let d = snap.demand[j];
            let rhs = -if part == Part::P { d.re } else { d.im };
            let mut c = QuadraticConstraint::new(Tag::Kirchhoff { bus: j, part }, rhs, rhs);
            c.quad = if part == Part::P { base[j].0.clone() } else { base[j].1.clone() };
            for (i, opt) in catalog.options.iter().enumerate() {
                let br = &case.branches[opt.branch];
                for role in Role::ALL {
                    let bus = if role.at_from() { br.from } else { br.to };
                    if bus == j && role.part() == part {
                        c.lin_y.push((w[i][role.index()], 1.0));
                    }
                }
            }
            if let Some(&(p, q)) = gen_of.get(&j) {
                c.lin_y.push((if part == Part::P { p } else { q }, -1.0));
            }
            cons.push(c);
        }
    }

    // Phase reference: Im v_s = 0.
    let mut pin = QuadraticConstraint::new(Tag::SlackPhase, 0.0, 0.0);
    pin.quad.add(n + case.slack(), n + case.slack(), 1.0);
    cons.push(pin);

    // Voltage bands, squared.
    for bus in &case.buses {
        let j = bus.id;
        let mut c = QuadraticConstraint::new(Tag::Voltage { bus: j }, bus.v_min.powi(2), bus.v_max.powi(2));
        c.quad = magnitude_form(n, j);
        if let Some(&(lo, hi)) = voltage_slack.get(j) {
            // Split into two rows so each side gets its own slack.
            let mut upper = c.clone();
            c.beta = f64::INFINITY;
            c.lin_y.push((lo, 1.0));
            upper.alpha = f64::NEG_INFINITY;
            upper.lin_y.push((hi, -1.0));
            cons.push(c);
            cons.push(upper);
        } else {
            cons.push(c);
        }
    }

    // Option auxiliaries and McCormick envelopes of w = a t.
    for i in 0..n_u {
        for role in Role::ALL {
            let r = role.index();
            let mut link = QuadraticConstraint::new(Tag::TraceLink { option: i, role }, 0.0, 0.0);
            link.quad = opt_forms[i][r].clone();
            link.lin_y.push((t[i][r], -1.0));
            cons.push(link);

            let tb = t_bound[i][r];
            let (ti, wi) = (t[i][r], w[i][r]);
            let mc = |row: u8, ly: Vec<(usize, f64)>, la: f64, alpha: f64, beta: f64| QuadraticConstraint {
                tag: Tag::McCormick { option: i, role, row },
                quad: QuadForm::new(),
                lin_y: ly,
                lin_a: vec![(i, la)],
                alpha,
                beta,
            };
            // w + T a >= 0, w - T a <= 0
            cons.push(mc(0, vec![(wi, 1.0)], tb, 0.0, f64::INFINITY));
            cons.push(mc(1, vec![(wi, 1.0)], -tb, f64::NEG_INFINITY, 0.0));
            // w - t - T a >= -T, w - t + T a <= T
            cons.push(mc(2, vec![(wi, 1.0), (ti, -1.0)], -tb, -tb, f64::INFINITY));
            cons.push(mc(3, vec![(wi, 1.0), (ti, -1.0)], tb, f64::NEG_INFINITY, tb));
        }
    }

    // Current limits and angle limits.
    for (b, br) in case.branches.iter().enumerate() {
        let mut link = QuadraticConstraint::new(Tag::VoltageDifference { branch: b }, 0.0, 0.0);
        link.quad = difference_form(n, br.from, br.to);
        link.lin_y.push((u[b], -1.0));
        cons.push(link);

        let u_max = y_bounds[u[b]].1;
        let options = catalog.per_branch.get(&b).cloned().unwrap_or_default();
        let y2 = br.y.norm_sqr();
        let big_m = options
            .iter()
            .map(|&i| (br.y + catalog.options[i].delta_y).norm_sqr())
            .fold(y2, f64::max)
            * u_max;
        let slack = current_slack_of.get(&b).copied();
        if br.i_max.is_finite() {
            // |y|^2 u - M sum a <= I^2
            let mut c = QuadraticConstraint::new(Tag::CurrentBase { branch: b }, f64::NEG_INFINITY, br.i_max.powi(2));
            c.lin_y.push((u[b], y2));
            c.lin_a = options.iter().map(|&i| (i, -big_m)).collect();
            if let Some(s) = slack {
                c.lin_y.push((s, -1.0));
            }
            cons.push(c);
        }
        for &i in &options {
            let opt = &catalog.options[i];
            let i_max = br.i_max + opt.delta_i;
            if !i_max.is_finite() {
                continue;
            }
            // |y + dy|^2 u + M a <= (I + dI)^2 + M
            let mut c = QuadraticConstraint::new(Tag::CurrentOption { option: i }, f64::NEG_INFINITY, i_max.powi(2) + big_m);
            c.lin_y.push((u[b], (br.y + opt.delta_y).norm_sqr()));
            c.lin_a.push((i, big_m));
            if let Some(s) = slack {
                c.lin_y.push((s, -1.0));
            }
            cons.push(c);
        }
        if let Some(&alpha) = limits.angle.get(&b) {
            // u - sin^2(alpha) |v_f|^2 <= 0
            let mut c = QuadraticConstraint::new(Tag::Angle { branch: b }, f64::NEG_INFINITY, 0.0);
            let s2 = alpha.sin().powi(2);
            for (q, coef) in magnitude_form(n, br.from).entries.iter() {
                c.quad.add(q.0, q.1, -s2 * coef);
            }
            c.lin_y.push((u[b], 1.0));
            cons.push(c);
        }
    }

    SnapshotBlock {
        label: snap.label.clone(),
        layout: YLayout {
            generation,
            t,
            w,
            u,
            voltage_slack,
            current_slack,
            len: y_bounds.len(),
        },
        y_bounds,
        constraints: cons,
    }
}

/// Auxiliary values of a block at a concrete point: generation from the
/// injections, `t`, `w` and `u` from their definitions, zero slacks.
pub fn lift_auxiliaries(
    model: &QcqpModel,
    k: usize,
    z: &[f64],
    a: &[f64],
) -> Vec<f64> {
    let b = &model.blocks[k];
    let mut y = vec![0.0; b.layout.len];
    for c in &b.constraints {
        match c.tag {
            Tag::TraceLink { option, role } => {
                let tv = c.quad.eval(z);
                y[b.layout.t[option][role.index()]] = tv;
                y[b.layout.w[option][role.index()]] = a[option] * tv;
            }
            Tag::VoltageDifference { branch } => y[b.layout.u[branch]] = c.quad.eval(z),
            _ => {}
        }
    }
    // Generation closes the power balance.
    for c in &b.constraints {
        if let Tag::Kirchhoff { bus, part } = c.tag {
            if let Some(&(_, p, q)) = b.layout.generation.iter().find(|g| g.0 == bus) {
                let g = if part == Part::P { p } else { q };
                let others: f64 = c
                    .lin_y
                    .iter()
                    .filter(|&&(idx, _)| idx != g)
                    .map(|&(idx, coef)| coef * y[idx])
                    .sum();
                y[g] = c.quad.eval(z) + others - c.alpha;
            }
        }
    }
    y
}

/// `z = [Re v; Im v]`.
pub fn stack(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|c| c.re).chain(v.iter().map(|c| c.im)).collect()
}

/// Inverse of [`stack`].
pub fn unstack(z: &[f64]) -> Vec<Complex64> {
    let n = z.len() / 2;
    (0..n).map(|j| Complex64::new(z[j], z[n + j])).collect()
}

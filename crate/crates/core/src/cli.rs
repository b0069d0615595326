//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use crate::bnb::{branch_and_bound, brute_force_oracle, write_log, BnbParams, Gap, PlanResult};
use crate::error::{Error, Result};
use crate::io::{read_case, read_catalog, read_scenarios, read_snapshot, write_text};
use crate::network::{NetworkCase, UpgradeCatalog};
use crate::operational::{check_feasibility, OperatingPoint, OperationalLimits, ScenarioSet, Snapshot};
use crate::policies::{policy_by_name, NewtonPfPolicy, Policy};
use crate::power_flow::{newton_power_flow, PfOptions, PfSpec};
use crate::relaxation::{build_qcqp, export_json, relax_to_sdp, solve_node_relaxation, ClarabelBackend, NodeProblem, QcqpOptions};

/// Exit code of `check` when the point violates a limit.
pub const EXIT_VIOLATED: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "gridplan", version, about = "Transmission upgrade planning under operational policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a minimum-cost upgrade plan by Branch-and-Bound.
    Plan(PlanArgs),
    /// Check a snapshot's operating point against the limits.
    Check(CheckArgs),
    /// Run a Newton power flow.
    Pf(PfArgs),
    /// Solve the root relaxation.
    Relax(RelaxArgs),
    /// Evaluate the policy on every admissible plan.
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    /// Network case (`.m` MATPOWER or JSON).
    #[arg(long)]
    pub case: PathBuf,
    /// Replace every bus voltage band, e.g. `1.01,1.07`.
    #[arg(long, value_parser = parse_band)]
    pub v_band: Option<(f64, f64)>,
}

impl CaseArgs {
    fn load(&self) -> Result<NetworkCase> {
        let case = read_case(&self.case)?;
        Ok(match self.v_band {
            Some((lo, hi)) => case.with_voltage_band(lo, hi),
            None => case,
        })
    }
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Snapshot files; the plan must serve all of them.
    #[arg(long, num_args = 1.., required = true)]
    pub snapshots: Vec<PathBuf>,
    #[arg(long)]
    pub catalog: PathBuf,
}

impl ProblemArgs {
    fn load(&self) -> Result<(NetworkCase, ScenarioSet, UpgradeCatalog)> {
        let case = self.case.load()?;
        let scenarios = read_scenarios(&case, &self.snapshots)?;
        let catalog = read_catalog(&case, &self.catalog)?;
        Ok((case, scenarios, catalog))
    }
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// `none`, `opf` or `newton-pf`.
    #[arg(long, default_value = "newton-pf")]
    pub policy: String,
    /// Absolute optimality gap (default: `1 - 1e-6` for integral costs,
    /// otherwise relative `1e-4`).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Maximum number of relaxation solves.
    #[arg(long)]
    pub node_budget: Option<usize>,
    /// Open nodes solved concurrently per round.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Skip the greedy starting incumbent.
    #[arg(long)]
    pub no_greedy: bool,
    /// PlanResult JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines event log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PfArgs {
    #[command(flatten)]
    pub case: CaseArgs,
    /// Demand and starting voltages; zero demand and a flat start without.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelaxArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the root conic program as JSON.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "newton-pf")]
    pub policy: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(0.0 < lo && lo < hi) {
        return Err(format!("need 0 < LO < HI, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

fn policy(name: &str) -> Result<Box<dyn Policy>> {
    policy_by_name(name).ok_or_else(|| Error::parse("--policy", format!("unknown policy `{name}` (none, opf, newton-pf)")))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            say(text);
            Ok(())
        }
    }
}

/// Prints a line to stdout, ignoring a closed pipe.
fn say(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{}", text.trim_end());
}

fn finite(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value serializes")
}

/// Human-readable summary: one row per snapshot with the upgrades, the
/// cost, the slack-bus injection in MW / MVAr and the average voltage
/// slack.
pub fn plan_table(case: &NetworkCase, catalog: &UpgradeCatalog, scenarios: &ScenarioSet, result: &PlanResult) -> String {
    let upgrades = match &result.plan {
        Some(p) if p.count() == 0 => "none".to_string(),
        Some(p) => p
            .active()
            .map(|i| {
                let br = &case.branches[catalog.options[i].branch];
                format!("{i}({}-{})", br.from, br.to)
            })
            .collect::<Vec<_>>()
            .join(" "),
        None => "-".to_string(),
    };
    let cost = result.cost.map_or("-".to_string(), |c| format!("{c}"));
    let mut t = String::new();
    let _ = writeln!(
        t,
        "status {:?}, policy {}, bounds [{}, {}]",
        result.status, result.policy, result.lower_bound, result.upper_bound
    );
    let _ = writeln!(
        t,
        "{:<12} {:<28} {:>8} {:>14} {:>16} {:>14}",
        "Snapshot", "Upgrades", "Cost", "Slack P (MW)", "Slack Q (MVAr)", "Avg |v| slack"
    );
    for (k, snap) in scenarios.iter().enumerate() {
        let d = result.outcomes.get(k).map(|o| &o.diagnostics);
        let get = |key: &str, scale: f64| {
            d.and_then(|d| d.get(key))
                .map_or("-".to_string(), |v| format!("{:.2}", v * scale))
        };
        let _ = writeln!(
            t,
            "{:<12} {:<28} {:>8} {:>14} {:>16} {:>14}",
            snap.label,
            upgrades,
            cost,
            get("slack_p", case.base_mva),
            get("slack_q", case.base_mva),
            d.and_then(|d| d.get("avg_voltage_slack"))
                .map_or("-".to_string(), |v| format!("{v:.2e}")),
        );
    }
    t
}

fn cmd_plan(args: &PlanArgs) -> Result<u8> {
    let (case, scenarios, catalog) = args.problem.load()?;
    let policy = policy(&args.policy)?;
    let params = BnbParams {
        gap: args.epsilon.map(Gap::Absolute),
        time_budget: args.time_budget.map(Duration::from_secs_f64),
        node_budget: args.node_budget,
        batch: args.batch,
        greedy: !args.no_greedy,
        ..BnbParams::default()
    };
    let run = branch_and_bound(&case, &catalog, &scenarios, policy.as_ref(), &OperationalLimits::none(), &params)?;
    if let Some(p) = &args.log {
        write_log(p, &run.log)?;
    }
    match &args.out {
        Some(p) => {
            write_text(p, &run.result.to_json())?;
            say(&plan_table(&case, &catalog, &scenarios, &run.result));
        }
        None => say(&run.result.to_json()),
    }
    Ok(run.result.status.exit_code() as u8)
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let case = args.case.load()?;
    let snapshot = read_snapshot(&case, &args.snapshot)?;
    let limits = OperationalLimits::none();
    let (source, point, report) = match &snapshot.v_recorded {
        Some(v) => {
            let y = crate::network::build_admittance(&case)?;
            let point = OperatingPoint::from_voltages(&y, v.clone());
            let report = check_feasibility(&case, &snapshot, &point, &limits);
            ("recorded", Some(point), report)
        }
        None => {
            let o = NewtonPfPolicy::default().evaluate(&case, &snapshot, &limits);
            ("newton-pf", o.point, o.report)
        }
    };
    let Some(point) = point else {
        emit(
            args.out.as_deref(),
            &pretty(&json!({ "source": source, "converged": false })),
        )?;
        return Ok(EXIT_VIOLATED);
    };
    let clean = report.is_clean();
    let doc = json!({
        "source": source,
        "clean": clean,
        "violations": report.violations(),
        "report": report,
        "voltages": point.v.iter().map(|v| [v.norm(), v.arg()]).collect::<Vec<_>>(),
    });
    emit(args.out.as_deref(), &pretty(&doc))?;
    Ok(if clean { 0 } else { EXIT_VIOLATED })
}

fn cmd_pf(args: &PfArgs) -> Result<u8> {
    let case = args.case.load()?;
    let snapshot = match &args.snapshot {
        Some(p) => read_snapshot(&case, p)?,
        None => Snapshot {
            label: "unloaded".into(),
            demand: vec![Complex64::new(0.0, 0.0); case.n_bus()],
            v_recorded: None,
        },
    };
    let spec = PfSpec::from_case(&case, &snapshot);
    let opts = PfOptions {
        max_iter: args.max_iter,
        ..PfOptions::default()
    };
    let res = newton_power_flow(&case, &spec, &opts)?;
    emit(
        args.out.as_deref(),
        &serde_json::to_string_pretty(&res).expect("power-flow result serializes"),
    )?;
    Ok(if res.converged { 0 } else { 2 })
}

fn cmd_relax(args: &RelaxArgs) -> Result<u8> {
    let (case, scenarios, catalog) = args.problem.load()?;
    let model = build_qcqp(&case, &catalog, &scenarios, &OperationalLimits::none(), &QcqpOptions::default())?;
    let node = NodeProblem::root(catalog.n());
    if let Some(p) = &args.export {
        write_text(p, &export_json(&relax_to_sdp(&model, &node)))?;
    }
    let sol = solve_node_relaxation(&model, &node, &ClarabelBackend, &Default::default());
    let doc = json!({
        "status": sol.status,
        "lower_bound": finite(sol.lower_bound),
        "objective": finite(sol.objective),
        "a": sol.a,
        "iterations": sol.iterations,
        "detail": sol.detail,
    });
    emit(args.out.as_deref(), &pretty(&doc))?;
    Ok(0)
}

fn cmd_enumerate(args: &EnumerateArgs) -> Result<u8> {
    let (case, scenarios, catalog) = args.problem.load()?;
    let policy = policy(&args.policy)?;
    let oracle = brute_force_oracle(&case, &catalog, &scenarios, policy.as_ref(), &OperationalLimits::none())?;
    let mut doc: serde_json::Value = serde_json::from_str(&oracle.result.to_json()).expect("result is json");
    doc["feasible"] = json!(oracle.feasible);
    doc["admissible"] = json!(oracle.admissible);
    emit(args.out.as_deref(), &pretty(&doc))?;
    Ok(oracle.result.status.exit_code() as u8)
}

/// Runs a parsed command and returns its exit code; errors map to 1.
pub fn run(cli: &Cli) -> u8 {
    let r = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Check(a) => cmd_check(a),
        Command::Pf(a) => cmd_pf(a),
        Command::Relax(a) => cmd_relax(a),
        Command::Enumerate(a) => cmd_enumerate(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> ExitCode {
    ExitCode::from(run(&Cli::parse()))
}

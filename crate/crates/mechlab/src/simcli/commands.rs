use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{Format, ScenarioConfig};
use super::montecarlo::monte_carlo;
use super::num::Num;
use super::output::{
    comparison_table, gap_table, potential_table, threshold_table, value_table, write_json, write_table,
};
use crate::envlab::checks::{check_fosd, check_full_support, check_lipschitz};
use crate::envlab::{Environment, ValidationReport, Violation};
use crate::error::{Error, Result};
use crate::icver::{one_shot_check, Branch};
use crate::lattice::Lattice;
use crate::mechcore::{AllocationRule, Mechanism, ReportingStrategy, StoppingPolicy};
use crate::optmech::{monotone_payoff_check, rp_check, sweep_eta};
use crate::paysynth::{synthesize_on, verify_sufficiency, Synthesis};
use crate::valsolve::{check_single_crossing, mean_first_passage, solve_value, ValueSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Validate,
    Solve,
    VerifyIc,
    Synthesize,
    Optimize,
    Simulate,
    Report,
}

/// Non-error outcome of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    ValidationFailure,
    IcFailure,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::ValidationFailure => 2,
            Self::IcFailure => 3,
        }
    }
}

/// Process exit code for an error: 2 for inputs that violate the model's
/// assumptions, 4 for everything else.
pub fn error_code(err: &Error) -> i32 {
    match err {
        Error::Support(_) | Error::Assumption(_) | Error::Degenerate(_) | Error::NotThreshold { .. } => 2,
        _ => 4,
    }
}

/// Command-line settings that take precedence over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    /// Threshold vectors; more than one makes the optimizer sweep them.
    pub eta: Option<Vec<Vec<Num>>>,
    pub strict_literal: bool,
    pub format: Option<Format>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(n) = self.grid {
            cfg.environment.nodes = n;
        }
        if let Some(seed) = self.seed {
            cfg.simulation.seed = seed;
            cfg.solver.optimizer.config.seed = seed;
        }
        if let Some(etas) = &self.eta {
            if let Some(first) = etas.first() {
                cfg.synthesis.eta = first.clone();
            }
            cfg.solver.optimizer.eta_sweep = (etas.len() > 1).then(|| etas.clone());
        }
        if self.strict_literal {
            cfg.solver.strict_literal = true;
        }
        if let Some(format) = self.format {
            cfg.output.format = format;
        }
    }
}

/// Parses `"0.25"`, `"0.1,0.2"` (one vector) or `"0;0.5;1"` (a sweep).
pub fn parse_eta_list(text: &str) -> Result<Vec<Vec<Num>>> {
    text.split(';')
        .map(|vector| {
            vector
                .split(',')
                .map(|v| Num::parse(v).map_err(|e| Error::Schema(format!("--eta: {e}"))))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: Status,
    /// Files written, in order, including `run_report.json` last.
    pub files: Vec<PathBuf>,
    /// One-line human summaries.
    pub summary: Vec<String>,
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    dir: &'a Path,
    files: Vec<PathBuf>,
    modules: Map<String, Value>,
    summary: Vec<String>,
    status: Status,
}

/// Mechanism lowered onto the grids, with its synthesis when payments were built.
struct Resolved<'e> {
    alloc: AllocationRule,
    mech: Mechanism,
    base: Lattice<'e>,
    lattice: Lattice<'e>,
    synthesis: Option<Synthesis>,
}

impl<'a> Run<'a> {
    fn table(&mut self, stem: &str, table: &super::output::Table) -> Result<()> {
        let path = write_table(self.dir, stem, self.cfg.output.format, table)?;
        self.files.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = write_json(self.dir, name, value)?;
        self.files.push(path);
        Ok(())
    }

    fn module(&mut self, name: &str, value: impl Serialize) -> Result<()> {
        self.modules.insert(name.to_owned(), serde_json::to_value(value)?);
        Ok(())
    }

    fn fail(&mut self, status: Status) {
        if self.status == Status::Success {
            self.status = status;
        }
    }

    fn synthesize<'e>(&self, base: &Lattice<'e>) -> Result<Synthesis> {
        let mut synthesis = synthesize_on(base, &self.cfg.synthesis_options())?;
        if self.cfg.synthesis.rebase_bottom {
            synthesis.rebase_bottom_surplus(base, self.cfg.solver_options())?;
        }
        Ok(synthesis)
    }

    /// Explicit payments when given, synthesized ones otherwise.
    fn resolve<'e>(&self, env: &'e Environment, force_synthesis: bool) -> Result<Resolved<'e>> {
        let alloc = self.cfg.allocation(env)?;
        let base = Lattice::for_allocation(env, &alloc)?;
        match self.cfg.payments()? {
            Some(payments) if !force_synthesis => {
                let mech = Mechanism::new(alloc.clone(), payments)?;
                let lattice = Lattice::new(env, &mech)?;
                Ok(Resolved { alloc, mech, base, lattice, synthesis: None })
            }
            _ => {
                let synthesis = self.synthesize(&base)?;
                let lattice = synthesis.lattice(&base)?;
                let mech = synthesis.mechanism(env, &alloc)?;
                Ok(Resolved { alloc, mech, base, lattice, synthesis: Some(synthesis) })
            }
        }
    }

    fn solve(&mut self, r: &Resolved) -> Result<ValueSolution> {
        let solution = solve_value(&r.lattice, self.cfg.solver_options())?;
        for t in 1..=solution.horizon() {
            self.table(&format!("values_t{t}"), &value_table(&solution, t))?;
        }
        let cutoffs = solution.cutoffs().ok();
        let passage = match &cutoffs {
            Some(c) => Some(mean_first_passage(&r.lattice, c)?),
            None => None,
        };
        let bottom = solution.period(1).value[(0, 0)];
        self.summary.push(format!(
            "solve: ex-ante agent value {:.9}, bottom value {bottom:.3e}, mean exit period {}",
            solution.ex_ante_value,
            passage.map_or("n/a".into(), |p| format!("{p:.9}"))
        ));
        self.module(
            "solve",
            json!({
                "ex_ante_value": solution.ex_ante_value,
                "identity_gap": solution.identity_gap,
                "bottom_value": bottom,
                "cutoffs": cutoffs.map(|c| c.into_iter().map(finite_or_null).collect::<Vec<_>>()),
                "mean_first_passage": passage,
            }),
        )?;
        Ok(solution)
    }

    fn verify_ic(&mut self, r: &Resolved, solution: &ValueSolution) -> Result<()> {
        let report = one_shot_check(&r.lattice, solution, self.cfg.solver.ic_tolerance.0);
        self.json("ic_report.json", &report)?;
        self.summary.push(format!(
            "verify-ic: {} (worst gap {:.3e}, tolerance {:.1e})",
            if report.verdict { "PASS" } else { "FAIL" },
            report.worst_gap,
            report.tolerance
        ));
        if !report.verdict {
            self.fail(Status::IcFailure);
        }
        self.module(
            "verify_ic",
            json!({
                "verdict": report.verdict,
                "bellman_verdict": report.bellman_verdict,
                "worst_gap": report.worst_gap,
                "worst_bellman_gap": report.worst_bellman_gap,
                "forms_disagree": report.forms_disagree,
            }),
        )
    }

    fn potentials(&mut self, r: &Resolved) -> Result<()> {
        let Some(synthesis) = &r.synthesis else { return Ok(()) };
        for t in 1..=r.lattice.horizon() {
            self.table(&format!("potentials_t{t}"), &potential_table(&r.lattice, synthesis, t))?;
        }
        Ok(())
    }

    fn validate(&mut self, env: &Environment) -> Result<()> {
        let mut reports = vec![check_full_support(env), check_lipschitz(env)];
        if self.cfg.mechanism.is_some() {
            let r = self.resolve(env, false)?;
            reports.insert(1, check_fosd(env, &r.alloc));
            let solution = solve_value(&r.lattice, self.cfg.solver_options())?;
            let crossing = check_single_crossing(&r.lattice, &solution);
            reports.push(crossing.crossing);
            reports.push(bounded_payoffs(&solution));
        }
        for report in &reports {
            self.summary.push(format!(
                "validate: {} {} (worst {:.3e}, {} violations)",
                report.check,
                if report.passed { "PASS" } else { "FAIL" },
                report.worst,
                report.violation_count
            ));
        }
        if reports.iter().any(|r| !r.passed) {
            self.fail(Status::ValidationFailure);
        }
        self.module("validate", &reports)
    }

    fn synthesize_command(&mut self, env: &Environment) -> Result<()> {
        let r = self.resolve(env, true)?;
        let synthesis = r.synthesis.as_ref().expect("forced synthesis");
        self.potentials(&r)?;
        let sufficiency = verify_sufficiency(&r.base, &synthesis.potentials)?;
        let solution = solve_value(&r.lattice, self.cfg.solver_options())?;
        let participation = rp_check(&solution);
        let monotone = monotone_payoff_check(&r.lattice)?;
        self.summary.push(format!(
            "synthesize: posted prices {:?}, bottom shift {:.9}, sufficiency {}, participation {}",
            synthesis.posted,
            synthesis.bottom_shift,
            pass(sufficiency.passed),
            pass(participation.passed)
        ));
        self.module(
            "synthesize",
            json!({
                "anchors": synthesis.potentials.anchors,
                "eta": synthesis.eta,
                "posted": synthesis.posted,
                "threshold_spread": synthesis.threshold_spread,
                "bottom_shift": synthesis.bottom_shift,
                "sufficiency": sufficiency,
                "participation": participation,
                "monotone_payoff": monotone,
            }),
        )?;
        self.verify_ic(&r, &solution)
    }

    fn optimize(&mut self, env: &Environment) -> Result<()> {
        let family = self.cfg.optimizer_family();
        let opt = &self.cfg.solver.optimizer;
        let sweep = sweep_eta(env, &family, &self.cfg.optimizer_etas(), &opt.config)?;
        let best = sweep.best();
        let mut report = Map::new();
        report.insert("sweep".into(), serde_json::to_value(&sweep)?);
        if let Some(reference) = &opt.reference {
            let reference: Vec<f64> = reference.iter().map(|n| n.0).collect();
            if reference.len() != best.params.len() {
                return Err(Error::Schema(format!(
                    "reference has {} parameters, the family has {}",
                    reference.len(),
                    best.params.len()
                )));
            }
            let worst = best.params.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.insert("reference".into(), json!(reference));
            report.insert("max_abs_error".into(), json!(worst));
            self.table("optimizer_comparison", &comparison_table(&best.parameter_names, &best.params, &reference))?;
        }
        if env.horizon() > 1 || !best.eta.is_empty() {
            let alloc = best.allocation(env)?;
            let base = Lattice::for_allocation(env, &alloc)?;
            let mut opts = self.cfg.synthesis_options();
            opts.eta = best.eta.clone();
            let mut synthesis = synthesize_on(&base, &opts)?;
            if self.cfg.synthesis.rebase_bottom {
                synthesis.rebase_bottom_surplus(&base, self.cfg.solver_options())?;
            }
            let lattice = synthesis.lattice(&base)?;
            let solution = solve_value(&lattice, self.cfg.solver_options())?;
            report.insert("participation".into(), serde_json::to_value(rp_check(&solution))?);
            report.insert("monotone_payoff".into(), serde_json::to_value(monotone_payoff_check(&lattice)?)?);
        }
        self.json("optimizer_report.json", &report)?;
        let params: Vec<String> = best.params.iter().map(|p| format!("{p:.6}")).collect();
        self.summary.push(format!(
            "optimize: eta {:?}, value {:.9}, params [{}], gradient norm {:.2e}",
            best.eta,
            best.value,
            params.join(", "),
            best.gradient_norm
        ));
        self.module(
            "optimize",
            json!({
                "eta": best.eta,
                "params": best.params,
                "parameter_names": best.parameter_names,
                "value": best.value,
                "gradient_norm": best.gradient_norm,
                "evaluations": sweep.points.iter().map(|p| p.evaluations).sum::<usize>(),
            }),
        )
    }

    fn simulate(&mut self, env: &Environment) -> Result<()> {
        let r = self.resolve(env, false)?;
        let solution = solve_value(&r.lattice, self.cfg.solver_options())?;
        let cutoffs = solution.cutoffs()?;
        let passage = mean_first_passage(&r.lattice, &cutoffs)?;
        let policy = StoppingPolicy::threshold(&cutoffs, env.grid(env.horizon()).hi());
        let sim = &self.cfg.simulation;
        let stats = monte_carlo(env, &r.mech, &ReportingStrategy::truthful(), &policy, sim.paths, sim.seed)?;
        let z = |mean: f64, exact: f64, stderr: f64| if stderr > 0.0 { (mean - exact) / stderr } else { 0.0 };
        let agent_z = z(stats.agent_payoff.mean, solution.ex_ante_value, stats.agent_payoff.stderr);
        let stop_z = z(stats.stop_time.mean, passage, stats.stop_time.stderr);
        let report = json!({
            "stats": stats,
            "cutoffs": cutoffs.iter().copied().map(finite_or_null).collect::<Vec<_>>(),
            "quadrature": { "agent_ex_ante": solution.ex_ante_value, "mean_first_passage": passage },
            "agent_z": agent_z,
            "stop_time_z": stop_z,
        });
        self.json("mc_stats.json", &report)?;
        self.summary.push(format!(
            "simulate: {} paths, agent mean {:.6} ± {:.1e} (quadrature {:.6}), mean exit {:.4} (quadrature {:.6})",
            stats.paths,
            stats.agent_payoff.mean,
            stats.agent_payoff.stderr,
            solution.ex_ante_value,
            stats.stop_time.mean,
            passage
        ));
        self.module("simulate", json!({ "agent_z": agent_z, "stop_time_z": stop_z, "paths": stats.paths }))
    }

    fn report(&mut self, env: &Environment) -> Result<()> {
        let r = self.resolve(env, false)?;
        let solution = self.solve(&r)?;
        self.potentials(&r)?;
        self.verify_ic(&r, &solution)?;
        let horizon = env.horizon();
        let mut cutoffs: Vec<(usize, f64)> = match solution.cutoffs() {
            Ok(c) => c.into_iter().enumerate().map(|(k, v)| (k + 1, v)).collect(),
            Err(_) => Vec::new(),
        };
        cutoffs.push((horizon, env.grid(horizon).hi()));
        self.table("plot_eta", &threshold_table(&cutoffs))?;
        for t in 1..=horizon {
            self.table(&format!("plot_gap_t{t}"), &gap_table(&r.lattice, &solution, t, 0, Branch::Bellman))?;
        }
        Ok(())
    }
}

fn pass(flag: bool) -> &'static str {
    if flag {
        "PASS"
    } else {
        "FAIL"
    }
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Every interim value and stop payoff is finite.
fn bounded_payoffs(solution: &ValueSolution) -> ValidationReport {
    let violations: Vec<Violation> = solution
        .periods
        .iter()
        .flat_map(|p| {
            let n = p.points.len();
            p.value
                .values()
                .zip(p.stop_payoff.values())
                .enumerate()
                .filter(|(_, (v, j))| !(v.is_finite() && j.is_finite()))
                .map(move |(k, _)| Violation {
                    period: p.period,
                    node: k % n,
                    magnitude: f64::INFINITY,
                    detail: "payoff is not finite".into(),
                })
        })
        .collect();
    let worst = if violations.is_empty() { 0.0 } else { f64::INFINITY };
    ValidationReport::from_violations("bounded_payoffs", violations, worst)
}

/// Runs `command` and writes its files plus `run_report.json` into `out`.
pub fn run(command: Command, cfg: &ScenarioConfig, out: &Path) -> Result<RunOutcome> {
    let started = Instant::now();
    fs::create_dir_all(out)?;
    let env = cfg.environment()?;
    let mut run =
        Run { cfg, dir: out, files: Vec::new(), modules: Map::new(), summary: Vec::new(), status: Status::Success };
    match command {
        Command::Validate => run.validate(&env)?,
        Command::Solve => {
            let r = run.resolve(&env, false)?;
            run.solve(&r)?;
        }
        Command::VerifyIc => {
            let r = run.resolve(&env, false)?;
            let solution = solve_value(&r.lattice, cfg.solver_options())?;
            run.verify_ic(&r, &solution)?;
        }
        Command::Synthesize => run.synthesize_command(&env)?,
        Command::Optimize => run.optimize(&env)?,
        Command::Simulate => run.simulate(&env)?,
        Command::Report => run.report(&env)?,
    }
    let names: Vec<String> =
        run.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    let mut report = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "scenario": cfg.name,
        "config_digest": cfg.digest(),
        "seed": cfg.simulation.seed,
        "status": run.status,
        "files": names,
        "modules": run.modules,
    });
    if cfg.output.wall_time {
        report["wall_time_seconds"] = json!(started.elapsed().as_secs_f64());
    }
    run.json("run_report.json", &report)?;
    Ok(RunOutcome { status: run.status, files: run.files, summary: run.summary })
}

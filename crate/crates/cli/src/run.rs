use std::path::PathBuf;

use cavity_node::simulator::{MultiNodeState, NodeState, MAX_STEP_RATE};
use cavity_node::{
    adiabatic_pulse, envelope_from_adiabatic_pulse, eta_gen, eta_trap, eta_trap_n, grid, margin_gen, margin_gen_n,
    margin_trap, margin_trap_n, output_overlap, simulate, simulate_n, synthesize_gen, synthesize_gen_n,
    synthesize_trap, synthesize_trap_n, ControlPulse, FeasibilityReport, Input, MultiNodeParams, MultilevelError,
    NodeError, NodeParams, PhotonEnvelope, SimError, SynthesisError,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{InitialState, InputSource, Node, PulseSource, RunMode, ScenarioConfig};
use crate::output::{self, BudgetSummary, Efficiencies, RunReport, Verdict};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("envelope: {0}")]
    Envelope(String),
    #[error("node: {0}")]
    Node(#[from] NodeError),
    #[error("synthesis: {0}")]
    Synthesis(#[from] SynthesisError),
    #[error("multi-level synthesis: {0}")]
    Multilevel(#[from] MultilevelError),
    #[error("simulation: {0} (reduce grid.dt)")]
    Simulation(#[from] SimError),
    #[error("{0}")]
    Unsupported(String),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Where files go and how wide sweeps may fan out.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub prefix: String,
    /// Sweep worker threads; `None` uses one per core.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self { out_dir: cfg.output.directory.clone(), prefix: cfg.output.prefix.clone(), workers: None }
    }

    fn file(&self, report: &mut RunReport, suffix: &str) -> PathBuf {
        let name = format!("{}_{suffix}.csv", self.prefix);
        report.files.push(name.clone());
        self.out_dir.join(name)
    }
}

/// Runs `mode` on the scenario, writes every series plus the text and JSON
/// reports, and returns the report.
pub fn run(cfg: &ScenarioConfig, mode: RunMode, opts: &RunOptions) -> Result<RunReport, RunError> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut report = match mode {
        RunMode::Feasibility => feasibility(cfg, opts)?,
        RunMode::Trap => transfer(cfg, opts, RunMode::Trap)?,
        RunMode::Generate => transfer(cfg, opts, RunMode::Generate)?,
        RunMode::Adiabatic => adiabatic(cfg, opts)?,
        RunMode::Simulate => forward(cfg, opts)?,
        RunMode::Sweep => sweep(cfg, opts)?,
    };
    report.write(&opts.out_dir, &opts.prefix)?;
    Ok(report)
}

fn envelope(cfg: &ScenarioConfig) -> Result<PhotonEnvelope, RunError> {
    cfg.build_envelope().map_err(RunError::Envelope)
}

fn margin_report(report: &mut RunReport, r: &FeasibilityReport) {
    report.min_margin = Some(r.min_margin);
    report.argmin_t = Some(r.argmin_t);
}

fn times(env: &PhotonEnvelope) -> Vec<f64> {
    env.grid().times().collect()
}

/// Fastest rate the simulator will see, for the near-limit warning.
fn step_warning(report: &mut RunReport, dt: f64, pulse: &ControlPulse, node: &Node) {
    let node_rate = match node {
        Node::Single(p) => [p.g0.norm(), p.kappa + p.gamma_c, p.gamma_sp, p.delta.abs()].into_iter().fold(0.0, f64::max),
        Node::Multi(m) => m
            .couplings
            .iter()
            .map(|c| c.norm())
            .chain(m.deltas.iter().map(|d| d.abs()))
            .chain(m.gammas.iter().copied())
            .fold(m.kappa + m.gamma_c, f64::max),
    };
    let product = dt * node_rate.max(pulse.peak());
    if product > 0.5 * MAX_STEP_RATE && product <= MAX_STEP_RATE {
        report.warnings.push(format!(
            "time step is within a factor 2 of the stability limit (dt * fastest rate = {product:.3}, limit {MAX_STEP_RATE})"
        ));
    }
}

fn feasibility(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let env = envelope(cfg)?;
    let (trap, gen) = match cfg.node()? {
        Node::Single(p) => (margin_trap(&env, &p), margin_gen(&env, &p)),
        Node::Multi(m) => (margin_trap_n(&env, &m)?, margin_gen_n(&env, &m)?),
    };
    let verdict = if trap.feasible { Verdict::Feasible } else { Verdict::Infeasible };
    let mut report = RunReport::new("feasibility", verdict);
    margin_report(&mut report, &trap);
    report.efficiency = Some(Efficiencies { predicted: trap.predicted_efficiency, ..Default::default() });
    report.notes.push(format!(
        "generation criterion: {} (min margin {})",
        if gen.feasible { "feasible" } else { "infeasible" },
        output::fmt_num(gen.min_margin)
    ));
    let path = opts.file(&mut report, "margin");
    output::write_margin(&path, &times(&env), &trap.margin)?;
    Ok(report)
}

fn transfer(cfg: &ScenarioConfig, opts: &RunOptions, mode: RunMode) -> Result<RunReport, RunError> {
    let env = envelope(cfg)?;
    let node = cfg.node()?;
    let trapping = mode == RunMode::Trap;
    let name = mode.to_string();
    let infeasible = |r: &FeasibilityReport| -> Result<RunReport, RunError> {
        let mut report = RunReport::new(&name, Verdict::Infeasible);
        margin_report(&mut report, r);
        if trapping && !r.margin.is_empty() {
            let path = opts.file(&mut report, "margin");
            output::write_margin(&path, &times(&env), &r.margin)?;
        }
        Ok(report)
    };
    match &node {
        Node::Single(p) => {
            let syn = if trapping { synthesize_trap(&env, p) } else { synthesize_gen(&env, p) };
            let syn = match syn {
                Ok(s) => s,
                Err(SynthesisError::Infeasible { .. }) => {
                    return infeasible(&if trapping { margin_trap(&env, p) } else { margin_gen(&env, p) })
                }
                Err(e) => return Err(e.into()),
            };
            let mut report = RunReport::new(&name, Verdict::Feasible);
            margin_report(&mut report, &syn.report);
            step_warning(&mut report, env.grid().dt(), &syn.pulse, &node);
            let (input, init) = if trapping { (Input::Envelope(&env), NodeState::EMPTY) } else { (Input::Vacuum, NodeState::STORED) };
            let sim = simulate(input, &syn.pulse, p, init)?;
            let (predicted, simulated) = if trapping {
                (eta_trap(&env, p), sim.trajectory.final_storage())
            } else {
                report.overlap = Some(output_overlap(&sim.alpha_out, &env)?);
                (eta_gen(&env, p), sim.budgets.emitted)
            };
            report.efficiency = Some(efficiencies(predicted, syn.efficiency, simulated));
            report.budgets = Some(sim.budgets.into());
            let path = opts.file(&mut report, "pulse");
            output::write_pulse(&path, &syn.pulse, &syn.trajectory)?;
            let path = opts.file(&mut report, "trajectory");
            output::write_trajectory(&path, &sim)?;
            Ok(report)
        }
        Node::Multi(m) => {
            let syn = if trapping { synthesize_trap_n(&env, m) } else { synthesize_gen_n(&env, m) };
            let syn = match syn {
                Ok(s) => s,
                Err(MultilevelError::Infeasible { .. }) => {
                    return infeasible(&if trapping { margin_trap_n(&env, m)? } else { margin_gen_n(&env, m)? })
                }
                Err(e) => return Err(e.into()),
            };
            let mut report = RunReport::new(&name, Verdict::Feasible);
            margin_report(&mut report, &syn.report);
            dark_state_warning(&mut report, &syn.dark_states);
            step_warning(&mut report, env.grid().dt(), &syn.pulse, &node);
            let n = m.n_levels();
            let (input, init) =
                if trapping { (Input::Envelope(&env), MultiNodeState::empty(n)) } else { (Input::Vacuum, MultiNodeState::stored(n)) };
            let sim = simulate_n(input, &syn.pulse, m, &init)?;
            let (predicted, simulated) = if trapping {
                (eta_trap_n(&syn.trajectory, m)?, sim.trajectory.final_storage())
            } else {
                report.overlap = Some(output_overlap(&sim.alpha_out, &env)?);
                (syn.report.predicted_efficiency.unwrap_or(f64::NAN), sim.budgets.emitted)
            };
            report.efficiency = Some(efficiencies(predicted, syn.efficiency, simulated));
            report.budgets = Some(sim.budgets.into());
            let path = opts.file(&mut report, "pulse");
            output::write_pulse_n(&path, &syn.pulse, &syn.trajectory)?;
            let path = opts.file(&mut report, "trajectory");
            output::write_trajectory_n(&path, &sim)?;
            Ok(report)
        }
    }
}

fn efficiencies(predicted: f64, synthesized: f64, simulated: f64) -> Efficiencies {
    Efficiencies {
        predicted: Some(predicted),
        synthesized: Some(synthesized),
        simulated: Some(simulated),
        abs_difference: Some((predicted - simulated).abs()),
    }
}

fn dark_state_warning(report: &mut RunReport, dark: &cavity_node::DarkStateReport) {
    for &k in &dark.flagged {
        let l = dark.eigenvalues[k];
        report.warnings.push(format!(
            "dark state: eigenvalue {:.6} {:+.3e}i of the perpendicular block is (nearly) real; \
             population there never returns to the control",
            l.re, l.im
        ));
    }
}

fn single(node: Node, what: &str) -> Result<NodeParams, RunError> {
    match node {
        Node::Single(p) => Ok(p),
        Node::Multi(_) => Err(RunError::Unsupported(format!("{what} needs a single-level [node]"))),
    }
}

fn adiabatic(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let env = envelope(cfg)?;
    let p = single(cfg.node()?, "adiabatic mode")?;
    let slow = adiabatic_pulse(&env, &p)?;
    let mut report = RunReport::new("adiabatic", Verdict::Completed);

    let feas = margin_trap(&env, &p);
    margin_report(&mut report, &feas);
    if let Ok(exact) = synthesize_trap(&env, &p) {
        let cum = env.cumulative_norm();
        let dev = (0..cum.len())
            .filter(|k| (0.01..=0.99).contains(&cum[*k]))
            .map(|k| {
                let (a, b) = (slow.magnitude()[k].powi(2), exact.pulse.magnitude()[k].powi(2));
                (a - b).abs() / b
            })
            .fold(0.0, f64::max);
        report.notes.push(format!(
            "max relative deviation of |Omega|^2 from the exact pulse (running norm 0.01..0.99): {}",
            output::fmt_num(dev)
        ));
    } else {
        report.notes.push("no exact pulse exists for this photon; adiabatic estimate only".to_string());
    }
    let back = envelope_from_adiabatic_pulse(&slow, &p)?;
    if let Some(rec) = &back.envelope {
        let diff: Vec<f64> =
            rec.values().iter().zip(env.values()).map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs()).collect();
        report.notes.push(format!(
            "photon recovered from the pulse: raw norm {}, intensity L1 error {}",
            output::fmt_num(back.raw_norm),
            output::fmt_num(grid::trapezoid(&diff, env.grid().dt()))
        ));
    }

    step_warning(&mut report, env.grid().dt(), &slow, &Node::Single(p));
    let sim = simulate(Input::Envelope(&env), &slow, &p, NodeState::EMPTY)?;
    let (predicted, simulated) = (eta_trap(&env, &p), sim.trajectory.final_storage());
    report.efficiency = Some(Efficiencies {
        predicted: Some(predicted),
        synthesized: None,
        simulated: Some(simulated),
        abs_difference: Some((predicted - simulated).abs()),
    });
    report.budgets = Some(sim.budgets.into());
    let path = opts.file(&mut report, "pulse");
    output::write_pulse(&path, &slow, &sim.trajectory)?;
    let path = opts.file(&mut report, "trajectory");
    output::write_trajectory(&path, &sim)?;
    Ok(report)
}

fn pulse_for(env: &PhotonEnvelope, node: &Node, source: PulseSource) -> Result<Option<ControlPulse>, RunError> {
    let pulse = match (source, node) {
        (PulseSource::Zero, _) => Ok(ControlPulse::zero(*env.grid())),
        (PulseSource::Trap, Node::Single(p)) => synthesize_trap(env, p).map(|s| s.pulse).map_err(RunError::from),
        (PulseSource::Generate, Node::Single(p)) => synthesize_gen(env, p).map(|s| s.pulse).map_err(RunError::from),
        (PulseSource::Adiabatic, Node::Single(p)) => adiabatic_pulse(env, p).map_err(RunError::from),
        (PulseSource::Trap, Node::Multi(m)) => synthesize_trap_n(env, m).map(|s| s.pulse).map_err(RunError::from),
        (PulseSource::Generate, Node::Multi(m)) => synthesize_gen_n(env, m).map(|s| s.pulse).map_err(RunError::from),
        (PulseSource::Adiabatic, Node::Multi(_)) => {
            Err(RunError::Unsupported("the adiabatic pulse needs a single-level [node]".into()))
        }
    };
    match pulse {
        Ok(p) => Ok(Some(p)),
        Err(RunError::Synthesis(SynthesisError::Infeasible { .. }))
        | Err(RunError::Multilevel(MultilevelError::Infeasible { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

fn forward(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let env = envelope(cfg)?;
    let node = cfg.node()?;
    let sim_cfg = &cfg.simulation;
    let Some(pulse) = pulse_for(&env, &node, sim_cfg.pulse)? else {
        let mut report = RunReport::new("simulate", Verdict::Infeasible);
        report.notes.push(format!("the {:?} pulse does not exist for this photon", sim_cfg.pulse).to_lowercase());
        return Ok(report);
    };
    let input = match sim_cfg.input {
        InputSource::Envelope => Input::Envelope(&env),
        InputSource::Vacuum => Input::Vacuum,
    };
    let mut report = RunReport::new("simulate", Verdict::Completed);
    step_warning(&mut report, env.grid().dt(), &pulse, &node);
    match &node {
        Node::Single(p) => {
            let init = match sim_cfg.init {
                InitialState::Empty => NodeState::EMPTY,
                InitialState::Stored => NodeState::STORED,
                InitialState::Cavity => NodeState::CAVITY,
            };
            let sim = simulate(input, &pulse, p, init)?;
            record_forward(&mut report, &sim.budgets.into(), sim.trajectory.final_storage(), &sim.alpha_out, &env);
            let path = opts.file(&mut report, "trajectory");
            output::write_trajectory(&path, &sim)?;
        }
        Node::Multi(m) => {
            let n = m.n_levels();
            let init = match sim_cfg.init {
                InitialState::Empty => MultiNodeState::empty(n),
                InitialState::Stored => MultiNodeState::stored(n),
                InitialState::Cavity => MultiNodeState::cavity(n),
            };
            let sim = simulate_n(input, &pulse, m, &init)?;
            record_forward(&mut report, &sim.budgets.into(), sim.trajectory.final_storage(), &sim.alpha_out, &env);
            let path = opts.file(&mut report, "trajectory");
            output::write_trajectory_n(&path, &sim)?;
        }
    }
    Ok(report)
}

fn record_forward(
    report: &mut RunReport,
    budgets: &BudgetSummary,
    stored: f64,
    alpha_out: &[cavity_node::C64],
    env: &PhotonEnvelope,
) {
    report.budgets = Some(*budgets);
    report.notes.push(format!("final storage |e|^2: {}", output::fmt_num(stored)));
    if budgets.emitted > 0.0 {
        if let Ok(o) = output_overlap(alpha_out, env) {
            report.overlap = Some(o);
        }
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub feasible: bool,
    pub min_margin: f64,
    pub eta_predicted: f64,
    pub eta_simulated: f64,
    pub error: Option<String>,
}

fn sweep_point(cfg: &ScenarioConfig, mode: RunMode) -> Result<(FeasibilityReport, f64), RunError> {
    let env = envelope(cfg)?;
    let node = cfg.node()?;
    let trapping = mode != RunMode::Generate;
    let report = match (&node, trapping) {
        (Node::Single(p), true) => margin_trap(&env, p),
        (Node::Single(p), false) => margin_gen(&env, p),
        (Node::Multi(m), true) => margin_trap_n(&env, m)?,
        (Node::Multi(m), false) => margin_gen_n(&env, m)?,
    };
    if mode == RunMode::Feasibility || !report.feasible {
        return Ok((report, f64::NAN));
    }
    let source = if trapping { PulseSource::Trap } else { PulseSource::Generate };
    let Some(pulse) = pulse_for(&env, &node, source)? else {
        return Ok((report, f64::NAN));
    };
    let simulated = match &node {
        Node::Single(p) => {
            let sim = if trapping {
                simulate(Input::Envelope(&env), &pulse, p, NodeState::EMPTY)?
            } else {
                simulate(Input::Vacuum, &pulse, p, NodeState::STORED)?
            };
            if trapping {
                sim.trajectory.final_storage()
            } else {
                sim.budgets.emitted
            }
        }
        Node::Multi(m) => simulate_multi(&env, &pulse, m, trapping)?,
    };
    Ok((report, simulated))
}

fn simulate_multi(env: &PhotonEnvelope, pulse: &ControlPulse, m: &MultiNodeParams, trapping: bool) -> Result<f64, RunError> {
    let n = m.n_levels();
    Ok(if trapping {
        simulate_n(Input::Envelope(env), pulse, m, &MultiNodeState::empty(n))?.trajectory.final_storage()
    } else {
        simulate_n(Input::Vacuum, pulse, m, &MultiNodeState::stored(n))?.budgets.emitted
    })
}

/// Evaluates every sweep point on a bounded pool; rows come back in the
/// order of `values`.
pub fn sweep_rows(cfg: &ScenarioConfig, workers: Option<usize>) -> Result<Vec<SweepRow>, RunError> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| RunError::Unsupported("sweep mode needs a [sweep] block".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let rows = pool.install(|| {
        sweep
            .values
            .par_iter()
            .map(|&value| {
                let point = cfg.with_parameter(sweep.parameter, value);
                match sweep_point(&point, sweep.mode) {
                    Ok((r, simulated)) => SweepRow {
                        value,
                        feasible: r.feasible,
                        min_margin: r.min_margin,
                        eta_predicted: r.predicted_efficiency.unwrap_or(f64::NAN),
                        eta_simulated: simulated,
                        error: None,
                    },
                    Err(e) => SweepRow {
                        value,
                        feasible: false,
                        min_margin: f64::NAN,
                        eta_predicted: f64::NAN,
                        eta_simulated: f64::NAN,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    Ok(rows)
}

fn sweep(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let rows = sweep_rows(cfg, opts.workers)?;
    let sweep = cfg.sweep.as_ref().expect("checked by sweep_rows");
    let mut report = RunReport::new("sweep", Verdict::Completed);
    let n_ok = rows.iter().filter(|r| r.feasible).count();
    report.notes.push(format!(
        "{} over {} values ({} run at each point): {n_ok} feasible",
        sweep.parameter,
        rows.len(),
        sweep.mode
    ));
    if let Some(first) = rows.iter().find(|r| r.feasible) {
        report.notes.push(format!("first feasible value: {}", output::fmt_num(first.value)));
    }
    for r in &rows {
        if let Some(e) = &r.error {
            report.warnings.push(format!("point {}: {e}", output::fmt_num(r.value)));
        }
    }
    let path = opts.file(&mut report, "sweep");
    let header: Vec<String> =
        ["value", "feasible", "min_margin", "eta_predicted", "eta_simulated"].iter().map(|s| s.to_string()).collect();
    output::write_csv(
        &path,
        &header,
        rows.iter().map(|r| vec![r.value, f64::from(u8::from(r.feasible)), r.min_margin, r.eta_predicted, r.eta_simulated]),
    )?;
    Ok(report)
}

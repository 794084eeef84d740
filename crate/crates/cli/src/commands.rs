//! One function per subcommand; each returns the records to emit.

use anyhow::{anyhow, Context, Result};
use condenser_core::{
    analysis::ThinnessConfig, assemble_gram, balayage, diagnose, equilibrium, exhaustion_experiment, solve,
    thinness_demo, Point, Profile, RotationalBody,
};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ProblemConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Capacity,
    Balayage,
    Exhaust,
    Thinness,
    CheckPd,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Capacity => "capacity",
            Command::Balayage => "balayage",
            Command::Exhaust => "exhaust",
            Command::Thinness => "thinness",
            Command::CheckPd => "check-pd",
        }
    }
}

/// Overrides for the thinness demo given on the command line.
#[derive(Clone, Debug, Default)]
pub struct ThinnessFlags {
    pub profile: Option<Profile>,
    pub s: Option<f64>,
    pub radii: Option<Vec<f64>>,
}

pub struct Output {
    pub records: Vec<Value>,
    /// False when any underlying solve stopped at its iteration limit.
    pub converged: bool,
}

fn record(cmd: Command, extra: &[(&str, Value)], body: &impl Serialize) -> Result<Value> {
    let mut map = Map::new();
    map.insert("command".into(), Value::from(cmd.name()));
    for (k, v) in extra {
        map.insert((*k).into(), v.clone());
    }
    match serde_json::to_value(body)? {
        Value::Object(obj) => map.extend(obj),
        other => {
            map.insert("result".into(), other);
        }
    }
    Ok(Value::Object(map))
}

pub fn run(cmd: Command, cfg: &ProblemConfig, thinness: &ThinnessFlags) -> Result<Output> {
    match cmd {
        Command::Solve => run_solve(cfg),
        Command::Capacity => run_capacity(cfg),
        Command::Balayage => run_balayage(cfg),
        Command::Exhaust => run_exhaust(cfg),
        Command::Thinness => run_thinness(cfg, thinness),
        Command::CheckPd => run_check_pd(cfg),
    }
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    value: f64,
    kkt_residual: f64,
    multipliers: &'a [f64],
    iterations: usize,
    converged: bool,
    weights: &'a [Vec<f64>],
}

fn run_solve(cfg: &ProblemConfig) -> Result<Output> {
    let p = cfg.build()?;
    let rep = solve(&p.condenser, &p.gram, &p.field, &cfg.solver)?;
    let rec = SolveRecord {
        value: rep.value,
        kkt_residual: rep.kkt_residual,
        multipliers: &rep.multipliers,
        iterations: rep.iterations,
        converged: rep.converged,
        weights: rep.minimizer.weights(),
    };
    Ok(Output {
        records: vec![record(Command::Solve, &[], &rec)?],
        converged: rep.converged,
    })
}

/// All plate nodes with exact duplicates removed, in first-seen order.
fn union_nodes(plates: &[Vec<Point>]) -> Vec<Point> {
    let mut seen = std::collections::HashSet::new();
    plates
        .iter()
        .flatten()
        .filter(|p| seen.insert(p.key()))
        .cloned()
        .collect()
}

fn run_capacity(cfg: &ProblemConfig) -> Result<Output> {
    let nodes = union_nodes(&cfg.plate_nodes()?);
    let kernel = cfg.kernel_for(&nodes)?;
    let gram = assemble_gram(&kernel, &nodes)?;
    let tol = cfg.capacity.as_ref().and_then(|c| c.frostman_tol);
    let rep = equilibrium(&nodes, &gram, tol, &cfg.solver)?;
    let extra = [
        ("nodes", Value::from(nodes.len())),
        ("epsilon", Value::from(kernel.epsilon)),
        ("frostman_ok", Value::from(rep.frostman_ok())),
    ];
    Ok(Output {
        converged: rep.converged,
        records: vec![record(Command::Capacity, &extra, &rep)?],
    })
}

fn run_balayage(cfg: &ProblemConfig) -> Result<Output> {
    let section = cfg
        .balayage
        .as_ref()
        .ok_or_else(|| anyhow!("config has no `balayage` section"))?;
    let plates = cfg.plate_nodes()?;
    let chosen: Vec<Vec<Point>> = match &section.target_plates {
        Some(idx) => idx
            .iter()
            .map(|&i| {
                plates
                    .get(i)
                    .cloned()
                    .ok_or_else(|| anyhow!("balayage.target_plates: no plate {i}"))
            })
            .collect::<Result<_>>()?,
        None => plates,
    };
    let target = union_nodes(&chosen);
    let mut all = target.clone();
    all.extend(section.source.support().iter().cloned());
    let kernel = cfg.kernel_for(&union_nodes(&[all]))?;
    let rep = balayage(&kernel, &section.source, &target, &cfg.solver).context("balayage")?;
    let extra = [
        ("nodes", Value::from(target.len())),
        ("epsilon", Value::from(kernel.epsilon)),
    ];
    Ok(Output {
        converged: rep.converged,
        records: vec![record(Command::Balayage, &extra, &rep)?],
    })
}

fn run_exhaust(cfg: &ProblemConfig) -> Result<Output> {
    let section = cfg
        .exhaust
        .as_ref()
        .ok_or_else(|| anyhow!("config has no `exhaust` section"))?;
    let p = cfg.build()?;
    let trace = exhaustion_experiment(
        &p.condenser,
        &p.gram,
        &p.field,
        &section.fractions,
        &section.betas,
        &cfg.solver,
    )?;
    let records = trace
        .stages
        .iter()
        .enumerate()
        .map(|(k, st)| {
            record(
                Command::Exhaust,
                &[
                    ("stage", Value::from(k)),
                    ("full_value", Value::from(trace.full_value)),
                    ("monotone", Value::from(trace.monotone)),
                ],
                st,
            )
        })
        .collect::<Result<_>>()?;
    Ok(Output {
        converged: trace.stages.iter().all(|s| !s.feasible || s.converged),
        records,
    })
}

fn run_thinness(cfg: &ProblemConfig, flags: &ThinnessFlags) -> Result<Output> {
    let mut tc = match (&cfg.thinness, flags.profile) {
        (Some(tc), _) => tc.clone(),
        (None, Some(profile)) => ThinnessConfig::new(
            RotationalBody::new(profile, flags.s.unwrap_or(1.0), 1.0),
            flags.radii.clone().unwrap_or_else(|| vec![5.0, 10.0, 20.0]),
        ),
        (None, None) => return Err(anyhow!("config has no `thinness` section and no --profile was given")),
    };
    if let Some(profile) = flags.profile {
        tc.body.profile = profile;
    }
    if let Some(s) = flags.s {
        tc.body.s = s;
    }
    if let Some(radii) = &flags.radii {
        tc.radii = radii.clone();
    }
    tc.solver.seed = cfg.solver.seed;
    let rep = thinness_demo(&tc)?;
    let records = rep
        .rows
        .iter()
        .map(|row| {
            record(
                Command::Thinness,
                &[
                    ("profile", serde_json::to_value(tc.body.profile)?),
                    ("s", Value::from(tc.body.s)),
                    ("epsilon", Value::from(rep.epsilon)),
                ],
                row,
            )
            .map(|mut v| {
                v["note"] = Value::from(rep.note);
                v
            })
        })
        .collect::<Result<_>>()?;
    Ok(Output {
        converged: rep.rows.iter().all(|r| r.converged),
        records,
    })
}

fn run_check_pd(cfg: &ProblemConfig) -> Result<Output> {
    let nodes: Vec<Point> = cfg.plate_nodes()?.into_iter().flatten().collect();
    let kernel = cfg.kernel_for(&union_nodes(std::slice::from_ref(&nodes)))?;
    let gram = assemble_gram(&kernel, &nodes)?;
    let diag = diagnose(&gram)?;
    let extra = [
        ("nodes", Value::from(nodes.len())),
        ("epsilon", Value::from(kernel.epsilon)),
    ];
    Ok(Output {
        converged: true,
        records: vec![record(Command::CheckPd, &extra, &diag)?],
    })
}

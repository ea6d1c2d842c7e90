//! PAC against the monolithic baseline, one CSV row per circuit.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use anyhow::{bail, Result};
use pac_core::circuit::Circuit;
use pac_core::compiler::CompileError;
use pac_core::metrics::BenchRecord;
use pac_core::orchestrator::PacError;
use serde::{Deserialize, Serialize};

use crate::seeds::Seeds;
use crate::{compile_with, family_member, BenchArgs, Mode, SolveArgs};

/// One CSV record. Numbers are preformatted so timeouts and omitted timings
/// survive a round trip unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub qubits: usize,
    pub base_time_s: String,
    pub pac_time_s: String,
    pub speedup: String,
    pub base_layers: Option<usize>,
    pub pac_layers: Option<usize>,
    pub delta_cl: Option<i64>,
    pub r_cl_pct: String,
    pub base_to: bool,
    pub pac_to: bool,
}

/// Outcome of one side of a comparison.
pub enum Run {
    Done { layers: usize, time: f64 },
    TimedOut,
    Failed(String),
}

fn run_one(c: &Circuit, mode: Mode, solve: &SolveArgs, seeds: &Seeds) -> Run {
    match compile_with(c, mode, solve, seeds) {
        Ok(out) => Run::Done { layers: out.schedule.depth(), time: out.wall_time },
        Err(e) => {
            let timed_out = matches!(e.downcast_ref::<CompileError>(), Some(CompileError::Timeout(_)))
                || e.downcast_ref::<PacError>().is_some_and(PacError::is_timeout);
            if timed_out {
                Run::TimedOut
            } else {
                Run::Failed(format!("{e:#}"))
            }
        }
    }
}

/// Formats a comparison. A timed-out side counts as taking the full limit,
/// which turns the speedup into a bound.
pub fn make_row(name: &str, qubits: usize, base: &Run, pac: &Run, timeout: f64, wall_time: bool) -> Row {
    let time = |r: &Run| match r {
        Run::Done { time, .. } => Some(*time),
        Run::TimedOut => Some(timeout),
        Run::Failed(_) => None,
    };
    let layers = |r: &Run| match r {
        Run::Done { layers, .. } => Some(*layers),
        _ => None,
    };
    let rec = BenchRecord {
        name: name.to_string(),
        qubits,
        base_time: time(base).unwrap_or(f64::NAN),
        pac_time: time(pac).unwrap_or(f64::NAN),
        base_layers: layers(base),
        pac_layers: layers(pac),
        base_timed_out: matches!(base, Run::TimedOut),
        pac_timed_out: matches!(pac, Run::TimedOut),
    };
    let fmt_time = |r: &Run, t: f64| match r {
        Run::Failed(_) => "ERR".to_string(),
        _ if !wall_time => String::new(),
        _ => format!("{t:.2}"),
    };
    let speedup = if !wall_time || rec.base_time.is_nan() || rec.pac_time.is_nan() {
        String::new()
    } else {
        match (rec.base_timed_out, rec.pac_timed_out) {
            (false, false) => format!("{:.2}", rec.speedup()),
            (true, false) => format!(">{:.2}", rec.speedup()),
            (false, true) => format!("<{:.2}", rec.speedup()),
            (true, true) => String::new(),
        }
    };
    Row {
        name: rec.name.clone(),
        qubits,
        base_time_s: fmt_time(base, rec.base_time),
        pac_time_s: fmt_time(pac, rec.pac_time),
        speedup,
        base_layers: rec.base_layers,
        pac_layers: rec.pac_layers,
        delta_cl: rec.delta_layers(),
        r_cl_pct: rec.reduction_pct().map(|p| format!("{p:.2}")).unwrap_or_default(),
        base_to: rec.base_timed_out,
        pac_to: rec.pac_timed_out,
    }
}

pub fn run(args: &BenchArgs) -> Result<()> {
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let seeds = Seeds::split(args.solve.seed);
    let mut circuits = Vec::new();
    for &n in &args.qubits {
        for i in 0..args.count {
            circuits.push(family_member(n, i, seeds.generator)?);
        }
    }
    let out: Box<dyn Write> = match &args.output {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout()),
    };
    let mut writer = csv::Writer::from_writer(out);

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Row)>();
    std::thread::scope(|s| -> Result<()> {
        for _ in 0..args.jobs.min(circuits.len().max(1)) {
            let tx = tx.clone();
            let (next, circuits) = (&next, &circuits);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(c) = circuits.get(i) else { break };
                let base = run_one(c, Mode::Baseline, &args.solve, &seeds);
                let pac = run_one(c, Mode::Pac, &args.solve, &seeds);
                for (label, r) in [("baseline", &base), ("pac", &pac)] {
                    if let Run::Failed(e) = r {
                        log::error!("{} {label}: {e}", c.name());
                    }
                }
                let row = make_row(c.name(), c.num_qubits(), &base, &pac, args.solve.timeout, !args.no_wall_time);
                if tx.send((i, row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer, rows in instance order.
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&emitted) {
                writer.serialize(row)?;
                writer.flush()?;
                emitted += 1;
            }
        }
        Ok(())
    })?;
    writer.flush()?;
    Ok(())
}

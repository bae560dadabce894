//! CSV schemas for step logs, interval metrics, aggregate tables, and grid
//! search rankings. Floats are written with Rust's shortest round-trip
//! formatting, so parsing a file recovers the original values exactly.

use std::path::Path;

use tanklab_core::nn::GridResult;
use tanklab_core::sim::{SystemState, ValveAction, TANK_COUNT};

use crate::config::Mode;
use crate::experiments::{AggregateResult, AggregateTrial};
use crate::run::{IntervalMetrics, StepRecord, TrialResult};
use crate::HarnessError;

pub const STEP_CSV_HEADER: &str =
    "t,interval,episode,x1,x2,x3,x4,x5,x6,u1,u2,u3,u4,u5,u6,r_cg,r_var,r_u,reward,done";
pub const INTERVAL_CSV_HEADER: &str =
    "interval,mode,mean_reward,mean_r_cg,mean_r_var,mean_r_u,episodes,surrogate_r2";
pub const AGGREGATE_CSV_HEADER: &str = "interval,rl-online-offline,rl-online-only,open,closed";
pub const TRIALS_CSV_HEADER: &str = "trial,seed,valve_tank,valve_factor,pump_tank,pump_factor";
pub const GRID_CSV_HEADER: &str = "rank,architecture,activation,learning_rate,mean_r2";

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Csv { path: path.to_string(), line, message: message.into() }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

pub fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

// ---------------------------------------------------------------------------
// Step logs
// ---------------------------------------------------------------------------

pub fn steps_to_csv(steps: &[StepRecord]) -> String {
    let mut out = String::from(STEP_CSV_HEADER);
    out.push('\n');
    for s in steps {
        out.push_str(&format!("{},{},{}", s.t, s.interval, s.episode));
        for x in &s.state.levels {
            out.push_str(&format!(",{x}"));
        }
        for u in &s.action.valves {
            out.push_str(if *u { ",1" } else { ",0" });
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            s.reward.r_cg,
            s.reward.r_var,
            s.reward.r_u,
            s.reward.total,
            u8::from(s.done)
        ));
    }
    out
}

pub fn parse_steps_csv(text: &str, path: &str) -> Result<Vec<StepRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == STEP_CSV_HEADER => {}
        Some((_, header)) => return Err(parse_error(path, 1, format!("unexpected header {header:?}"))),
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let mut steps = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 20 {
            return Err(parse_error(path, idx + 1, format!("expected 20 fields, got {}", fields.len())));
        }
        let num = |f: &str| -> Result<f64, HarnessError> {
            f.parse::<f64>().map_err(|e| parse_error(path, idx + 1, e.to_string()))
        };
        let mut levels = [0.0; TANK_COUNT];
        for (i, level) in levels.iter_mut().enumerate() {
            *level = num(fields[3 + i])?;
        }
        let mut valves = [false; TANK_COUNT];
        for (i, valve) in valves.iter_mut().enumerate() {
            *valve = match fields[9 + i] {
                "0" => false,
                "1" => true,
                other => return Err(parse_error(path, idx + 1, format!("bad valve flag {other:?}"))),
            };
        }
        steps.push(StepRecord {
            t: fields[0].parse().map_err(|_| parse_error(path, idx + 1, "bad t"))?,
            interval: fields[1].parse().map_err(|_| parse_error(path, idx + 1, "bad interval"))?,
            episode: fields[2].parse().map_err(|_| parse_error(path, idx + 1, "bad episode"))?,
            state: SystemState::new(levels),
            action: ValveAction::new(valves),
            reward: tanklab_core::env::RewardBreakdown {
                r_cg: num(fields[15])?,
                r_var: num(fields[16])?,
                r_u: num(fields[17])?,
                total: num(fields[18])?,
            },
            done: match fields[19] {
                "0" => false,
                "1" => true,
                other => return Err(parse_error(path, idx + 1, format!("bad done flag {other:?}"))),
            },
        });
    }
    Ok(steps)
}

// ---------------------------------------------------------------------------
// Interval metrics
// ---------------------------------------------------------------------------

pub fn intervals_to_csv(intervals: &[IntervalMetrics]) -> String {
    let mut out = String::from(INTERVAL_CSV_HEADER);
    out.push('\n');
    for m in intervals {
        let r2 = m.surrogate_r2.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            m.interval, m.mode, m.mean_reward, m.mean_r_cg, m.mean_r_var, m.mean_r_u, m.episodes, r2
        ));
    }
    out
}

pub fn parse_intervals_csv(text: &str, path: &str) -> Result<Vec<IntervalMetrics>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == INTERVAL_CSV_HEADER => {}
        Some((_, header)) => return Err(parse_error(path, 1, format!("unexpected header {header:?}"))),
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let mut intervals = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(parse_error(path, idx + 1, format!("expected 8 fields, got {}", fields.len())));
        }
        let num = |f: &str| -> Result<f64, HarnessError> {
            f.parse::<f64>().map_err(|e| parse_error(path, idx + 1, e.to_string()))
        };
        intervals.push(IntervalMetrics {
            interval: fields[0].parse().map_err(|_| parse_error(path, idx + 1, "bad interval"))?,
            mode: Mode::parse(fields[1])
                .ok_or_else(|| parse_error(path, idx + 1, format!("unknown mode {:?}", fields[1])))?,
            mean_reward: num(fields[2])?,
            mean_r_cg: num(fields[3])?,
            mean_r_var: num(fields[4])?,
            mean_r_u: num(fields[5])?,
            episodes: fields[6].parse().map_err(|_| parse_error(path, idx + 1, "bad episodes"))?,
            surrogate_r2: if fields[7].is_empty() { None } else { Some(num(fields[7])?) },
        });
    }
    Ok(intervals)
}

// ---------------------------------------------------------------------------
// Aggregate tables and trial draws
// ---------------------------------------------------------------------------

pub fn aggregate_to_csv(result: &AggregateResult) -> String {
    let mut out = String::from(AGGREGATE_CSV_HEADER);
    out.push('\n');
    for row in &result.table {
        out.push_str(&row.interval.to_string());
        for value in &row.mean_reward {
            out.push_str(&format!(",{value}"));
        }
        out.push('\n');
    }
    out
}

pub fn trials_to_csv(trials: &[AggregateTrial]) -> String {
    let mut out = String::from(TRIALS_CSV_HEADER);
    out.push('\n');
    for t in trials {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.trial,
            t.seed,
            t.valve_tank + 1,
            t.valve_factor,
            t.pump_tank + 1,
            t.pump_factor
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Grid search rankings
// ---------------------------------------------------------------------------

pub fn grid_to_csv(results: &[GridResult]) -> String {
    let mut out = String::from(GRID_CSV_HEADER);
    out.push('\n');
    for (rank, result) in results.iter().enumerate() {
        let architecture = result
            .cell
            .hidden_layers
            .iter()
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("x");
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rank + 1,
            architecture,
            result.cell.activation,
            result.cell.learning_rate,
            result.report.mean_r2
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// File layout for `run`, `aggregate`, and `plot`
// ---------------------------------------------------------------------------

pub fn steps_file_name(mode: Mode) -> String {
    format!("{mode}_steps.csv")
}

pub fn intervals_file_name(mode: Mode) -> String {
    format!("{mode}_intervals.csv")
}

/// Writes a trial's step log and interval metrics into `dir`.
pub fn write_trial(result: &TrialResult, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join(steps_file_name(result.config.mode)), &steps_to_csv(&result.steps))?;
    write_file(&dir.join(intervals_file_name(result.config.mode)), &intervals_to_csv(&result.intervals))
}

/// Writes the aggregate table and the per-trial fault draws into `dir`.
pub fn write_aggregate(result: &AggregateResult, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join("aggregate.csv"), &aggregate_to_csv(result))?;
    write_file(&dir.join("trials.csv"), &trials_to_csv(&result.trials))?;
    for trial in &result.trials {
        for (m, intervals) in trial.per_mode.iter().enumerate() {
            let name = format!("trial{}_{}_intervals.csv", trial.trial, Mode::ALL[m]);
            write_file(&dir.join(name), &intervals_to_csv(intervals))?;
        }
    }
    Ok(())
}

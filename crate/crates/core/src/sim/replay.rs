//! Step-by-step reconstruction of an episode from its event log.

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::log::{CycleEvent, EndEvent, Event, IntervalMetrics, LogHeader, LOG_FORMAT, LOG_VERSION};
use crate::error::{Error, Result};
use crate::mldm::{decide, p_hat, Candidate, SwitchDecision};
use crate::planners::utility;
use crate::roadmap::Scope;
use crate::world::{sense, BeliefGrid, WorldModel};

/// Relative tolerance for recomputed scores.
pub const SCORE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ParsedLog {
    pub header: LogHeader,
    pub cycles: Vec<CycleEvent>,
    pub metrics: Vec<IntervalMetrics>,
    pub end: Option<EndEvent>,
    /// Set when the log stopped at an unreadable line.
    pub truncated_at: Option<usize>,
}

/// Parse an NDJSON event log. A bad header or version is an error; an
/// unreadable line later on ends the parse and marks the log truncated.
pub fn parse_log<R: BufRead>(reader: R) -> Result<ParsedLog> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => {
            let line = line?;
            let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                what: "event log header",
                reason: e.to_string(),
            })?;
            let format = value.get("format").and_then(|f| f.as_str()).unwrap_or_default();
            if format != LOG_FORMAT {
                return Err(Error::Malformed {
                    what: "event log header",
                    reason: format!("format {format:?} is not {LOG_FORMAT:?}"),
                });
            }
            let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
            if version != LOG_VERSION {
                return Err(Error::Version {
                    what: "event log",
                    found: version,
                    expected: LOG_VERSION,
                });
            }
            match serde_json::from_value::<Event>(value) {
                Ok(Event::Header(h)) => *h,
                Ok(_) => {
                    return Err(Error::Malformed {
                        what: "event log header",
                        reason: "first event is not a header".into(),
                    })
                }
                Err(e) => {
                    return Err(Error::Malformed {
                        what: "event log header",
                        reason: e.to_string(),
                    })
                }
            }
        }
        None => {
            return Err(Error::Malformed {
                what: "event log",
                reason: "empty log".into(),
            })
        }
    };
    let mut out = ParsedLog {
        header,
        cycles: Vec::new(),
        metrics: Vec::new(),
        end: None,
        truncated_at: None,
    };
    for (i, line) in lines {
        let parsed = line
            .map_err(|e| e.to_string())
            .and_then(|l| serde_json::from_str::<Event>(&l).map_err(|e| e.to_string()));
        match parsed {
            Ok(Event::Cycle(c)) => out.cycles.push(*c),
            Ok(Event::Metrics(m)) => out.metrics.push(m),
            Ok(Event::End(e)) => out.end = Some(e),
            Ok(Event::Header(_)) => {
                return Err(Error::Malformed {
                    what: "event log",
                    reason: format!("second header at line {}", i + 1),
                })
            }
            Err(e) => {
                log::warn!("event log unreadable at line {}: {e}; replaying the prefix", i + 1);
                out.truncated_at = Some(i + 1);
                break;
            }
        }
    }
    Ok(out)
}

pub fn read_log(path: &Path) -> Result<ParsedLog> {
    let f = std::fs::File::open(path)?;
    parse_log(std::io::BufReader::new(f))
}

/// State after one replayed cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayFrame {
    pub cycle: usize,
    pub step: usize,
    pub chosen: Option<Scope>,
    pub covered_cells: usize,
    pub decision: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub frames: Vec<ReplayFrame>,
    /// Log ended with an end event.
    pub complete: bool,
    pub warnings: Vec<String>,
    /// Disagreements between logged and recomputed values.
    pub mismatches: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= SCORE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn check_decision(cycle: usize, d: &SwitchDecision, header: &LogHeader, out: &mut Vec<String>) {
    let cfg = header.config.switch.resolve(header.j_max);
    let mut cands: [Option<Candidate>; 2] = [None, None];
    for (slot, scored) in [(0, &d.local), (1, &d.global)] {
        let Some(s) = scored else { continue };
        let c = s.candidate;
        let p = p_hat(c.h, c.risk, c.discrepancy, &cfg);
        if !close(p, s.p_hat) {
            out.push(format!("cycle {cycle}: {} p_hat {} != recomputed {p}", c.scope, s.p_hat));
        }
        if !close(p * c.utility, s.score) {
            out.push(format!("cycle {cycle}: {} score {} != recomputed {}", c.scope, s.score, p * c.utility));
        }
        cands[slot] = Some(c);
    }
    match decide(cands[0].as_ref(), cands[1].as_ref(), &cfg) {
        Ok(again) if again.chosen == d.chosen && again.overridden == d.overridden && again.reason == d.reason => {}
        Ok(again) => out.push(format!(
            "cycle {cycle}: logged choice {} differs from recomputed {}",
            d.chosen, again.chosen
        )),
        Err(e) => out.push(format!("cycle {cycle}: decision cannot be recomputed: {e}")),
    }
}

/// Rebuild the belief from the logged poses and check every logged
/// decision, policy utility and coverage count against recomputation.
pub fn replay(log: &ParsedLog) -> Result<ReplayReport> {
    let header = &log.header;
    let world = WorldModel::try_from(header.world.clone())?;
    let sensor = header.config.sensor;
    let mut belief = BeliefGrid::for_world(&world);
    let spawn = crate::grid::Pose::at_cell(world.spawn(), world.cell_size());
    sense(&world, &mut belief, &spawn, &sensor)?;
    let mut report = ReplayReport::default();
    if let Some(line) = log.truncated_at {
        report.warnings.push(format!("log truncated at line {line}; replayed {} cycles", log.cycles.len()));
    }
    for c in &log.cycles {
        for cand in [&c.local, &c.global].into_iter().flatten() {
            let p = &cand.policy;
            let u = utility(&p.step_rewards, p.discount);
            if !close(u, p.utility) {
                report
                    .mismatches
                    .push(format!("cycle {}: {} utility {} != recomputed {u}", c.cycle, p.scope, p.utility));
            }
        }
        if let Some(d) = &c.decision {
            check_decision(c.cycle, d, header, &mut report.mismatches);
        }
        for s in &c.steps {
            if !s.collided {
                sense(&world, &mut belief, &s.pose, &sensor)?;
            }
        }
        if belief.covered_count() != c.covered_cells {
            report.mismatches.push(format!(
                "cycle {}: logged {} covered cells, replay has {}",
                c.cycle,
                c.covered_cells,
                belief.covered_count()
            ));
        }
        report.frames.push(ReplayFrame {
            cycle: c.cycle,
            step: c.step,
            chosen: c.chosen,
            covered_cells: belief.covered_count(),
            decision: c.decision.as_ref().map(|d| d.explain()),
        });
    }
    match &log.end {
        Some(e) => {
            report.complete = true;
            if e.covered_cells != belief.covered_count() {
                report.mismatches.push(format!(
                    "end: logged {} covered cells, replay has {}",
                    e.covered_cells,
                    belief.covered_count()
                ));
            }
        }
        None => report.warnings.push("log has no end event".into()),
    }
    Ok(report)
}

//! Multi-layer decision making: pick between the local and the global
//! policy from their recent success rate, risk, motion discrepancy and
//! utility.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roadmap::Scope;

/// Sliding window of success flags for one scope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryWindow {
    capacity: usize,
    outcomes: VecDeque<bool>,
}

impl HistoryWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("history window must hold at least one outcome"));
        }
        Ok(Self {
            capacity,
            outcomes: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn record(&mut self, success: bool) {
        if self.outcomes.len() == self.capacity {
            self.outcomes.pop_front();
        }
        self.outcomes.push_back(success);
    }

    /// Number of policies found in the window.
    pub fn h(&self) -> usize {
        self.outcomes.iter().filter(|&&s| s).count()
    }

    pub fn outcomes(&self) -> impl Iterator<Item = bool> + '_ {
        self.outcomes.iter().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfig {
    pub j_max: f64,
    pub d_max: f64,
    pub eps_j: f64,
    pub eps_d: f64,
    pub window: usize,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            j_max: f64::INFINITY,
            d_max: 2.0,
            eps_j: 1e-3,
            eps_d: 1e-3,
            window: 10,
        }
    }
}

impl SwitchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.j_max > 0.0 && self.d_max > 0.0) {
            return Err(Error::param("j_max and d_max must be positive"));
        }
        if !(self.eps_j > 0.0 && self.eps_d > 0.0 && self.eps_j.is_finite() && self.eps_d.is_finite()) {
            return Err(Error::param("eps_j and eps_d must be positive and finite"));
        }
        if self.window == 0 {
            return Err(Error::param("window must be at least 1"));
        }
        Ok(())
    }
}

/// What the switcher needs to know about one candidate policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub scope: Scope,
    pub utility: f64,
    pub risk: f64,
    pub discrepancy: f64,
    pub h: f64,
}

/// Success probability estimate `h / (max(J, eps_j) * max(D, eps_d))`,
/// with `h` the count of policies found in the window.
pub fn p_hat(h: f64, risk: f64, discrepancy: f64, config: &SwitchConfig) -> f64 {
    h / (risk.max(config.eps_j) * discrepancy.max(config.eps_d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverrideReason {
    JExceeded,
    DExceeded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub p_hat: f64,
    pub score: f64,
}

/// Outcome of one switching decision, with everything needed to audit it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchDecision {
    pub chosen: Scope,
    /// Scope that won on score before the threshold check.
    pub argmax: Scope,
    pub overridden: bool,
    /// Set when a threshold was exceeded, whether or not the override could
    /// be applied.
    pub reason: Option<OverrideReason>,
    pub local: Option<ScoredCandidate>,
    pub global: Option<ScoredCandidate>,
}

impl SwitchDecision {
    pub fn scored(&self, scope: Scope) -> Option<&ScoredCandidate> {
        match scope {
            Scope::Local => self.local.as_ref(),
            Scope::Global => self.global.as_ref(),
        }
    }

    /// One-line human explanation.
    pub fn explain(&self) -> String {
        let part = |s: &Option<ScoredCandidate>| match s {
            Some(s) => format!(
                "U={:.3} J={:.3} D={:.3} h={:.2} P={:.3} score={:.3}",
                s.candidate.utility,
                s.candidate.risk,
                s.candidate.discrepancy,
                s.candidate.h,
                s.p_hat,
                s.score
            ),
            None => "absent".to_string(),
        };
        let mut out = format!(
            "chose {} (argmax {}); local: {}; global: {}",
            self.chosen,
            self.argmax,
            part(&self.local),
            part(&self.global)
        );
        match (self.reason, self.overridden) {
            (Some(r), true) => out.push_str(&format!("; overridden: {r:?}")),
            (Some(r), false) => out.push_str(&format!("; {r:?} but no alternative")),
            _ => {}
        }
        out
    }
}

fn score(c: &Candidate, config: &SwitchConfig) -> ScoredCandidate {
    let p = p_hat(c.h, c.risk, c.discrepancy, config);
    ScoredCandidate {
        candidate: *c,
        p_hat: p,
        score: p * c.utility,
    }
}

/// Choose between the local and global candidates. Highest `P_hat * U` wins,
/// local on ties. If the winner's risk exceeds `j_max` or its discrepancy
/// exceeds `d_max`, the other scope is taken when available; otherwise the
/// winner stands and the reason is flagged.
pub fn decide(
    local: Option<&Candidate>,
    global: Option<&Candidate>,
    config: &SwitchConfig,
) -> Result<SwitchDecision> {
    let local = local.map(|c| score(c, config));
    let global = global.map(|c| score(c, config));
    let argmax = match (&local, &global) {
        (None, None) => return Err(Error::NoPolicy),
        (Some(_), None) => Scope::Local,
        (None, Some(_)) => Scope::Global,
        (Some(l), Some(g)) => {
            if g.score > l.score {
                Scope::Global
            } else {
                Scope::Local
            }
        }
    };
    let winner = match argmax {
        Scope::Local => local.as_ref(),
        Scope::Global => global.as_ref(),
    }
    .expect("argmax candidate is present");
    let reason = if winner.candidate.risk > config.j_max {
        Some(OverrideReason::JExceeded)
    } else if winner.candidate.discrepancy > config.d_max {
        Some(OverrideReason::DExceeded)
    } else {
        None
    };
    let other_present = match argmax {
        Scope::Local => global.is_some(),
        Scope::Global => local.is_some(),
    };
    let overridden = reason.is_some() && other_present;
    Ok(SwitchDecision {
        chosen: if overridden { argmax.opposite() } else { argmax },
        argmax,
        overridden,
        reason,
        local,
        global,
    })
}

/// Per-scope success histories plus the switching thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Switcher {
    pub config: SwitchConfig,
    pub local: HistoryWindow,
    pub global: HistoryWindow,
}

impl Switcher {
    pub fn new(config: SwitchConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            local: HistoryWindow::new(config.window)?,
            global: HistoryWindow::new(config.window)?,
            config,
        })
    }

    pub fn history(&self, scope: Scope) -> &HistoryWindow {
        match scope {
            Scope::Local => &self.local,
            Scope::Global => &self.global,
        }
    }

    pub fn record(&mut self, scope: Scope, success: bool) {
        match scope {
            Scope::Local => self.local.record(success),
            Scope::Global => self.global.record(success),
        }
    }

    /// Build candidates from (utility, risk, discrepancy) using the current
    /// histories, then decide.
    pub fn decide(
        &self,
        local: Option<(f64, f64, f64)>,
        global: Option<(f64, f64, f64)>,
    ) -> Result<SwitchDecision> {
        let mk = |scope: Scope, (utility, risk, discrepancy): (f64, f64, f64)| Candidate {
            scope,
            utility,
            risk,
            discrepancy,
            h: self.history(scope).h() as f64,
        };
        let l = local.map(|t| mk(Scope::Local, t));
        let g = global.map(|t| mk(Scope::Global, t));
        decide(l.as_ref(), g.as_ref(), &self.config)
    }
}

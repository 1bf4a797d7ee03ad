use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MoveKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    BurnIn,
    PostBurnIn,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::BurnIn => "burn-in",
            Phase::PostBurnIn => "post-burn-in",
        }
    }
}

/// One row of the chain trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub phase: Phase,
    pub iteration: u64,
    pub log_lik: f64,
    pub leaves: u32,
    pub kind: MoveKind,
    pub accepted: bool,
}

/// Proposed/accepted tallies per move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounters {
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
}

impl MoveCounters {
    pub fn rate(&self) -> f64 {
        let p: u64 = self.proposed.iter().sum();
        let a: u64 = self.accepted.iter().sum();
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    pub fn rate_for(&self, kind: MoveKind) -> f64 {
        let i = kind.index();
        if self.proposed[i] == 0 {
            0.0
        } else {
            self.accepted[i] as f64 / self.proposed[i] as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ChainDiagnostics {
    pub records: Vec<StepRecord>,
    pub burn_in: MoveCounters,
    pub post_burn_in: MoveCounters,
    /// Candidates that had exactly one undersized terminal collapsed.
    pub sweep_count: u64,
    /// Candidates rejected for having two or more undersized terminals.
    pub resample_count: u64,
}

impl ChainDiagnostics {
    pub(crate) fn record(&mut self, rec: StepRecord) {
        let counters = match rec.phase {
            Phase::BurnIn => &mut self.burn_in,
            Phase::PostBurnIn => &mut self.post_burn_in,
        };
        counters.proposed[rec.kind.index()] += 1;
        if rec.accepted {
            counters.accepted[rec.kind.index()] += 1;
        }
        self.records.push(rec);
    }

    pub fn counters(&self, phase: Phase) -> &MoveCounters {
        match phase {
            Phase::BurnIn => &self.burn_in,
            Phase::PostBurnIn => &self.post_burn_in,
        }
    }

    pub fn acceptance_rate(&self, phase: Phase) -> f64 {
        self.counters(phase).rate()
    }

    pub fn log_lik_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.log_lik).collect()
    }

    pub fn leaf_trace(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.leaves).collect()
    }

    fn phase_log_liks(&self, phase: Phase) -> Vec<f64> {
        self.records.iter().filter(|r| r.phase == phase).map(|r| r.log_lik).collect()
    }

    /// Whether the mean log-likelihood over the last 10% of burn-in exceeds
    /// the mean over the first 10%. `None` with fewer than 10 burn-in steps.
    pub fn converged(&self) -> Option<bool> {
        let trace = self.phase_log_liks(Phase::BurnIn);
        if trace.len() < 10 {
            return None;
        }
        let w = trace.len() / 10;
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        Some(mean(&trace[trace.len() - w..]) > mean(&trace[..w]))
    }

    pub fn final_log_lik(&self) -> Option<f64> {
        self.records.last().map(|r| r.log_lik)
    }

    /// Writes the trace as CSV: `phase,iteration,loglik,leaves,move,accepted`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phase", "iteration", "loglik", "leaves", "move", "accepted"])?;
        for r in &self.records {
            w.write_record([
                r.phase.name(),
                &r.iteration.to_string(),
                &r.log_lik.to_string(),
                &r.leaves.to_string(),
                r.kind.name(),
                if r.accepted { "1" } else { "0" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(phase: Phase, iteration: u64, log_lik: f64, accepted: bool) -> StepRecord {
        StepRecord { phase, iteration, log_lik, leaves: 1, kind: MoveKind::Birth, accepted }
    }

    #[test]
    fn rates_and_convergence() {
        let mut d = ChainDiagnostics::default();
        for i in 0..20 {
            d.record(rec(Phase::BurnIn, i, i as f64, i % 4 == 0));
        }
        d.record(rec(Phase::PostBurnIn, 20, 20.0, true));
        assert_eq!(d.acceptance_rate(Phase::BurnIn), 0.25);
        assert_eq!(d.acceptance_rate(Phase::PostBurnIn), 1.0);
        assert_eq!(d.converged(), Some(true));
        assert_eq!(d.log_lik_trace().len(), 21);

        let mut out = Vec::new();
        d.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("phase,iteration,loglik,leaves,move,accepted\nburn-in,0,0,1,birth,1\n"));
        assert_eq!(text.lines().count(), 22);
    }
}

//! Achievability protocols as encoder/decoder pairs over a slot loop.
//!
//! Every `run_*` function takes the configuration, the cache knowledge the
//! transmitter is allowed to have, the messages, a [`StateSource`] and a
//! coding seed. Decoders receive the full cache assignment of their own side
//! and the channel outputs; transmitters see only [`crate::channel::FeedbackView`]
//! through the [`Link`].

pub mod coding;
pub mod rx;

pub mod dd_blind_symmetric;
pub mod dn_nonblind_case_c;
pub mod dn_semiblind_case_b;
pub mod nn_blind_inner;
pub mod nn_blind_symmetric;
pub mod nn_semiblind;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, CsitScenario, Link, PhaseSpan, StateSource, Transcript};
use crate::error::ProtocolError;
use crate::gf2::BitVector;

pub use dd_blind_symmetric::run_dd_blind_symmetric;
pub use dn_nonblind_case_c::run_dn_nonblind_case_c;
pub use dn_semiblind_case_b::run_dn_semiblind_case_b;
pub use nn_blind_inner::run_nn_blind_inner;
pub use nn_blind_symmetric::run_nn_blind_symmetric;
pub use nn_semiblind::run_nn_semiblind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub params: ChannelParams,
    pub m1: usize,
    pub m2: usize,
    /// Slack coefficient `c` of [`coding::Slack`].
    pub slack_coeff: f64,
    /// Keep a per-slot transcript in the result.
    pub record_transcript: bool,
}

impl ProtocolConfig {
    pub fn new(params: ChannelParams, m1: usize, m2: usize, slack_coeff: f64) -> Self {
        Self { params, m1, m2, slack_coeff, record_transcript: false }
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        self.params.validate().map_err(|e| ProtocolError::Config(e.to_string()))?;
        if !(self.slack_coeff >= 0.0) {
            return Err(ProtocolError::Config(format!(
                "slack coefficient must be nonnegative, got {}",
                self.slack_coeff
            )));
        }
        Ok(())
    }

    fn slack(&self) -> coding::Slack {
        coding::Slack::new(self.slack_coeff)
    }
}

/// Message 1 (`a`, for Rx1) and message 2 (`b`, for Rx2).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Messages {
    pub a: BitVector,
    pub b: BitVector,
}

impl Messages {
    pub fn random<R: rand::Rng + ?Sized>(m1: usize, m2: usize, rng: &mut R) -> Self {
        Self { a: crate::gf2::random_vector(m1, rng), b: crate::gf2::random_vector(m2, rng) }
    }

    fn check(&self, cfg: &ProtocolConfig) -> Result<(), ProtocolError> {
        if self.a.len() != cfg.m1 || self.b.len() != cfg.m2 {
            return Err(ProtocolError::Config(format!(
                "message lengths ({}, {}) differ from configuration ({}, {})",
                self.a.len(),
                self.b.len(),
                cfg.m1,
                cfg.m2
            )));
        }
        Ok(())
    }

    /// All message bits as one vector: `a` first, then `b`.
    fn concat(&self) -> BitVector {
        let mut v = BitVector::zeros(self.a.len() + self.b.len());
        for i in self.a.ones() {
            v.set(i, true);
        }
        for i in self.b.ones() {
            v.set(self.a.len() + i, true);
        }
        v
    }
}

/// How a phase ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhaseLength {
    /// Fixed number of slots, decided before the phase starts.
    Fixed(usize),
    /// Ends on a feedback event; the value is the expected length.
    FeedbackTerminated { expected: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedPhase {
    pub id: String,
    pub length: PhaseLength,
    pub rule: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<PlannedPhase>,
}

impl PhasePlan {
    fn push(&mut self, id: &str, length: PhaseLength, rule: &str) {
        self.phases.push(PlannedPhase { id: id.to_string(), length, rule: rule.to_string() });
    }

    /// Phases that can carry at least one slot.
    pub fn active(&self) -> impl Iterator<Item = &PlannedPhase> {
        self.phases.iter().filter(|p| match p.length {
            PhaseLength::Fixed(n) => n > 0,
            PhaseLength::FeedbackTerminated { expected } => expected > 0.0,
        })
    }
}

/// ARQ statistics: `repeats[j]` slots were spent on bit `j`, of which Rx2
/// received `rx2_receptions[j]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArqRepeatStats {
    pub repeats: Vec<u32>,
    pub rx2_receptions: Vec<u32>,
}

impl ArqRepeatStats {
    pub fn push(&mut self, repeats: u32, rx2: u32) {
        debug_assert!(repeats >= 1 && rx2 <= repeats);
        self.repeats.push(repeats);
        self.rx2_receptions.push(rx2);
    }

    pub fn mean_k(&self) -> Option<f64> {
        mean(self.rx2_receptions.iter().map(|&k| k as f64))
    }

    pub fn mean_k_minus_one(&self) -> Option<f64> {
        mean(self.rx2_receptions.iter().map(|&k| k.saturating_sub(1) as f64))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Equations offered to, and rank reached by, one decoding stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationCount {
    pub receiver: u8,
    pub stage: String,
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub decoded1: Option<BitVector>,
    pub decoded2: Option<BitVector>,
    pub slots_used: usize,
    pub phase_lengths: Vec<PhaseSpan>,
    pub equations: Vec<EquationCount>,
    /// ARQ statistics of bits whose Rx2 receptions feed the alignment step.
    pub arq: Option<ArqRepeatStats>,
    /// Per-bit statistics split by Rx2 cache status: (cached, uncached).
    pub arq_split: Option<(ArqRepeatStats, ArqRepeatStats)>,
    pub transcript: Option<Transcript>,
}

impl ProtocolResult {
    pub fn success(&self, msgs: &Messages) -> bool {
        self.decoded1.as_ref() == Some(&msgs.a) && self.decoded2.as_ref() == Some(&msgs.b)
    }
}

/// Shared result assembly.
struct Outcome {
    decoded1: Option<BitVector>,
    decoded2: Option<BitVector>,
    equations: Vec<EquationCount>,
    arq: Option<ArqRepeatStats>,
    arq_split: Option<(ArqRepeatStats, ArqRepeatStats)>,
}

fn finish(link: Link, out: Outcome) -> ProtocolResult {
    let (phases, trace, transcript) = link.finish();
    ProtocolResult {
        decoded1: out.decoded1,
        decoded2: out.decoded2,
        slots_used: trace.len(),
        phase_lengths: phases,
        equations: out.equations,
        arq: out.arq,
        arq_split: out.arq_split,
        transcript,
    }
}

fn new_link(cfg: &ProtocolConfig, scenario: CsitScenario, states: StateSource) -> Link {
    Link::new(scenario, states, cfg.record_transcript)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), ProtocolError> {
    if cond {
        Ok(())
    } else {
        Err(ProtocolError::Config(msg()))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn count(receiver: u8, stage: &str, s: &rx::Stage) -> EquationCount {
    EquationCount {
        receiver,
        stage: stage.to_string(),
        unknowns: s.unknowns(),
        equations: s.offered(),
        rank: s.rank(),
    }
}

/// Variables `a_j` are `0..m1`, `b_j` are `m1..m1+m2`.
fn a_var(j: usize) -> u32 {
    j as u32
}

fn b_var(m1: usize, j: usize) -> u32 {
    (m1 + j) as u32
}

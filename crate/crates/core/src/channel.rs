//! Channel law, state and cache sampling, and transmitter knowledge views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ChannelError;
use crate::gf2::{bernoulli_vector, BitVector};

/// Erasure probabilities `delta1`, `delta2` and cache-miss probabilities
/// `eps1` (Rx1 missing a bit of message 2) and `eps2` (Rx2 missing a bit of
/// message 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub delta1: f64,
    pub delta2: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl ChannelParams {
    pub fn new(delta1: f64, delta2: f64, eps1: f64, eps2: f64) -> Result<Self, ChannelError> {
        let p = Self { delta1, delta2, eps1, eps2 };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(delta: f64, eps: f64) -> Result<Self, ChannelError> {
        Self::new(delta, delta, eps, eps)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, v) in
            [("delta1", self.delta1), ("delta2", self.delta2), ("eps1", self.eps1), ("eps2", self.eps2)]
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(ChannelError::InvalidProbability { name, value: v });
            }
        }
        Ok(())
    }

    /// Exchanges the roles of the two receivers.
    pub fn swapped(&self) -> Self {
        Self { delta1: self.delta2, delta2: self.delta1, eps1: self.eps2, eps2: self.eps1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReceiverId {
    One,
    Two,
}

/// Which delayed channel states reach the transmitter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsitScenario {
    /// No state feedback.
    NN,
    /// Delayed states of one receiver only.
    DN(ReceiverId),
    /// Delayed states of both receivers.
    DD,
}

impl CsitScenario {
    pub fn sees(&self, rx: ReceiverId) -> bool {
        match self {
            CsitScenario::NN => false,
            CsitScenario::DN(r) => *r == rx,
            CsitScenario::DD => true,
        }
    }
}

/// Per-slot reception states; `true` means the slot was received.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTrace {
    #[serde(with = "bits01")]
    pub s1: Vec<bool>,
    #[serde(with = "bits01")]
    pub s2: Vec<bool>,
}

impl StateTrace {
    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }

    pub fn push(&mut self, s1: bool, s2: bool) {
        self.s1.push(s1);
        self.s2.push(s2);
    }
}

/// Cache masks. `e1[l]` set means Rx1 holds bit `l` of message 2; `e2[l]` set
/// means Rx2 holds bit `l` of message 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheAssignment {
    pub e1: BitVector,
    pub e2: BitVector,
}

/// Output of the channel at one receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reception {
    Bit(bool),
    Erased,
}

impl Reception {
    pub fn bit(self) -> Option<bool> {
        match self {
            Reception::Bit(b) => Some(b),
            Reception::Erased => None,
        }
    }
}

pub fn transmit(x: bool, s1: bool, s2: bool) -> (Reception, Reception) {
    let rx = |s: bool| if s { Reception::Bit(x) } else { Reception::Erased };
    (rx(s1), rx(s2))
}

pub fn sample_states<R: Rng + ?Sized>(params: &ChannelParams, n: usize, rng: &mut R) -> StateTrace {
    let mut t = StateTrace { s1: Vec::with_capacity(n), s2: Vec::with_capacity(n) };
    for _ in 0..n {
        let (s1, s2) = draw_state(params, rng);
        t.push(s1, s2);
    }
    t
}

fn draw_state<R: Rng + ?Sized>(params: &ChannelParams, rng: &mut R) -> (bool, bool) {
    let s1 = rng.gen::<f64>() >= params.delta1;
    let s2 = rng.gen::<f64>() >= params.delta2;
    (s1, s2)
}

pub fn sample_cache<R: Rng + ?Sized>(
    params: &ChannelParams,
    m1: usize,
    m2: usize,
    rng: &mut R,
) -> CacheAssignment {
    let e1 = bernoulli_vector(m2, 1.0 - params.eps1, rng);
    let e2 = bernoulli_vector(m1, 1.0 - params.eps2, rng);
    CacheAssignment { e1, e2 }
}

/// Delayed state prefixes available to the transmitter when choosing slot
/// `time` (slots are numbered from 1, so the prefixes have length `time - 1`).
#[derive(Clone, Copy, Debug)]
pub struct FeedbackView<'a> {
    pub time: usize,
    pub visible_s1: Option<&'a [bool]>,
    pub visible_s2: Option<&'a [bool]>,
}

impl FeedbackView<'_> {
    /// State of `rx` in the previous slot, if visible and `time > 0`.
    pub fn last(&self, rx: ReceiverId) -> Option<bool> {
        let v = match rx {
            ReceiverId::One => self.visible_s1,
            ReceiverId::Two => self.visible_s2,
        }?;
        v.last().copied()
    }
}

pub fn feedback_view(
    scenario: CsitScenario,
    trace: &StateTrace,
    t: usize,
) -> Result<FeedbackView<'_>, ChannelError> {
    if t == 0 || t > trace.len() {
        return Err(ChannelError::SlotOutOfRange { slot: t, len: trace.len() });
    }
    Ok(FeedbackView {
        time: t,
        visible_s1: scenario.sees(ReceiverId::One).then(|| &trace.s1[..t - 1]),
        visible_s2: scenario.sees(ReceiverId::Two).then(|| &trace.s2[..t - 1]),
    })
}

// ============================================================================
// Seeds
// ============================================================================

/// Independent per-trial random streams derived from a master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub states: u64,
    pub cache: u64,
    pub coding: u64,
    pub messages: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl TrialSeeds {
    /// Seeds for trial `index` under `master`. Each stream is a SplitMix64 hash
    /// of (master, index, stream tag), so streams never share state.
    pub fn derive(master: u64, index: u64) -> Self {
        let base = splitmix64(master ^ splitmix64(index.wrapping_add(1)));
        let sub = |tag: u64| splitmix64(base ^ splitmix64(tag.wrapping_mul(0xA24B_AED4_963E_E407)));
        Self { states: sub(1), cache: sub(2), coding: sub(3), messages: sub(4) }
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}

// ============================================================================
// Slot loop
// ============================================================================

/// Where channel states come from during a protocol run.
#[derive(Clone, Debug)]
pub enum StateSource {
    /// Draw states on demand.
    Sampled { params: ChannelParams, rng: ChaCha8Rng },
    /// Replay a recorded trace; running past its end is an error.
    Replay(StateTrace),
}

impl StateSource {
    pub fn sampled(params: ChannelParams, seed: u64) -> Self {
        StateSource::Sampled { params, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub x: bool,
    pub s1: bool,
    pub s2: bool,
}

/// Per-slot record of a run, with phase boundaries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub slots: Vec<SlotRecord>,
    pub phases: Vec<PhaseSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Transcript {
    pub fn total_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn receptions(&self, rx: ReceiverId) -> impl Iterator<Item = Reception> + '_ {
        self.slots.iter().map(move |r| {
            let (a, b) = transmit(r.x, r.s1, r.s2);
            match rx {
                ReceiverId::One => a,
                ReceiverId::Two => b,
            }
        })
    }

    pub fn state_trace(&self) -> StateTrace {
        StateTrace {
            s1: self.slots.iter().map(|r| r.s1).collect(),
            s2: self.slots.iter().map(|r| r.s2).collect(),
        }
    }
}

/// One use of the channel as seen by the two receivers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotOutput {
    pub rx1: Reception,
    pub rx2: Reception,
}

/// Drives the slot loop: draws states, applies the channel law, keeps the
/// state history for feedback and optionally records a transcript.
#[derive(Clone, Debug)]
pub struct Link {
    scenario: CsitScenario,
    source: StateSource,
    trace: StateTrace,
    xs: Option<Vec<bool>>,
    phases: Vec<PhaseSpan>,
}

impl Link {
    pub fn new(scenario: CsitScenario, source: StateSource, record: bool) -> Self {
        Self {
            scenario,
            source,
            trace: StateTrace::default(),
            xs: record.then(Vec::new),
            phases: Vec::new(),
        }
    }

    pub fn scenario(&self) -> CsitScenario {
        self.scenario
    }

    /// Number of slots used so far.
    pub fn time(&self) -> usize {
        self.trace.len()
    }

    /// What the transmitter may know before choosing the next symbol.
    pub fn feedback(&self) -> FeedbackView<'_> {
        FeedbackView {
            time: self.trace.len() + 1,
            visible_s1: self.scenario.sees(ReceiverId::One).then_some(&self.trace.s1[..]),
            visible_s2: self.scenario.sees(ReceiverId::Two).then_some(&self.trace.s2[..]),
        }
    }

    /// Global state history, known to receivers after the fact.
    pub fn states(&self) -> &StateTrace {
        &self.trace
    }

    pub fn begin_phase(&mut self, name: &str) {
        self.close_phase();
        self.phases.push(PhaseSpan { name: name.to_string(), start: self.time(), len: 0 });
    }

    fn close_phase(&mut self) {
        let t = self.time();
        if let Some(p) = self.phases.last_mut() {
            p.len = t - p.start;
        }
    }

    pub fn send(&mut self, x: bool) -> Result<SlotOutput, ChannelError> {
        let t = self.trace.len();
        let (s1, s2) = match &mut self.source {
            StateSource::Sampled { params, rng } => draw_state(params, rng),
            StateSource::Replay(tr) => {
                if t >= tr.len() {
                    return Err(ChannelError::TraceExhausted { len: tr.len() });
                }
                (tr.s1[t], tr.s2[t])
            }
        };
        self.trace.push(s1, s2);
        if let Some(xs) = &mut self.xs {
            xs.push(x);
        }
        let (rx1, rx2) = transmit(x, s1, s2);
        Ok(SlotOutput { rx1, rx2 })
    }

    /// Closes the current phase and returns the phase spans and, if recording,
    /// the transcript.
    pub fn finish(mut self) -> (Vec<PhaseSpan>, StateTrace, Option<Transcript>) {
        self.close_phase();
        let transcript = self.xs.map(|xs| Transcript {
            slots: xs
                .iter()
                .zip(self.trace.s1.iter().zip(&self.trace.s2))
                .map(|(&x, (&s1, &s2))| SlotRecord { x, s1, s2 })
                .collect(),
            phases: self.phases.clone(),
        });
        (self.phases, self.trace, transcript)
    }
}

mod bits01 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&b| b as u8))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(serde::de::Error::custom("state entries must be 0 or 1")),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_law() {
        assert_eq!(transmit(true, true, false), (Reception::Bit(true), Reception::Erased));
        assert_eq!(transmit(false, true, true), (Reception::Bit(false), Reception::Bit(false)));
        assert_eq!(transmit(true, false, false), (Reception::Erased, Reception::Erased));
    }

    #[test]
    fn feedback_prefixes() {
        let p = ChannelParams::symmetric(0.5, 0.5).unwrap();
        let tr = sample_states(&p, 10, &mut TrialSeeds::rng(1));
        let v = feedback_view(CsitScenario::DD, &tr, 5).unwrap();
        assert_eq!(v.visible_s1.unwrap().len(), 4);
        assert_eq!(v.visible_s2.unwrap().len(), 4);
        let v = feedback_view(CsitScenario::DN(ReceiverId::One), &tr, 5).unwrap();
        assert!(v.visible_s1.is_some() && v.visible_s2.is_none());
        let v = feedback_view(CsitScenario::NN, &tr, 5).unwrap();
        assert!(v.visible_s1.is_none() && v.visible_s2.is_none());
        assert!(feedback_view(CsitScenario::NN, &tr, 11).is_err());
        assert!(feedback_view(CsitScenario::NN, &tr, 0).is_err());
    }
}

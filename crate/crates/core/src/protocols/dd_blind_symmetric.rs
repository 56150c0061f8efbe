//! Four-phase scheme for the symmetric channel with delayed CSIT from both
//! receivers and a blind transmitter.
//!
//! Phase I sends `c_j = a_j ⊕ b_j`, repeating each bit until at least one
//! receiver hears it. Feedback splits the delivered bits into `b̃` (b-bits
//! whose XOR reached Rx1) and `ã` (a-bits whose XOR reached Rx2). Phase II
//! sends combinations of `b̃`, Phase III combinations of `ã`. Phase IV sends
//! `ã`-combinations XOR `b̃`-combinations when `ε ≤ δ`, and `ã`-combinations
//! alone otherwise. Every phase after the first stops on feedback.
//!
//! Each receiver decodes jointly over its own message and the uncached
//! interfering bits that reached it in Phase I.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{CacheAssignment, CsitScenario, Link, ReceiverId, StateSource};
use crate::error::ProtocolError;

use super::coding::{Slack, Source, Sweep, WindowCode};
use super::rx::{insert_received, Knowledge, Stage};
use super::{
    a_var, b_var, close, count, finish, new_link, require, Messages, Outcome, PhaseLength,
    PhasePlan, ProtocolConfig, ProtocolResult,
};

/// `ε ≤ δ`: Phase IV multicasts XORs. Otherwise Phase IV sends `ã` only.
fn xor_phase(eps: f64, delta: f64) -> bool {
    eps <= delta
}

fn check(cfg: &ProtocolConfig) -> Result<(f64, f64), ProtocolError> {
    cfg.validate()?;
    let p = &cfg.params;
    require(close(p.delta1, p.delta2) && close(p.eps1, p.eps2), || {
        format!(
            "requires a symmetric channel, got delta = ({}, {}), eps = ({}, {})",
            p.delta1, p.delta2, p.eps1, p.eps2
        )
    })?;
    require(cfg.m1 == cfg.m2, || format!("requires m1 = m2, got {} and {}", cfg.m1, cfg.m2))?;
    require(cfg.m1 == 0 || p.delta1 < 1.0, || "delta = 1 leaves both messages undeliverable".into())?;
    Ok((p.delta1, p.eps1))
}

pub fn phase_plan(cfg: &ProtocolConfig) -> Result<PhasePlan, ProtocolError> {
    let (delta, eps) = check(cfg)?;
    let m = cfg.m1 as f64;
    let t1 = m / (1.0 - delta * delta);
    let q = eps.min(delta);
    let mut out = PhasePlan::default();
    out.push(
        "I",
        PhaseLength::FeedbackTerminated { expected: t1 },
        "a_j XOR b_j, repeated until either receiver hears it",
    );
    out.push(
        "II",
        PhaseLength::FeedbackTerminated { expected: q * t1 },
        "combinations of b-bits heard at Rx1, until Rx1 has its quota",
    );
    out.push(
        "III",
        PhaseLength::FeedbackTerminated { expected: q * t1 },
        "combinations of a-bits heard at Rx2, until Rx2 has its quota",
    );
    let rule = if xor_phase(eps, delta) {
        "XOR of combinations of both overheard sets, until both receivers can decode"
    } else {
        "combinations of a-bits heard at Rx2, until both receivers can decode"
    };
    out.push("IV", PhaseLength::FeedbackTerminated { expected: (delta - eps).abs() * t1 }, rule);
    Ok(out)
}

/// Transmitter-side bookkeeping of what one receiver has heard.
#[derive(Default)]
struct Tally {
    /// Phase I bits heard.
    first: usize,
    /// Receptions of Phases II, III and IV.
    n2: usize,
    n3: usize,
    n4: usize,
}

impl Tally {
    fn later(&self) -> usize {
        self.n2 + self.n3 + self.n4
    }
}

/// Rows needed to pin `own_only` bits reachable through `code` alone.
fn own_target(own_only: usize, slack: &Slack, code: &WindowCode) -> usize {
    own_only + slack.margin(own_only as f64, 0.0, Some(code)).ceil() as usize
}

/// Targets derived from Phase I, seen from receiver `i`: `own_only` is the
/// number of its own bits that only the other receiver heard, `heard` the
/// number of interfering bits it heard.
struct Goal {
    own_only: usize,
    heard: usize,
}

impl Goal {
    /// Rx `i` needs all its own bits plus the uncached heard interference.
    fn done(&self, t: &Tally, m: usize, eps: f64, slack: &Slack, code: &WindowCode, own_rows: usize) -> bool {
        let h = self.heard as f64;
        let need = eps * h;
        let margin = slack.margin(need, h * eps * (1.0 - eps), Some(code));
        let total_ok = (t.first + t.later()) as f64 >= m as f64 + need + margin;
        // Own bits that only the other receiver heard appear only in the
        // phases that carry combinations of them.
        total_ok && own_rows >= own_target(self.own_only, slack, code)
    }
}

pub fn run_dd_blind_symmetric(
    cfg: &ProtocolConfig,
    cache: &CacheAssignment,
    msgs: &Messages,
    states: StateSource,
    coding_seed: u64,
) -> Result<ProtocolResult, ProtocolError> {
    let (delta, eps) = check(cfg)?;
    msgs.check(cfg)?;
    let m = cfg.m1;
    let nvars = 2 * m;
    let slack = cfg.slack();
    let xor = xor_phase(eps, delta);
    let q = eps.min(delta);
    let mut rng = ChaCha8Rng::seed_from_u64(coding_seed);
    let mut link = new_link(cfg, CsitScenario::DD, states);

    // Phase I.
    link.begin_phase("I");
    let mut y1: Vec<Option<bool>> = vec![None; m];
    let mut y2: Vec<Option<bool>> = vec![None; m];
    for j in 0..m {
        let c = msgs.a.get(j) ^ msgs.b.get(j);
        loop {
            let out = link.send(c)?;
            y1[j] = out.rx1.bit();
            y2[j] = out.rx2.bit();
            let fb = link.feedback();
            if fb.last(ReceiverId::One) == Some(true) || fb.last(ReceiverId::Two) == Some(true) {
                break;
            }
        }
    }
    let r1: Vec<usize> = (0..m).filter(|&j| y1[j].is_some()).collect();
    let r2: Vec<usize> = (0..m).filter(|&j| y2[j].is_some()).collect();
    let only2 = r2.iter().filter(|&&j| y1[j].is_none()).count();
    let only1 = r1.iter().filter(|&&j| y2[j].is_none()).count();

    let all = msgs.concat();
    let src_bt = Source::gather(&all, r1.iter().map(|&j| b_var(m, j)).collect());
    let src_at = Source::gather(&all, r2.iter().map(|&j| a_var(j)).collect());
    let code_bt = WindowCode::new(src_bt.len(), eps);
    let code_at = WindowCode::new(src_at.len(), eps);

    // Receivers: own cache, then one joint stage each with unknowns ordered by j.
    let mut k1 = Knowledge::new(nvars);
    for j in cache.e1.ones() {
        k1.learn(b_var(m, j), msgs.b.get(j));
    }
    let mut k2 = Knowledge::new(nvars);
    for j in cache.e2.ones() {
        k2.learn(a_var(j), msgs.a.get(j));
    }
    let order1 = (0..m).flat_map(|j| {
        let b = (y1[j].is_some()).then_some(b_var(m, j));
        std::iter::once(a_var(j)).chain(b)
    });
    let mut st1 = Stage::over_unknown(nvars, order1, &k1);
    let order2 = (0..m).flat_map(|j| {
        let a = (y2[j].is_some()).then_some(a_var(j));
        a.into_iter().chain(std::iter::once(b_var(m, j)))
    });
    let mut st2 = Stage::over_unknown(nvars, order2, &k2);
    for &j in &r1 {
        let mut e = st1.equation(y1[j].unwrap_or(false));
        e.term(a_var(j), &k1).term(b_var(m, j), &k1);
        let built = e.build();
        st1.insert(built);
    }
    for &j in &r2 {
        let mut e = st2.equation(y2[j].unwrap_or(false));
        e.term(a_var(j), &k2).term(b_var(m, j), &k2);
        let built = e.build();
        st2.insert(built);
    }

    let mut t1 = Tally { first: r1.len(), ..Tally::default() };
    let mut t2 = Tally { first: r2.len(), ..Tally::default() };
    let goal1 = Goal { own_only: only2, heard: r1.len() };
    let goal2 = Goal { own_only: only1, heard: r2.len() };
    let quota1 = (q * r1.len() as f64).ceil() as usize;
    let quota2 = (q * r2.len() as f64).ceil() as usize;

    let mut sweep = Sweep::new(&mut rng);

    // Phase II: Rx1 collects its quota of b̃ equations. Without a Phase-IV
    // XOR, Rx2 must also get every b̃ bit it missed from this phase.
    link.begin_phase("II");
    while t1.n2 < quota1 || (!xor && t2.n2 < own_target(only1, &slack, &code_bt)) {
        let g = code_bt.draw(sweep.next_position(), &mut rng);
        let out = link.send(g.eval(&src_bt.bits))?;
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut st1, &k1, y, &[(&g, &src_bt)]);
        }
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut st2, &k2, y, &[(&g, &src_bt)]);
        }
        tally(&link, &mut t1, &mut t2, |t| &mut t.n2);
    }

    // Phase III: symmetric, Rx2 collects its quota of ã equations.
    link.begin_phase("III");
    while t2.n3 < quota2 {
        let h = code_at.draw(sweep.next_position(), &mut rng);
        let out = link.send(h.eval(&src_at.bits))?;
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut st1, &k1, y, &[(&h, &src_at)]);
        }
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut st2, &k2, y, &[(&h, &src_at)]);
        }
        tally(&link, &mut t1, &mut t2, |t| &mut t.n3);
    }

    // Phase IV.
    link.begin_phase("IV");
    let done = |t1: &Tally, t2: &Tally| {
        // Rx1's own bits heard only at Rx2 sit in ã; Rx2's heard only at Rx1 sit in b̃.
        let own1 = t1.n3 + t1.n4;
        let own2 = t2.n2 + if xor { t2.n4 } else { 0 };
        goal1.done(t1, m, eps, &slack, &code_at, own1) && goal2.done(t2, m, eps, &slack, &code_bt, own2)
    };
    while !done(&t1, &t2) {
        let pos = sweep.next_position();
        let h = code_at.draw(pos, &mut rng);
        let x_a = h.eval(&src_at.bits);
        let g = xor.then(|| code_bt.draw(pos, &mut rng));
        let x = x_a ^ g.as_ref().is_some_and(|g| g.eval(&src_bt.bits));
        let out = link.send(x)?;
        let mut parts = vec![(&h, &src_at)];
        if let Some(g) = &g {
            parts.push((g, &src_bt));
        }
        if let Some(y) = out.rx1.bit() {
            insert_received(&mut st1, &k1, y, &parts);
        }
        if let Some(y) = out.rx2.bit() {
            insert_received(&mut st2, &k2, y, &parts);
        }
        tally(&link, &mut t1, &mut t2, |t| &mut t.n4);
    }

    let equations = vec![count(1, "message 1 with heard interference", &st1), count(2, "message 2 with heard interference", &st2)];
    let decoded1 = if st1.solve_into(&mut k1) { k1.extract((0..m).map(a_var)) } else { None };
    let decoded2 = if st2.solve_into(&mut k2) { k2.extract((0..m).map(|j| b_var(m, j))) } else { None };
    Ok(finish(link, Outcome { decoded1, decoded2, equations, arq: None, arq_split: None }))
}

/// Credits the last slot to the receivers that heard it, as reported by
/// delayed feedback.
fn tally(link: &Link, t1: &mut Tally, t2: &mut Tally, field: impl Fn(&mut Tally) -> &mut usize) {
    let fb = link.feedback();
    if fb.last(ReceiverId::One) == Some(true) {
        *field(t1) += 1;
    }
    if fb.last(ReceiverId::Two) == Some(true) {
        *field(t2) += 1;
    }
}
